#pragma once

#include <stdexcept>
#include <string>

#include "hara/stage.hpp"

namespace hara {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

// Referential breakage inside run data (dangling ids, broken hash chains).
class IntegrityError : public Error {
public:
    using Error::Error;
};

class LedgerError : public Error {
public:
    using Error::Error;
};

// A pipeline stage failed terminally (repair budget exhausted, transport
// failure, missing replay data).
class StageError : public Error {
public:
    StageError(Stage stage, const std::string& detail)
        : Error(to_string(stage) + ": " + detail), stage_(stage) {}
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

}  // namespace hara
