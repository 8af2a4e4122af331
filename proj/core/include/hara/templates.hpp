#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "hara/stage.hpp"

namespace hara {

// One stage prompt, structured as Context / Task / Template. Placeholder
// syntax is {name} with lowercase identifiers; literal braces are written
// doubled ({{ and }}).
struct PromptTemplate {
    Stage stage = Stage::Hazards;
    std::string context_section;
    std::string task_section;
    std::string template_section;  // response-format exemplar, never empty
    std::set<std::string> declared_placeholders;
};

struct RenderedPrompt {
    Stage stage = Stage::Hazards;
    std::string text;
    std::map<std::string, std::string> bindings;
    int token_estimate = 0;
};

// Validated bundle of exactly one template per stage, loaded from a
// directory of stage text files plus a manifest.
class TemplateSet {
public:
    // Throws TemplateError on missing/duplicate stages, unreadable files or
    // placeholder declaration mismatches.
    static TemplateSet load(const std::filesystem::path& bundle_dir);

    const PromptTemplate& at(Stage stage) const;
    const std::string& version() const { return version_; }

private:
    std::map<Stage, PromptTemplate> templates_;
    std::string version_;
};

// Placeholder names occurring in the text ({{ }} escapes excluded).
// Throws TemplateError on unbalanced or ill-formed markers.
std::set<std::string> find_placeholders(std::string_view text);

// Strict substitution: bindings must cover declared_placeholders exactly and
// every value must be non-empty. Throws TemplateError otherwise.
RenderedPrompt render(const PromptTemplate& tmpl,
                      const std::map<std::string, std::string>& bindings);

// Deterministic character-count heuristic (ceil(len/4)), monotone in length.
int estimate_tokens(std::string_view text);

}  // namespace hara
