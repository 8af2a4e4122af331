#pragma once

#include <filesystem>
#include <string>

#include "hara/domain.hpp"
#include "hara/orchestrator.hpp"

namespace hara {

// Everything a CLI invocation needs: RunConfig plus file locations and the
// provider selection. Credentials come only from the environment, never
// from this file.
struct CliConfig {
    RunConfig run;
    std::filesystem::path item_path;
    std::filesystem::path template_bundle;
    std::string provider_kind = "scripted";  // live | scripted | replay
    std::filesystem::path fixtures_dir;      // scripted provider
    std::filesystem::path replay_ledger;     // replay provider source
    std::string endpoint_url;
    std::string credential_env = "HARA_API_KEY";

    // Throws ConfigError on unreadable/ill-formed files or unknown keys'
    // value types.
    static CliConfig load(const std::filesystem::path& path);
};

// Reads an item definition file (UTF-8 plain text/markdown). The first
// non-empty line, stripped of leading '#' marks, is the function name; the
// whole file is the description.
ItemDefinition load_item_definition(const std::filesystem::path& path);

}  // namespace hara
