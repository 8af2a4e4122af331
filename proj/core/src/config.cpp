#include "hara/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hara/error.hpp"

namespace hara {
namespace {

nlohmann::json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("ill-formed config " + path.string() + ": " +
                          e.what());
    }
}

}  // namespace

CliConfig CliConfig::load(const std::filesystem::path& path) {
    auto j = parse_file(path);
    CliConfig c;
    try {
        c.item_path = j.value("item_definition", "");
        c.template_bundle = j.value("template_bundle", "");
        c.run.ledger_path = j.value("ledger", "");
        c.run.output_path = j.value("output", "");

        if (j.contains("provider")) {
            const auto& p = j["provider"];
            c.provider_kind = p.value("kind", c.provider_kind);
            c.fixtures_dir = p.value("fixtures", "");
            c.replay_ledger = p.value("replay_ledger", "");
            c.endpoint_url = p.value("endpoint", "");
            c.credential_env = p.value("credential_env", c.credential_env);
            c.run.model_id = p.value("model", c.run.model_id);
            c.run.temperature = p.value("temperature", c.run.temperature);
            c.run.max_output_tokens =
                p.value("max_output_tokens", c.run.max_output_tokens);
            c.run.retry.max_retries =
                p.value("max_retries", c.run.retry.max_retries);
            int base_delay_ms = p.value(
                "retry_base_delay_ms",
                static_cast<int>(c.run.retry.base_delay.count()));
            c.run.retry.base_delay = std::chrono::milliseconds(base_delay_ms);
        }
        if (j.contains("run")) {
            const auto& r = j["run"];
            c.run.concurrency_limit =
                r.value("concurrency_limit", c.run.concurrency_limit);
            c.run.repair_budget = r.value("repair_budget", c.run.repair_budget);
            c.run.geometries_requested =
                r.value("geometries", c.run.geometries_requested);
            c.run.representatives_per_quadrant = r.value(
                "representatives_per_quadrant",
                c.run.representatives_per_quadrant);
            c.run.skip_failed_pairs =
                r.value("skip_failed_pairs", c.run.skip_failed_pairs);
            c.run.default_token_budget =
                r.value("default_token_budget", c.run.default_token_budget);
            if (r.contains("stage_token_budgets"))
                for (const auto& [k, v] : r["stage_token_budgets"].items())
                    c.run.stage_token_budgets[k] = v.get<int>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad value in config " + path.string() + ": " +
                          e.what());
    }
    return c;
}

ItemDefinition load_item_definition(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read item definition: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();

    ItemDefinition item;
    item.description = ss.str();

    std::istringstream lines(item.description);
    std::string line;
    while (std::getline(lines, line)) {
        size_t b = 0;
        while (b < line.size() &&
               (line[b] == '#' || line[b] == ' ' || line[b] == '\t'))
            ++b;
        size_t e = line.size();
        while (e > b && (line[e - 1] == '\r' || line[e - 1] == ' ')) --e;
        if (e > b) {
            item.function_name = line.substr(b, e - b);
            break;
        }
    }
    if (auto problem = validate_item(item); !problem.empty())
        throw ConfigError("item definition " + path.string() + ": " + problem);
    return item;
}

}  // namespace hara
