#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hara/domain.hpp"
#include "hara/ledger.hpp"
#include "hara/parsing.hpp"
#include "hara/provider.hpp"
#include "hara/templates.hpp"

namespace hara {

struct RunConfig {
    int concurrency_limit = 4;
    int repair_budget = 3;  // total attempts per logical call (initial + repairs)
    int geometries_requested = 20;
    int representatives_per_quadrant = 5;

    std::map<std::string, int> stage_token_budgets;  // stage name -> tokens
    int default_token_budget = 8000;

    std::string model_id = "scripted";
    double temperature = 0.0;
    int max_output_tokens = 4096;
    RetryPolicy retry;

    // Stage-3 failure policy: abort the run (default) or skip the pair.
    bool skip_failed_pairs = false;

    std::filesystem::path ledger_path;
    std::filesystem::path output_path;

    int token_budget(Stage stage) const;
    std::string digest() const;  // sha256 over behaviour-relevant fields
};

struct HaraTable {
    std::vector<HazardousEvent> rows;  // selected events, (quadrant, id) order
    RunContext context;

    // provenance
    std::string bundle_version;
    std::string model_id;
    std::string run_timestamp;
    std::string config_digest;
};

inline constexpr const char* kCsvHeader =
    "ID,Guideword,Malfunction,Core Scenario,Detailed Scenario,"
    "Hazardous Event,Severity,Severity Rationale,Safety Goal";

// Bit-exact review CSV: frozen header above, LF line endings, one row per
// selected hazardous event, Safety Goal empty exactly for S0 rows.
std::string export_csv(const HaraTable& table);

std::vector<Violation> validate_table(const HaraTable& table);

class Orchestrator {
public:
    Orchestrator(const TemplateSet& templates, std::shared_ptr<Provider> provider,
                 RunConfig config);

    // Full pipeline on a fresh ledger. No interactive input, ever.
    HaraTable run(const ItemDefinition& item);

    // Replays recorded exchanges from the existing ledger and issues
    // provider calls only for missing ones.
    HaraTable resume(const ItemDefinition& item);

    // Stages that fully completed during the last run/resume attempt.
    // Useful to report where an interrupted run stopped.
    const std::vector<Stage>& completed_stages() const { return completed_; }

private:
    struct StageCall;

    HaraTable execute(const ItemDefinition& item);
    CompletionResponse exchange(Stage stage, const std::string& logical_key,
                                const RenderedPrompt& prompt, int attempt);
    // Bounded repair loop around one logical call. `validate_rows` may
    // reject semantically bad rows (e.g. ids outside a quadrant).
    std::vector<CsvRow> stage_call(
        Stage stage, const std::string& logical_key,
        const std::map<std::string, std::string>& bindings,
        const StageSchema& schema,
        const std::function<std::optional<ParseFailure>(
            const std::vector<CsvRow>&)>& validate_rows = nullptr);

    std::vector<Malfunction> identify_hazards(const ItemDefinition& item);
    std::vector<RoadGeometry> generate_geometries(const ItemDefinition& item);
    std::vector<HazardousEvent> expand_scenarios(
        const ItemDefinition& item, const std::vector<Malfunction>& malfunctions,
        const std::vector<RoadGeometry>& geometries);
    void assess_severities(const ItemDefinition& item, const RunContext& ctx,
                           std::vector<HazardousEvent>& events);
    void formulate_safety_goals(const ItemDefinition& item,
                                const RunContext& ctx,
                                std::vector<HazardousEvent>& events);
    HaraTable cluster_and_select(const RunContext& ctx,
                                 std::vector<HazardousEvent> events);

    const TemplateSet& templates_;
    std::shared_ptr<Provider> provider_;
    RunConfig config_;
    std::unique_ptr<LedgerWriter> ledger_;
    ReplayProvider::Session cache_;  // recorded exchanges for resume
    std::vector<Stage> completed_;
};

}  // namespace hara
