// Acceptance suite: one pass/fail line per criterion. Runs the pipeline
// against the deterministic scripted provider; the single live-model check
// is opt-in via environment variables. stdin is closed for the whole
// process, so any stage that tried to prompt interactively would fail.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hara/config.hpp"
#include "hara/error.hpp"
#include "hara/hash.hpp"
#include "hara/ledger.hpp"
#include "hara/live_provider.hpp"
#include "hara/orchestrator.hpp"
#include "hara/parsing.hpp"
#include "hara/provider.hpp"
#include "hara/templates.hpp"
#include "hara/validate.hpp"

#ifndef HARA_SOURCE_DIR
#error "HARA_SOURCE_DIR must be defined by the build"
#endif

using namespace hara;
namespace fs = std::filesystem;

namespace {

fs::path source_dir() { return HARA_SOURCE_DIR; }
fs::path templates_dir() {
    return source_dir() / "assets" / "templates" / "default";
}
fs::path scripted_dir() {
    return source_dir() / "assets" / "fixtures" / "scripted";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

struct Scratch {
    fs::path root;
    Scratch() {
        root = fs::temp_directory_path() /
               ("hara_acceptance_" + std::to_string(::getpid()));
        fs::create_directories(root);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
    fs::path operator/(const std::string& name) const { return root / name; }
};

class FnProvider : public Provider {
public:
    using Fn = std::function<CompletionResponse(const CompletionRequest&)>;
    explicit FnProvider(Fn fn) : fn_(std::move(fn)) {}
    CompletionResponse complete(const CompletionRequest& req) override {
        return fn_(req);
    }
    ReadinessReport probe(const std::vector<Stage>&) override { return {}; }

private:
    Fn fn_;
};

class CountingProvider : public Provider {
public:
    explicit CountingProvider(std::shared_ptr<Provider> inner)
        : inner_(std::move(inner)) {}
    CompletionResponse complete(const CompletionRequest& req) override {
        {
            std::lock_guard lock(mu_);
            ++counts_[req.stage_tag];
            ++total_;
        }
        return inner_->complete(req);
    }
    ReadinessReport probe(const std::vector<Stage>& planned) override {
        return inner_->probe(planned);
    }
    int count(Stage s) const {
        std::lock_guard lock(mu_);
        auto it = counts_.find(s);
        return it == counts_.end() ? 0 : it->second;
    }
    int total() const {
        std::lock_guard lock(mu_);
        return total_;
    }

private:
    std::shared_ptr<Provider> inner_;
    mutable std::mutex mu_;
    std::map<Stage, int> counts_;
    int total_ = 0;
};

CompletionResponse text_response(std::string text) {
    CompletionResponse r;
    r.raw_text = std::move(text);
    return r;
}

RunConfig base_config(const fs::path& ledger) {
    RunConfig c;
    c.ledger_path = ledger;
    c.retry.base_delay = std::chrono::milliseconds(0);
    return c;
}

// Small deterministic stand-in pipeline used where the full scripted corpus
// would be overkill (parser-robustness mini runs).
CompletionResponse mini_pipeline(const CompletionRequest& req) {
    switch (req.stage_tag) {
        case Stage::Hazards:
            return text_response(
                "Guideword,Malfunction\n"
                "Omission,Fails to engage when required\n"
                "Commission,Engages without a trigger\n");
        case Stage::Geometries:
            return text_response(
                "Lanes,Shape,Slope,Features\n"
                "2,straight,flat,none\n"
                "1,curve,downhill,tunnel\n");
        case Stage::Expansion:
            return text_response(
                "Detailed Scenario,Agents,Hazardous Event\n"
                "\"The malfunction manifests mid-manoeuvre.\",none,"
                "\"Collision with a following vehicle.\"\n");
        case Stage::Severity:
            return text_response(
                "Severity,Rationale\nS2,Severe but survivable impact.\n");
        case Stage::SafetyGoal:
            return text_response(
                "Safety Goal\nThe function shall not cause a collision.\n");
        case Stage::ClusterSelect: {
            // pick the first candidate offered in the prompt
            auto pos = req.prompt_text.find("ID,Hazardous Event Summary\n");
            std::string id = pos == std::string::npos
                                 ? "E001"
                                 : req.prompt_text.substr(pos + 27, 4);
            return text_response("Selected ID\n" + id + "\n");
        }
    }
    return text_response("");
}

// ---------------------------------------------------------------------------

int failures = 0;

void report(int criterion, const std::string& what, bool pass,
            const std::string& note = "") {
    std::printf("%s criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", criterion,
                what.c_str(), note.empty() ? "" : " — ", note.c_str());
    if (!pass) ++failures;
}

void run_criterion(int criterion, const std::string& what,
                   const std::function<std::string()>& body) {
    try {
        auto note = body();
        report(criterion, what, true, note);
    } catch (const std::exception& e) {
        report(criterion, what, false, e.what());
    }
}

void require(bool cond, const std::string& message) {
    if (!cond) throw std::runtime_error(message);
}

// ---------------------------------------------------------------------------

std::string criterion1_structural_constants() {
    Scratch scratch;
    auto templates = TemplateSet::load(templates_dir());
    auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                     "caem_item.md");
    auto counting = std::make_shared<CountingProvider>(
        std::make_shared<ScriptedProvider>(scripted_dir()));
    Orchestrator orch(templates, counting, base_config(scratch / "l.jsonl"));

    auto start = std::chrono::steady_clock::now();
    auto table = orch.run(item);
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    size_t malfunctions = table.context.malfunctions.size();
    require(table.context.geometries.size() == 20, "expected 20 geometries");
    require(counting->count(Stage::Expansion) ==
                static_cast<int>(malfunctions) * 20,
            "stage-3 call count != |malfunctions| x 20");
    require(table.rows.size() == 20, "expected exactly 20 final rows");

    std::map<std::string, int> per_quadrant;
    for (const auto& row : table.rows)
        ++per_quadrant[classify_quadrant(row, table.context).label()];
    require(per_quadrant.size() == 4, "expected four quadrants");
    for (const auto& [label, n] : per_quadrant)
        require(n <= 5, label + " holds more than 5 representatives");
    require(elapsed.count() < 10000, "run exceeded 10 s");
    return "6x20 fan-out, 4 quadrants x 5 rows, " +
           std::to_string(elapsed.count()) + " ms";
}

std::string criterion2_goal_gating() {
    // 160 randomized events in deterministic (quadrant, id) order
    RunContext ctx;
    Malfunction om{"M01", {GuidewordKind::Omission, ""}, "fails to act"};
    Malfunction com{"M02", {GuidewordKind::Commission, ""}, "acts uninvited"};
    ctx.malfunctions.emplace(om.id, om);
    ctx.malfunctions.emplace(com.id, com);
    RoadGeometry g;
    g.id = "G01";
    g.lanes = 2;
    g.shape = "straight";
    ctx.geometries.emplace(g.id, g);

    std::mt19937 rng(2024);
    std::uniform_int_distribution<int> pick_severity(0, 3);
    std::map<int, std::vector<HazardousEvent>> buckets;
    for (int i = 1; i <= 160; ++i) {
        HazardousEvent ev;
        ev.id = make_id("E", i, 3);
        auto severity = static_cast<SeverityLevel>(pick_severity(rng));
        ev.malfunction_ref = (i % 2 == 0) ? "M02" : "M01";
        ev.scenario.geometry_ref = "G01";
        ev.scenario.narrative = "scenario " + std::to_string(i);
        ev.consequence = "consequence " + std::to_string(i);
        ev.assessment = SeverityAssessment{severity, "rationale"};
        if (severity > SeverityLevel::S0)
            ev.goal = SafetyGoal{make_id("SG", i, 3), ev.id, "goal text"};
        auto q = classify_quadrant(ev, ctx);
        int index = 0;
        for (int k = 0; k < 4; ++k)
            if (kQuadrantOrder[k].first == q.guideword_kind &&
                kQuadrantOrder[k].second == q.severity_band)
                index = k;
        buckets[index].push_back(std::move(ev));
    }
    HaraTable table;
    table.context = ctx;
    for (auto& [_, bucket] : buckets)
        for (auto& ev : bucket) table.rows.push_back(std::move(ev));

    auto csv = export_csv(table);
    require(validate_exported_csv(csv).empty(), "randomized table not clean");

    // independent re-parse of the CSV: goal non-empty <=> severity > S0
    auto parsed = parse_csv(csv);
    require(parsed.rows.size() == 161, "row count after re-parse");
    for (size_t r = 1; r < parsed.rows.size(); ++r) {
        const auto& row = parsed.rows[r];
        bool high = row[6] != "S0";
        require(high == !row[8].empty(),
                "gating violated at " + row[0] + " (" + row[6] + ")");
    }

    // a seeded violation must be caught
    auto broken = table;
    bool seeded = false;
    for (auto& ev : broken.rows)
        if (ev.assessment->severity == SeverityLevel::S0) {
            ev.goal = SafetyGoal{"SG999", ev.id, "should not exist"};
            seeded = true;
            break;
        }
    require(seeded, "no S0 event among 160 randomized events");
    require(!validate_exported_csv(export_csv(broken)).empty(),
            "seeded S0 goal not flagged");
    return "160 randomized events, zero violations, seeded fault caught";
}

std::string criterion3_determinism_and_replay() {
    Scratch scratch;
    auto templates = TemplateSet::load(templates_dir());
    auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                     "caem_item.md");
    auto scripted = [] {
        return std::make_shared<ScriptedProvider>(scripted_dir());
    };

    Orchestrator first(templates, scripted(), base_config(scratch / "a.jsonl"));
    auto baseline = export_csv(first.run(item));
    Orchestrator second(templates, scripted(),
                        base_config(scratch / "b.jsonl"));
    require(export_csv(second.run(item)) == baseline,
            "repeat run is not byte-identical");

    auto full_ledger = read_file(scratch / "a.jsonl");
    for (size_t boundary = 1; boundary <= kAllStages.size(); ++boundary) {
        // keep the header plus all entries of the first `boundary` stages
        std::set<std::string> keep;
        for (size_t s = 0; s < boundary; ++s)
            keep.insert(to_string(kAllStages[s]));
        std::istringstream in(full_ledger);
        std::string line, kept;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (!header &&
                !keep.contains(
                    nlohmann::json::parse(line).at("stage").get<std::string>()))
                continue;
            header = false;
            kept += line;
            kept += '\n';
        }
        auto path = scratch / ("resume" + std::to_string(boundary) + ".jsonl");
        write_file(path, kept);

        auto counting = std::make_shared<CountingProvider>(scripted());
        Orchestrator resumed(templates, counting, base_config(path));
        auto csv = export_csv(resumed.resume(item));
        require(csv == baseline,
                "resume at boundary " + std::to_string(boundary) +
                    " diverges from the uninterrupted CSV");
        for (size_t s = 0; s < boundary; ++s)
            require(counting->count(kAllStages[s]) == 0,
                    "duplicate provider call for completed stage " +
                        to_string(kAllStages[s]));
    }
    return "2 identical runs, 6 interruption points, zero duplicate calls";
}

bool stdin_probe_failed = false;  // set in main right after close(0)

std::string criterion4_non_intervention() {
    // stdin was closed in main() before any criterion ran; prove it, then
    // complete a full run in that state.
    require(stdin_probe_failed, "stdin is still readable");

    Scratch scratch;
    auto templates = TemplateSet::load(templates_dir());
    auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                     "caem_item.md");
    Orchestrator orch(templates,
                      std::make_shared<ScriptedProvider>(scripted_dir()),
                      base_config(scratch / "l.jsonl"));
    auto table = orch.run(item);
    require(table.rows.size() == 20, "run did not complete");
    return "full run with fd 0 closed; read(0) fails with errno";
}

std::string criterion5_template_generality() {
    Scratch scratch;
    auto templates = TemplateSet::load(templates_dir());
    auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                     "tjc_item.md");
    Orchestrator orch(templates,
                      std::make_shared<ScriptedProvider>(scripted_dir()),
                      base_config(scratch / "l.jsonl"));
    auto table = orch.run(item);
    require(table.rows.size() == 20,
            "second item definition did not complete");
    require(validate_table(table).empty(), "second item table not clean");

    std::vector<std::string> denylist{"collision avoidance by evasive maneuver",
                                      "caem", "traffic jam chauffeur"};
    for (const auto& entry : fs::directory_iterator(templates_dir())) {
        auto text = read_file(entry.path());
        std::transform(text.begin(), text.end(), text.begin(),
                       [](unsigned char c) {
                           return static_cast<char>(std::tolower(c));
                       });
        for (const auto& term : denylist)
            require(text.find(term) == std::string::npos,
                    entry.path().filename().string() +
                        " mentions a fixture function: " + term);
    }
    return "same bundle, second item, 20 rows; no fixture name in templates";
}

std::string criterion6_parser_robustness() {
    // 22 malformed responses, each tagged with the stage it pretends to
    // answer. Fed through the real repair loop: within 3 attempts every one
    // must either parse (none of these do) or end in a typed StageError.
    struct Malformed {
        Stage stage;
        const char* text;
    };
    const std::vector<Malformed> corpus{
        {Stage::Hazards, "I cannot help with analyzing vehicle hazards."},
        {Stage::Hazards, "Guideword,Malfunction\n"},
        {Stage::Hazards, "Guideword;Malfunction\nOmission;stops"},
        {Stage::Hazards, "Keyword,Malfunction\nOmission,stops\n"},
        {Stage::Hazards, "Guideword,Malfunction\nDelay,reacts slowly\n"},
        {Stage::Hazards, "Guideword,Malfunction\nOmission,\"unterminated"},
        {Stage::Hazards, "Guideword,Malfunction\nOmission\n"},
        {Stage::Hazards, "Guideword,Malfunction\nOmission,x,extra cell\n"},
        {Stage::Geometries, "Lanes,Shape,Slope,Features\n2,straight,flat,none\n"},
        {Stage::Geometries, "Lanes,Shape,Slope,Features\nmany,curve,flat,none\n"
                            "2,straight,flat,none\n"},
        {Stage::Geometries, "Lanes,Shape,Slope,Features\n-1,curve,flat,none\n"
                            "2,straight,flat,none\n"},
        {Stage::Geometries, "| Lanes | Shape |\n|---|---|\n| 2 | curve |\n"},
        {Stage::Severity, "The severity here is clearly S2 in my view."},
        {Stage::Severity, "Severity,Rationale\nmoderate,hard impact\n"},
        {Stage::Severity, "Severity,Rationale\nS4,beyond the scale\n"},
        {Stage::Severity, "Severity,Rationale\ns1,lowercase token\n"},
        {Stage::Severity, "Severity,Rationale\nS2,\"rationale cut mid-quo"},
        {Stage::Severity, "Severity,Rationale\nS2,first\nS1,second row\n"},
        {Stage::Severity, "Severity,Rationale\nS2,\n"},
        {Stage::SafetyGoal, "Safety Goal\n\n"},
        {Stage::SafetyGoal, "Goal\nThe vehicle shall stop.\n"},
        {Stage::ClusterSelect, "Selected ID\nnot-an-id\n"},
    };

    int stage_errors = 0;
    for (const auto& bad : corpus) {
        Scratch scratch;
        RunConfig config = base_config(scratch / "l.jsonl");
        config.geometries_requested = 2;
        config.representatives_per_quadrant = 1;
        auto templates = TemplateSet::load(templates_dir());
        auto provider = std::make_shared<FnProvider>(
            [&bad](const CompletionRequest& req) {
                if (req.stage_tag == bad.stage)
                    return text_response(bad.text);
                if (req.stage_tag == Stage::Expansion)
                    // two severe events per guideword so ClusterSelect
                    // actually gets called when it is the malformed stage
                    return text_response(
                        "Detailed Scenario,Agents,Hazardous Event\n"
                        "\"The malfunction manifests.\",none,"
                        "\"Unsurvivable impact.\"\n");
                return mini_pipeline(req);
            });
        auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                         "caem_item.md");
        Orchestrator orch(templates, provider, config);
        try {
            orch.run(item);
            throw std::runtime_error(std::string("malformed fixture for ") +
                                     to_string(bad.stage) +
                                     " was accepted as valid rows");
        } catch (const StageError& e) {
            require(e.stage() == bad.stage,
                    "stage error surfaced at the wrong stage");
            ++stage_errors;
        }
        require(read_ledger(config.ledger_path).entries.size() >= 1,
                "attempts were not recorded");
    }

    // fuzz: 2500 random inputs x 4 schemas = 10000 cases, never a crash
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> len(0, 400);
    std::uniform_int_distribution<int> byte(0, 255);
    const std::vector<StageSchema> schemas{
        schema_for(Stage::Hazards), schema_for(Stage::Geometries, 5),
        schema_for(Stage::Severity), schema_for(Stage::ClusterSelect)};
    int cases = 0;
    for (int i = 0; i < 2500; ++i) {
        std::string input;
        int n = len(rng);
        for (int j = 0; j < n; ++j) input += static_cast<char>(byte(rng));
        for (const auto& schema : schemas) {
            extract_table(input, schema);  // must not throw
            ++cases;
        }
    }
    return std::to_string(corpus.size()) + " malformed fixtures -> " +
           std::to_string(stage_errors) + " typed stage errors; " +
           std::to_string(cases) + " fuzz cases without a crash";
}

std::string criterion7_ledger_integrity() {
    Scratch scratch;
    auto templates = TemplateSet::load(templates_dir());
    auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                     "caem_item.md");
    auto config = base_config(scratch / "l.jsonl");
    Orchestrator orch(templates,
                      std::make_shared<ScriptedProvider>(scripted_dir()),
                      config);
    auto baseline = export_csv(orch.run(item));
    auto pristine = read_file(config.ledger_path);

    // single-byte corruption at 64 positions spread over the whole file
    std::mt19937 rng(7);
    std::uniform_int_distribution<size_t> pos(0, pristine.size() - 1);
    for (int trial = 0; trial < 64; ++trial) {
        auto corrupted = pristine;
        size_t p = pos(rng);
        corrupted[p] = static_cast<char>(corrupted[p] ^ 0x01);
        auto path = scratch / "corrupt.jsonl";
        write_file(path, corrupted);
        require(!verify_ledger(path).clean,
                "corruption at byte " + std::to_string(p) + " not detected");
    }

    // export from the intact ledger reproduces the CSV byte-exactly and
    // never needs the provider
    auto copy = scratch / "copy.jsonl";
    write_file(copy, pristine);
    auto no_calls = std::make_shared<FnProvider>([](const CompletionRequest&) {
        CompletionResponse r;
        r.finish_reason = FinishReason::transport_error;
        return r;
    });
    auto export_config = config;
    export_config.ledger_path = copy;
    export_config.retry.max_retries = 0;
    Orchestrator replayed(templates, no_calls, export_config);
    require(export_csv(replayed.resume(item)) == baseline,
            "export from intact ledger diverges");
    return "64 single-byte corruptions detected; export byte-exact";
}

std::string criterion8_live_smoke() {
    const char* endpoint = std::getenv("HARA_SMOKE_ENDPOINT");
    const char* model = std::getenv("HARA_SMOKE_MODEL");
    if (!endpoint || !model) {
        // the timing claim itself needs a live model and a working day;
        // desk-scale substitute is the sub-10-second mock run of criterion 1
        return "live smoke skipped (HARA_SMOKE_ENDPOINT/HARA_SMOKE_MODEL "
               "unset); mock end-to-end run stands in";
    }
    LiveProviderConfig live{endpoint, model, "HARA_API_KEY"};
    LiveProvider provider(live, make_httplib_transport());
    auto readiness =
        provider.probe({kAllStages.begin(), kAllStages.end()});
    require(readiness.ready, "live provider probe failed");

    auto templates = TemplateSet::load(templates_dir());
    auto item = load_item_definition(source_dir() / "assets" / "fixtures" /
                                     "caem_item.md");
    auto prompt = render(templates.at(Stage::Hazards),
                         {{"item_definition", item.description}});
    CompletionRequest req;
    req.prompt_text = prompt.text;
    req.model_id = model;
    req.stage_tag = Stage::Hazards;
    auto resp = provider.complete(req);
    require(resp.finish_reason == FinishReason::complete,
            "live hazards call did not complete: " + to_string(resp.finish_reason));
    auto outcome = extract_table(resp.raw_text, schema_for(Stage::Hazards));
    require(outcome.ok(), "live hazards response failed schema validation");
    return "live hazards call returned " +
           std::to_string(outcome.rows.size()) + " schema-valid rows";
}

}  // namespace

int main() {
    ::close(0);  // criterion 4: no interactive input for the whole suite
    char probe_buf[1];
    stdin_probe_failed = ::read(0, probe_buf, 1) < 0;

    run_criterion(1, "structural constants of the full mock run",
                  criterion1_structural_constants);
    run_criterion(2, "safety-goal gating over randomized events",
                  criterion2_goal_gating);
    run_criterion(3, "determinism and replay at every stage boundary",
                  criterion3_determinism_and_replay);
    run_criterion(4, "non-intervention with stdin closed",
                  criterion4_non_intervention);
    run_criterion(5, "template generality across item definitions",
                  criterion5_template_generality);
    run_criterion(6, "parser robustness on malformed and fuzzed input",
                  criterion6_parser_robustness);
    run_criterion(7, "ledger integrity and byte-exact export",
                  criterion7_ledger_integrity);
    run_criterion(8, "timing claim substitute / opt-in live smoke",
                  criterion8_live_smoke);

    return failures == 0 ? 0 : 1;
}
