#include "hara/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <thread>

#include "hara/error.hpp"
#include "hara/hash.hpp"

namespace hara {
namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return s;
}

int id_width(size_t count, int minimum) {
    int digits = 1;
    for (size_t v = count; v >= 10; v /= 10) ++digits;
    return std::max(minimum, digits);
}

std::string now_iso8601_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec);
    return buf;
}

// Index-addressed parallel loop. Results keyed by index keep every merge
// deterministic regardless of completion order; on failure the exception of
// the lowest index is rethrown.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
    if (n == 0) return;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (!stop.load(std::memory_order_relaxed)) {
                size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                    stop.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

std::vector<std::string> split_list(const std::string& cell) {
    std::vector<std::string> out;
    std::string current;
    for (char c : cell) {
        if (c == ';') {
            std::string t = trim(current);
            if (!t.empty()) out.push_back(t);
            current.clear();
        } else {
            current += c;
        }
    }
    std::string t = trim(current);
    if (!t.empty()) out.push_back(t);
    return out;
}

// "pedestrian (crossing from the right)" -> label + trajectory
ScenarioAgent parse_agent(const std::string& text) {
    ScenarioAgent agent;
    auto open = text.find('(');
    if (open != std::string::npos && text.back() == ')') {
        agent.label = trim(text.substr(0, open));
        agent.trajectory = trim(text.substr(open + 1, text.size() - open - 2));
    } else {
        agent.label = trim(text);
    }
    return agent;
}

}  // namespace

int RunConfig::token_budget(Stage stage) const {
    auto it = stage_token_budgets.find(to_string(stage));
    return it == stage_token_budgets.end() ? default_token_budget : it->second;
}

std::string RunConfig::digest() const {
    std::string material;
    material += "concurrency=" + std::to_string(concurrency_limit);
    material += ";repair=" + std::to_string(repair_budget);
    material += ";geometries=" + std::to_string(geometries_requested);
    material += ";representatives=" +
                std::to_string(representatives_per_quadrant);
    material += ";model=" + model_id;
    material += ";temperature=" + std::to_string(temperature);
    material += ";max_output_tokens=" + std::to_string(max_output_tokens);
    material += ";skip_failed_pairs=" + std::to_string(skip_failed_pairs);
    material += ";default_budget=" + std::to_string(default_token_budget);
    for (const auto& [k, v] : stage_token_budgets)
        material += ";budget." + k + "=" + std::to_string(v);
    return sha256_hex(material);
}

std::string export_csv(const HaraTable& table) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& event : table.rows) {
        const Malfunction* mal = nullptr;
        if (auto it = table.context.malfunctions.find(event.malfunction_ref);
            it != table.context.malfunctions.end())
            mal = &it->second;
        std::string core;
        if (auto it = table.context.geometries.find(event.scenario.geometry_ref);
            it != table.context.geometries.end())
            core = it->second.summary();

        CsvRow row{
            event.id,
            mal ? mal->guideword.display() : "",
            mal ? mal->statement : "",
            core,
            event.scenario.narrative,
            event.consequence,
            event.assessment ? to_string(event.assessment->severity) : "",
            event.assessment ? event.assessment->rationale : "",
            event.goal ? event.goal->text : "",
        };
        out += csv_join(row);
        out += '\n';
    }
    return out;
}

std::vector<Violation> validate_table(const HaraTable& table) {
    std::vector<Violation> out;
    std::set<std::string> seen;
    for (const auto& event : table.rows) {
        if (!seen.insert(event.id).second)
            out.push_back({"duplicate-id", "event id " + event.id +
                                               " occurs more than once"});
        auto report = validate_event(event, table.context);
        out.insert(out.end(), report.begin(), report.end());
    }
    return out;
}

Orchestrator::Orchestrator(const TemplateSet& templates,
                           std::shared_ptr<Provider> provider, RunConfig config)
    : templates_(templates),
      provider_(std::move(provider)),
      config_(std::move(config)) {
    if (config_.concurrency_limit < 1 || config_.repair_budget < 1 ||
        config_.geometries_requested < 1 ||
        config_.representatives_per_quadrant < 1)
        throw ConfigError("all RunConfig counts must be >= 1");
}

HaraTable Orchestrator::run(const ItemDefinition& item) {
    cache_.clear();
    LedgerHeader header{
        "hara 0.1.0", templates_.version(), config_.digest(), config_.model_id,
        kHashAlgorithm,
    };
    ledger_ = std::make_unique<LedgerWriter>(
        LedgerWriter::create(config_.ledger_path, header));
    return execute(item);
}

HaraTable Orchestrator::resume(const ItemDefinition& item) {
    auto contents = read_ledger(config_.ledger_path);  // verifies the chain
    cache_.clear();
    for (const auto& e : contents.entries) {
        // transport errors are not reusable exchanges; everything else is
        // replayed verbatim, last entry per key wins.
        if (e.finish_reason == FinishReason::transport_error) continue;
        cache_[ReplayProvider::key(e.stage, e.request_digest, e.attempt)] = {
            e.response_text, e.finish_reason};
    }
    ledger_ = std::make_unique<LedgerWriter>(
        LedgerWriter::open_existing(config_.ledger_path));
    return execute(item);
}

CompletionResponse Orchestrator::exchange(Stage stage,
                                          const std::string& logical_key,
                                          const RenderedPrompt& prompt,
                                          int attempt) {
    auto cache_key =
        ReplayProvider::key(stage, sha256_hex(prompt.text), attempt);
    if (auto it = cache_.find(cache_key); it != cache_.end()) {
        CompletionResponse resp;
        resp.raw_text = it->second.response_text;
        resp.finish_reason = it->second.finish_reason;
        return resp;
    }

    CompletionRequest request;
    request.prompt_text = prompt.text;
    request.model_id = config_.model_id;
    request.temperature = config_.temperature;
    request.max_output_tokens = config_.max_output_tokens;
    request.stage_tag = stage;
    request.attempt = attempt;

    CompletionResponse resp;
    auto delay = config_.retry.base_delay;
    for (int tries = 0;; ++tries) {
        resp = provider_->complete(request);
        // Write-ahead: the response is usable only once its ledger entry is
        // durably appended.
        ledger_->append(stage, logical_key, attempt, prompt.text,
                        resp.raw_text, resp.finish_reason);
        if (resp.finish_reason != FinishReason::transport_error ||
            tries >= config_.retry.max_retries)
            break;
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(static_cast<long>(
            static_cast<double>(delay.count()) * config_.retry.multiplier));
    }
    return resp;
}

std::vector<CsvRow> Orchestrator::stage_call(
    Stage stage, const std::string& logical_key,
    const std::map<std::string, std::string>& bindings,
    const StageSchema& schema,
    const std::function<std::optional<ParseFailure>(
        const std::vector<CsvRow>&)>& validate_rows) {
    RenderedPrompt original = render(templates_.at(stage), bindings);
    if (original.token_estimate > config_.token_budget(stage))
        throw StageError(stage, "rendered prompt estimate (" +
                                    std::to_string(original.token_estimate) +
                                    " tokens) exceeds the stage budget (" +
                                    std::to_string(config_.token_budget(stage)) +
                                    "); refusing to send");

    RenderedPrompt prompt = original;
    ParseFailure last_failure;
    for (int attempt = 1; attempt <= config_.repair_budget; ++attempt) {
        auto resp = exchange(stage, logical_key, prompt, attempt);
        if (resp.finish_reason == FinishReason::transport_error) {
            std::string detail = "transport failure";
            if (auto it = resp.provider_meta.find("error");
                it != resp.provider_meta.end())
                detail += ": " + it->second;
            throw StageError(stage, detail + " (key " + logical_key + ")");
        }
        if (resp.finish_reason == FinishReason::truncated) {
            last_failure = {ParseFailureCode::truncated,
                            "response was cut off at the token limit",
                            resp.raw_text.substr(
                                resp.raw_text.size() > 400
                                    ? resp.raw_text.size() - 400
                                    : 0)};
        } else if (resp.finish_reason == FinishReason::refused) {
            last_failure = {ParseFailureCode::no_table_found,
                            "provider refused to answer", resp.raw_text};
        } else {
            auto outcome = extract_table(resp.raw_text, schema);
            if (outcome.ok()) {
                std::optional<ParseFailure> semantic;
                if (validate_rows) semantic = validate_rows(outcome.rows);
                if (!semantic) return outcome.rows;
                last_failure = *semantic;
            } else {
                last_failure = *outcome.failure;
            }
        }
        if (attempt < config_.repair_budget)
            prompt = build_repair_prompt(original, schema, last_failure);
    }
    throw StageError(stage, "repair budget (" +
                                std::to_string(config_.repair_budget) +
                                " attempts) exhausted for key " + logical_key +
                                "; last failure " +
                                to_string(last_failure.code) + ": " +
                                last_failure.detail);
}

std::vector<Malfunction> Orchestrator::identify_hazards(
    const ItemDefinition& item) {
    auto rows = stage_call(Stage::Hazards, "item",
                           {{"item_definition", item.description}},
                           schema_for(Stage::Hazards));
    std::vector<Malfunction> out;
    std::set<std::string> seen;  // case-insensitive statement dedup
    for (const auto& row : rows) {
        std::string statement = trim(row[1]);
        if (!seen.insert(lower(statement)).second) continue;
        Malfunction m;
        m.guideword = *parse_guideword(row[0]);
        m.statement = statement;
        out.push_back(std::move(m));
    }
    int width = id_width(out.size(), 2);
    for (size_t i = 0; i < out.size(); ++i)
        out[i].id = make_id("M", static_cast<int>(i + 1), width);
    return out;
}

std::vector<RoadGeometry> Orchestrator::generate_geometries(
    const ItemDefinition& item) {
    auto schema = schema_for(Stage::Geometries, config_.geometries_requested);
    auto rows = stage_call(
        Stage::Geometries, "geometries",
        {{"item_definition", item.description},
         {"geometry_count", std::to_string(config_.geometries_requested)}},
        schema);
    std::vector<RoadGeometry> out;
    int width = id_width(rows.size(), 2);
    for (size_t i = 0; i < rows.size(); ++i) {
        RoadGeometry g;
        g.id = make_id("G", static_cast<int>(i + 1), width);
        g.lanes = std::stoi(trim(rows[i][0]));
        g.shape = trim(rows[i][1]);
        g.slope = trim(rows[i][2]);
        g.features = split_list(rows[i][3]);
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<HazardousEvent> Orchestrator::expand_scenarios(
    const ItemDefinition& item, const std::vector<Malfunction>& malfunctions,
    const std::vector<RoadGeometry>& geometries) {
    struct Pair {
        const Malfunction* mal;
        const RoadGeometry* geo;
    };
    std::vector<Pair> pairs;
    pairs.reserve(malfunctions.size() * geometries.size());
    for (const auto& m : malfunctions)
        for (const auto& g : geometries) pairs.push_back({&m, &g});

    auto schema = schema_for(Stage::Expansion);
    std::vector<std::vector<HazardousEvent>> per_pair(pairs.size());
    parallel_for(pairs.size(), config_.concurrency_limit, [&](size_t i) {
        const auto& [mal, geo] = pairs[i];
        std::string key = mal->id + "x" + geo->id;
        std::vector<CsvRow> rows;
        try {
            rows = stage_call(
                Stage::Expansion, key,
                {{"item_definition", item.description},
                 {"malfunction", mal->guideword.display() + ": " + mal->statement},
                 {"geometry", geo->id + ": " + geo->summary()}},
                schema);
        } catch (const StageError&) {
            if (config_.skip_failed_pairs) {
                std::fprintf(stderr, "warning: skipping pair %s\n", key.c_str());
                return;
            }
            throw;
        }
        for (const auto& row : rows) {
            HazardousEvent ev;
            ev.malfunction_ref = mal->id;
            ev.scenario.geometry_ref = geo->id;
            ev.scenario.narrative = trim(row[0]);
            for (const auto& a : split_list(row[1]))
                ev.scenario.agents.push_back(parse_agent(a));
            ev.consequence = trim(row[2]);
            per_pair[i].push_back(std::move(ev));
        }
    });

    std::vector<HazardousEvent> events;
    for (auto& list : per_pair)
        for (auto& ev : list) events.push_back(std::move(ev));
    int width = id_width(events.size(), 3);
    for (size_t i = 0; i < events.size(); ++i)
        events[i].id = make_id("E", static_cast<int>(i + 1), width);
    return events;
}

void Orchestrator::assess_severities(const ItemDefinition& item,
                                     const RunContext& ctx,
                                     std::vector<HazardousEvent>& events) {
    auto schema = schema_for(Stage::Severity);
    parallel_for(events.size(), config_.concurrency_limit, [&](size_t i) {
        auto& ev = events[i];
        const auto& mal = ctx.malfunctions.at(ev.malfunction_ref);
        auto rows = stage_call(
            Stage::Severity, ev.id,
            {{"item_definition", item.description},
             {"malfunction", mal.guideword.display() + ": " + mal.statement},
             {"scenario", ev.scenario.narrative},
             {"consequence", ev.consequence}},
            schema);
        ev.assessment = SeverityAssessment{*parse_severity(rows[0][0]),
                                           trim(rows[0][1])};
    });
}

void Orchestrator::formulate_safety_goals(const ItemDefinition& item,
                                          const RunContext& ctx,
                                          std::vector<HazardousEvent>& events) {
    // Rule-based gate: only events with severity above S0 get this call.
    std::vector<size_t> gated;
    for (size_t i = 0; i < events.size(); ++i)
        if (events[i].assessment &&
            events[i].assessment->severity > SeverityLevel::S0)
            gated.push_back(i);

    auto schema = schema_for(Stage::SafetyGoal);
    parallel_for(gated.size(), config_.concurrency_limit, [&](size_t k) {
        auto& ev = events[gated[k]];
        const auto& mal = ctx.malfunctions.at(ev.malfunction_ref);
        auto rows = stage_call(
            Stage::SafetyGoal, ev.id,
            {{"item_definition", item.description},
             {"malfunction", mal.guideword.display() + ": " + mal.statement},
             {"scenario", ev.scenario.narrative},
             {"consequence", ev.consequence},
             {"severity", to_string(ev.assessment->severity)}},
            schema);
        SafetyGoal goal;
        goal.event_ref = ev.id;
        goal.text = trim(rows[0][0]);
        ev.goal = std::move(goal);
    });

    int width = id_width(gated.size(), 3);
    int n = 0;
    for (size_t i : gated)
        events[i].goal->id = make_id("SG", ++n, width);
}

HaraTable Orchestrator::cluster_and_select(const RunContext& ctx,
                                           std::vector<HazardousEvent> events) {
    std::map<Quadrant, std::vector<size_t>> quadrants;
    for (size_t i = 0; i < events.size(); ++i)
        quadrants[classify_quadrant(events[i], ctx)].push_back(i);

    auto schema = schema_for(Stage::ClusterSelect, config_.geometries_requested,
                             config_.representatives_per_quadrant);
    HaraTable table;
    table.context = ctx;

    for (const auto& [kind, band] : kQuadrantOrder) {
        Quadrant q{kind, band};
        auto it = quadrants.find(q);
        if (it == quadrants.end()) continue;
        auto& members = it->second;
        std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
            return id_number(events[a].id) < id_number(events[b].id);
        });

        std::vector<size_t> selected;
        if (static_cast<int>(members.size()) <=
            config_.representatives_per_quadrant) {
            selected = members;  // no judgement needed, no provider call
        } else {
            std::set<std::string> valid_ids;
            std::string candidates = "ID,Hazardous Event Summary\n";
            for (size_t i : members) {
                const auto& ev = events[i];
                valid_ids.insert(ev.id);
                const auto& mal = ctx.malfunctions.at(ev.malfunction_ref);
                candidates += csv_join({ev.id, mal.statement + "; " +
                                                   ev.scenario.narrative +
                                                   "; " + ev.consequence});
                candidates += '\n';
            }
            auto validate = [&](const std::vector<CsvRow>& rows)
                -> std::optional<ParseFailure> {
                for (const auto& row : rows) {
                    std::string id = trim(row[0]);
                    if (!valid_ids.contains(id)) {
                        std::string allowed;
                        for (const auto& v : valid_ids) {
                            if (!allowed.empty()) allowed += ", ";
                            allowed += v;
                        }
                        return ParseFailure{
                            ParseFailureCode::bad_cell,
                            "selected id \"" + id +
                                "\" is not in this category (valid ids: " +
                                allowed + ")",
                            csv_join(row)};
                    }
                }
                return std::nullopt;
            };
            auto rows = stage_call(
                Stage::ClusterSelect, "quadrant:" + q.label(),
                {{"quadrant", q.label()},
                 {"candidate_events", candidates},
                 {"select_count",
                  std::to_string(config_.representatives_per_quadrant)}},
                schema, validate);
            std::set<std::string> chosen;
            for (const auto& row : rows) chosen.insert(trim(row[0]));
            for (size_t i : members)
                if (chosen.contains(events[i].id)) selected.push_back(i);
        }
        for (size_t i : selected) table.rows.push_back(events[i]);
    }
    return table;
}

HaraTable Orchestrator::execute(const ItemDefinition& item) {
    completed_.clear();
    if (auto problem = validate_item(item); !problem.empty())
        throw ConfigError("item definition invalid: " + problem);

    auto malfunctions = identify_hazards(item);
    if (malfunctions.empty())
        throw StageError(Stage::Hazards, "no malfunctions identified");
    completed_.push_back(Stage::Hazards);

    auto geometries = generate_geometries(item);
    completed_.push_back(Stage::Geometries);

    RunContext ctx;
    for (const auto& m : malfunctions) ctx.malfunctions.emplace(m.id, m);
    for (const auto& g : geometries) ctx.geometries.emplace(g.id, g);

    auto events = expand_scenarios(item, malfunctions, geometries);
    completed_.push_back(Stage::Expansion);

    assess_severities(item, ctx, events);
    completed_.push_back(Stage::Severity);

    formulate_safety_goals(item, ctx, events);
    completed_.push_back(Stage::SafetyGoal);

    auto table = cluster_and_select(ctx, std::move(events));
    completed_.push_back(Stage::ClusterSelect);

    table.bundle_version = templates_.version();
    table.model_id = config_.model_id;
    table.run_timestamp = now_iso8601_utc();
    table.config_digest = config_.digest();

    auto violations = validate_table(table);
    if (!violations.empty())
        throw IntegrityError("final table fails validation: " +
                             violations.front().code + " (" +
                             violations.front().detail + ")");
    return table;
}

}  // namespace hara
