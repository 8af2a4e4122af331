// hara: command-line front end for the HARA pipeline engine.
//
// Exit codes: 0 success, 2 config error, 3 probe failure, 4 stage error,
// 5 ledger error or integrity failure, 6 validation findings, 1 other.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hara/config.hpp"
#include "hara/error.hpp"
#include "hara/ledger.hpp"
#include "hara/live_provider.hpp"
#include "hara/orchestrator.hpp"
#include "hara/provider.hpp"
#include "hara/templates.hpp"
#include "hara/validate.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProbe = 3;
constexpr int kExitStage = 4;
constexpr int kExitLedger = 5;
constexpr int kExitValidation = 6;

struct Overrides {
    std::string config_path;
    std::string item, templates, fixtures, provider, ledger, output;
    std::string model, endpoint, credential_env;
    int geometries = -1, representatives = -1, concurrency = -1,
        repair_budget = -1, max_output_tokens = -1, retry_base_delay_ms = -1;
    double temperature = -1.0;
    bool skip_failed_pairs = false;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "Config file (JSON)");
    cmd->add_option("--item", o.item, "Item definition file");
    cmd->add_option("--templates", o.templates, "Template bundle directory");
    cmd->add_option("--provider", o.provider,
                    "Provider kind: live, scripted or replay");
    cmd->add_option("--fixtures", o.fixtures,
                    "Scripted provider fixture directory");
    cmd->add_option("--ledger", o.ledger, "Ledger file path");
    cmd->add_option("--output", o.output, "Output CSV path");
    cmd->add_option("--geometries", o.geometries, "Road geometries to request");
    cmd->add_option("--representatives", o.representatives,
                    "Representatives per quadrant");
    cmd->add_option("--concurrency", o.concurrency, "Concurrent workers");
    cmd->add_option("--repair-budget", o.repair_budget,
                    "Attempts per logical call");
    cmd->add_option("--model", o.model, "Model id");
    cmd->add_option("--endpoint", o.endpoint, "Chat-completion endpoint URL");
    cmd->add_option("--credential-env", o.credential_env,
                    "Environment variable holding the API key");
    cmd->add_option("--temperature", o.temperature, "Sampling temperature");
    cmd->add_option("--max-output-tokens", o.max_output_tokens,
                    "Response token cap");
    cmd->add_option("--retry-base-delay-ms", o.retry_base_delay_ms,
                    "Base delay for transport retries");
    cmd->add_flag("--skip-failed-pairs", o.skip_failed_pairs,
                  "Skip malfunction/geometry pairs whose stage fails");
}

hara::CliConfig resolve_config(const Overrides& o) {
    hara::CliConfig c;
    if (!o.config_path.empty()) c = hara::CliConfig::load(o.config_path);
    if (!o.item.empty()) c.item_path = o.item;
    if (!o.templates.empty()) c.template_bundle = o.templates;
    if (!o.provider.empty()) c.provider_kind = o.provider;
    if (!o.fixtures.empty()) c.fixtures_dir = o.fixtures;
    if (!o.ledger.empty()) c.run.ledger_path = o.ledger;
    if (!o.output.empty()) c.run.output_path = o.output;
    if (!o.model.empty()) c.run.model_id = o.model;
    if (!o.endpoint.empty()) c.endpoint_url = o.endpoint;
    if (!o.credential_env.empty()) c.credential_env = o.credential_env;
    if (o.geometries > 0) c.run.geometries_requested = o.geometries;
    if (o.representatives > 0)
        c.run.representatives_per_quadrant = o.representatives;
    if (o.concurrency > 0) c.run.concurrency_limit = o.concurrency;
    if (o.repair_budget > 0) c.run.repair_budget = o.repair_budget;
    if (o.max_output_tokens > 0) c.run.max_output_tokens = o.max_output_tokens;
    if (o.retry_base_delay_ms >= 0)
        c.run.retry.base_delay = std::chrono::milliseconds(o.retry_base_delay_ms);
    if (o.temperature >= 0.0) c.run.temperature = o.temperature;
    if (o.skip_failed_pairs) c.run.skip_failed_pairs = true;
    return c;
}

std::shared_ptr<hara::Provider> make_provider(const hara::CliConfig& c) {
    std::shared_ptr<hara::Provider> base;
    if (c.provider_kind == "scripted") {
        if (c.fixtures_dir.empty())
            throw hara::ConfigError("scripted provider needs a fixtures dir");
        base = std::make_shared<hara::ScriptedProvider>(c.fixtures_dir);
    } else if (c.provider_kind == "replay") {
        auto source = c.replay_ledger.empty() ? c.run.ledger_path
                                              : c.replay_ledger;
        auto contents = hara::read_ledger(source);
        hara::ReplayProvider::Session session;
        for (const auto& e : contents.entries) {
            if (e.finish_reason == hara::FinishReason::transport_error)
                continue;
            session[hara::ReplayProvider::key(e.stage, e.request_digest,
                                              e.attempt)] = {
                e.response_text, e.finish_reason};
        }
        base = std::make_shared<hara::ReplayProvider>(std::move(session));
    } else if (c.provider_kind == "live") {
        hara::LiveProviderConfig live{c.endpoint_url, c.run.model_id,
                                      c.credential_env};
        base = std::make_shared<hara::LiveProvider>(
            live, hara::make_httplib_transport());
    } else {
        throw hara::ConfigError("unknown provider kind: " + c.provider_kind);
    }
    return std::make_shared<hara::RateLimitedProvider>(
        base, c.run.concurrency_limit);
}

void require_paths(const hara::CliConfig& c, bool need_item) {
    if (need_item && !std::filesystem::exists(c.item_path))
        throw hara::ConfigError("item definition not found: " +
                                c.item_path.string());
    if (!std::filesystem::exists(c.template_bundle / "manifest.json"))
        throw hara::ConfigError("template bundle not found: " +
                                c.template_bundle.string());
    if (c.run.ledger_path.empty())
        throw hara::ConfigError("no ledger path configured");
    if (c.run.ledger_path.has_parent_path())
        std::filesystem::create_directories(c.run.ledger_path.parent_path());
    if (!c.run.output_path.empty() && c.run.output_path.has_parent_path())
        std::filesystem::create_directories(c.run.output_path.parent_path());
}

void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw hara::LedgerError("cannot write " + path.string());
    out << data;
    out.flush();
    if (!out) throw hara::LedgerError("write failed for " + path.string());
}

std::vector<hara::Stage> all_stages() {
    return {hara::kAllStages.begin(), hara::kAllStages.end()};
}

int run_or_resume(const Overrides& o, bool fresh) {
    auto config = resolve_config(o);
    require_paths(config, /*need_item=*/true);
    auto item = hara::load_item_definition(config.item_path);
    auto templates = hara::TemplateSet::load(config.template_bundle);
    auto provider = make_provider(config);

    auto readiness = provider->probe(all_stages());
    if (!readiness.ready) {
        std::fprintf(stderr, "provider not ready:\n");
        for (const auto& p : readiness.problems)
            std::fprintf(stderr, "  - %s\n", p.c_str());
        return kExitProbe;
    }

    hara::Orchestrator orchestrator(templates, provider, config.run);
    hara::HaraTable table;
    try {
        table = fresh ? orchestrator.run(item) : orchestrator.resume(item);
    } catch (const hara::StageError& e) {
        std::fprintf(stderr, "stage error: %s\nledger: %s\n", e.what(),
                     config.run.ledger_path.string().c_str());
        return kExitStage;
    }

    auto csv = hara::export_csv(table);
    auto out_path = config.run.output_path.empty()
                        ? std::filesystem::path("hara.csv")
                        : config.run.output_path;
    write_file(out_path, csv);
    std::printf("%s\n%zu rows\n", out_path.string().c_str(),
                table.rows.size());
    return kExitOk;
}

int cmd_export(const Overrides& o) {
    auto config = resolve_config(o);
    require_paths(config, /*need_item=*/true);
    auto item = hara::load_item_definition(config.item_path);
    auto templates = hara::TemplateSet::load(config.template_bundle);

    // Work on a scratch copy so the audited ledger is never touched, and
    // feed missing exchanges to a provider that always fails.
    auto scratch = config.run.ledger_path;
    scratch += ".export.tmp";
    std::filesystem::copy_file(
        config.run.ledger_path, scratch,
        std::filesystem::copy_options::overwrite_existing);
    struct Cleanup {
        std::filesystem::path p;
        ~Cleanup() { std::error_code ec; std::filesystem::remove(p, ec); }
    } cleanup{scratch};

    class NoCallsProvider : public hara::Provider {
    public:
        hara::CompletionResponse complete(
            const hara::CompletionRequest&) override {
            hara::CompletionResponse r;
            r.finish_reason = hara::FinishReason::transport_error;
            r.provider_meta["error"] = "exchange missing from ledger";
            return r;
        }
        hara::ReadinessReport probe(const std::vector<hara::Stage>&) override {
            return {};
        }
    };

    auto run_config = config.run;
    run_config.ledger_path = scratch;
    run_config.retry.max_retries = 0;
    hara::Orchestrator orchestrator(
        templates, std::make_shared<NoCallsProvider>(), run_config);
    hara::HaraTable table;
    try {
        table = orchestrator.resume(item);
    } catch (const hara::StageError& e) {
        std::fprintf(stderr, "incomplete: %s\n",
                     hara::to_string(e.stage()).c_str());
        return kExitStage;
    }

    auto out_path = config.run.output_path.empty()
                        ? std::filesystem::path("hara.csv")
                        : config.run.output_path;
    write_file(out_path, hara::export_csv(table));
    std::printf("%s\n%zu rows\n", out_path.string().c_str(),
                table.rows.size());
    return kExitOk;
}

int cmd_validate(const std::string& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) {
        std::fprintf(stderr, "cannot read %s\n", csv_path.c_str());
        return kExitConfig;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto violations = hara::validate_exported_csv(ss.str());
    if (violations.empty()) {
        std::printf("clean\n");
        return kExitOk;
    }
    for (const auto& v : violations)
        std::printf("[%s] %s\n", v.code.c_str(), v.detail.c_str());
    return kExitValidation;
}

int cmd_verify_ledger(const std::string& ledger_path) {
    auto report = hara::verify_ledger(ledger_path);
    if (report.clean) {
        std::printf("clean\n");
        return kExitOk;
    }
    std::printf("divergence at sequence %llu: %s\n",
                static_cast<unsigned long long>(report.first_bad_sequence),
                report.detail.c_str());
    return kExitLedger;
}

int cmd_probe(const Overrides& o) {
    auto config = resolve_config(o);
    auto provider = make_provider(config);
    auto readiness = provider->probe(all_stages());
    if (readiness.ready) {
        std::printf("ready\n");
        return kExitOk;
    }
    for (const auto& p : readiness.problems)
        std::printf("not ready: %s\n", p.c_str());
    return kExitProbe;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Automated hazard analysis & risk assessment pipeline"};
    app.require_subcommand(1);

    Overrides o;
    std::string csv_path, ledger_path;

    auto* run = app.add_subcommand("run", "Execute the full pipeline");
    add_common_flags(run, o);
    auto* resume = app.add_subcommand(
        "resume", "Continue an interrupted run from its ledger");
    add_common_flags(resume, o);
    auto* exp = app.add_subcommand(
        "export", "Re-derive the CSV from a completed ledger");
    add_common_flags(exp, o);
    auto* validate =
        app.add_subcommand("validate", "Check an exported CSV's invariants");
    validate->add_option("csv", csv_path, "CSV file")->required();
    auto* verify =
        app.add_subcommand("verify-ledger", "Verify a ledger's hash chain");
    verify->add_option("ledger", ledger_path, "Ledger file")->required();
    auto* probe =
        app.add_subcommand("probe", "Check provider readiness");
    add_common_flags(probe, o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_or_resume(o, /*fresh=*/true);
        if (resume->parsed()) return run_or_resume(o, /*fresh=*/false);
        if (exp->parsed()) return cmd_export(o);
        if (validate->parsed()) return cmd_validate(csv_path);
        if (verify->parsed()) return cmd_verify_ledger(ledger_path);
        if (probe->parsed()) return cmd_probe(o);
    } catch (const hara::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const hara::TemplateError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const hara::IntegrityError& e) {
        std::fprintf(stderr, "integrity error: %s\n", e.what());
        return kExitLedger;
    } catch (const hara::LedgerError& e) {
        std::fprintf(stderr, "ledger error: %s\n", e.what());
        return kExitLedger;
    } catch (const hara::StageError& e) {
        std::fprintf(stderr, "stage error: %s\n", e.what());
        return kExitStage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
