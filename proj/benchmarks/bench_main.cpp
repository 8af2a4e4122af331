#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hara/hash.hpp"
#include "hara/ledger.hpp"
#include "hara/orchestrator.hpp"
#include "hara/parsing.hpp"
#include "hara/templates.hpp"

using namespace hara;
namespace fs = std::filesystem;

namespace {

fs::path source_dir() { return HARA_SOURCE_DIR; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& geometry_response() {
    static std::string text =
        "Here are the requested road geometries:\n\n" +
        read_file(source_dir() / "assets" / "fixtures" / "scripted" /
                  "geometries.csv") +
        "\nThese cover the usual operating conditions.\n";
    return text;
}

void BM_ExtractTable(benchmark::State& state) {
    auto schema = schema_for(Stage::Geometries, 20);
    const auto& text = geometry_response();
    for (auto _ : state) {
        auto out = extract_table(text, schema);
        benchmark::DoNotOptimize(out.rows);
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_ExtractTable);

void BM_RenderPrompt(benchmark::State& state) {
    auto templates =
        TemplateSet::load(source_dir() / "assets" / "templates" / "default");
    auto item = read_file(source_dir() / "assets" / "fixtures" /
                          "caem_item.md");
    const auto& tmpl = templates.at(Stage::Expansion);
    std::map<std::string, std::string> bindings{
        {"item_definition", item},
        {"malfunction", "Omission: the function does not act"},
        {"geometry", "G07: 2-lane curve, downhill, tunnel"},
    };
    for (auto _ : state) {
        auto prompt = render(tmpl, bindings);
        benchmark::DoNotOptimize(prompt.text);
    }
}
BENCHMARK(BM_RenderPrompt);

void BM_LedgerAppend(benchmark::State& state) {
    auto dir = fs::temp_directory_path() / "hara_bench";
    fs::create_directories(dir);
    auto path = dir / "ledger.jsonl";
    LedgerHeader header{"bench", "bundle", "digest", "model", kHashAlgorithm};
    auto writer = LedgerWriter::create(path, header);
    std::string request(2000, 'q');
    std::string response(4000, 'r');
    for (auto _ : state)
        writer.append(Stage::Severity, "E001", 1, request, response,
                      FinishReason::complete);
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                            static_cast<int64_t>(request.size() +
                                                 response.size()));
    fs::remove_all(dir);
}
BENCHMARK(BM_LedgerAppend);

void BM_LedgerVerify(benchmark::State& state) {
    auto dir = fs::temp_directory_path() / "hara_bench_verify";
    fs::create_directories(dir);
    auto path = dir / "ledger.jsonl";
    LedgerHeader header{"bench", "bundle", "digest", "model", kHashAlgorithm};
    auto writer = LedgerWriter::create(path, header);
    for (int i = 0; i < 200; ++i)
        writer.append(Stage::Severity, "E" + std::to_string(i), 1,
                      std::string(2000, 'q'), std::string(4000, 'r'),
                      FinishReason::complete);
    for (auto _ : state) {
        auto report = verify_ledger(path);
        benchmark::DoNotOptimize(report.clean);
    }
    fs::remove_all(dir);
}
BENCHMARK(BM_LedgerVerify);

}  // namespace

BENCHMARK_MAIN();
