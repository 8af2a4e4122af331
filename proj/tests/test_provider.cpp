#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <thread>

#include "hara/hash.hpp"
#include "hara/live_provider.hpp"
#include "hara/provider.hpp"
#include "test_support.hpp"

using namespace hara;

namespace {

CompletionRequest request_for(Stage stage, const std::string& prompt,
                              int attempt = 1) {
    CompletionRequest r;
    r.prompt_text = prompt;
    r.model_id = "test";
    r.stage_tag = stage;
    r.attempt = attempt;
    return r;
}

}  // namespace

TEST_CASE("scripted provider returns the keyed fixture verbatim") {
    ScriptedProvider provider(test::scripted_dir());
    auto resp = provider.complete(request_for(Stage::Hazards, "whatever"));
    CHECK(resp.finish_reason == FinishReason::complete);
    CHECK(resp.raw_text ==
          test::read_file(test::scripted_dir() / "hazards.csv"));
}

TEST_CASE("scripted provider match entries beat the default") {
    ScriptedProvider provider(test::scripted_dir());
    auto s1 = provider.complete(
        request_for(Stage::Severity, "consequence: a minor scrape happened"));
    CHECK(s1.raw_text.find("S1") != std::string::npos);
    auto s3 = provider.complete(request_for(
        Stage::Severity, "head-on collision with an oncoming truck"));
    CHECK(s3.raw_text.find("S3") != std::string::npos);
    auto fallback =
        provider.complete(request_for(Stage::Severity, "nothing matches"));
    CHECK(fallback.raw_text.find("S2") != std::string::npos);
}

TEST_CASE("scripted provider unknown key names the missing fixture") {
    ScriptedProvider provider(test::scripted_dir());
    auto resp = provider.complete(request_for(Stage::Hazards, "x", /*attempt=*/9));
    CHECK(resp.finish_reason == FinishReason::transport_error);
    CHECK(resp.provider_meta.at("error").find("Hazards") != std::string::npos);
    CHECK(resp.provider_meta.at("error").find("9") != std::string::npos);
}

TEST_CASE("scripted probe lists stages without fixtures") {
    test::TempDir dir;
    test::write_file(dir / "manifest.json",
                     R"({"entries":[{"stage":"Hazards","attempt":1,"file":"h.csv"}]})");
    test::write_file(dir / "h.csv", "Guideword,Malfunction\nOmission,x\n");
    ScriptedProvider provider(dir.path());
    auto report = provider.probe({Stage::Hazards, Stage::Severity});
    CHECK_FALSE(report.ready);
    REQUIRE(report.problems.size() == 1);
    CHECK(report.problems[0].find("Severity") != std::string::npos);

    CHECK(provider.probe({Stage::Hazards}).ready);
}

TEST_CASE("replay provider reproduces a recorded session in any order") {
    ReplayProvider::Session session;
    std::vector<std::pair<Stage, std::string>> exchanges{
        {Stage::Hazards, "prompt one"},
        {Stage::Severity, "prompt two"},
        {Stage::Severity, "prompt three"},
    };
    std::vector<std::string> responses{"resp A", "resp B", "resp C"};
    for (size_t i = 0; i < exchanges.size(); ++i)
        session[ReplayProvider::key(exchanges[i].first,
                                    sha256_hex(exchanges[i].second), 1)] = {
            responses[i], FinishReason::complete};
    ReplayProvider provider(session);

    // reverse call order; responses must still match by content key
    for (size_t i = exchanges.size(); i-- > 0;) {
        auto resp = provider.complete(
            request_for(exchanges[i].first, exchanges[i].second));
        CHECK(resp.raw_text == responses[i]);
    }
    auto missing = provider.complete(request_for(Stage::Hazards, "unknown"));
    CHECK(missing.finish_reason == FinishReason::transport_error);
}

TEST_CASE("deterministic providers give byte-identical response sequences") {
    ScriptedProvider provider(test::scripted_dir());
    std::vector<CompletionRequest> sequence{
        request_for(Stage::Hazards, "a"),
        request_for(Stage::Geometries, "b"),
        request_for(Stage::Severity, "a minor scrape"),
        request_for(Stage::SafetyGoal, "c"),
    };
    auto transcript = [&] {
        std::string all;
        for (const auto& req : sequence)
            all += provider.complete(req).raw_text;
        return sha256_hex(all);
    };
    CHECK(transcript() == transcript());
}

TEST_CASE("rate limiter bounds in-flight requests") {
    auto slow = std::make_shared<test::FnProvider>([](const CompletionRequest&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        return test::text_response("ok");
    });
    auto counting = std::make_shared<test::CountingProvider>(slow);
    RateLimitedProvider limited(counting, 3);

    std::vector<std::thread> threads;
    for (int i = 0; i < 16; ++i)
        threads.emplace_back([&] {
            limited.complete(request_for(Stage::Hazards, "x"));
        });
    for (auto& t : threads) t.join();
    CHECK(counting->total() == 16);
    CHECK(counting->max_inflight() <= 3);
}

TEST_CASE("live provider parses a chat completion body") {
    class StubTransport : public HttpTransport {
    public:
        explicit StubTransport(int status, std::string body)
            : status_(status), body_(std::move(body)) {}
        HttpResult post(const std::string&,
                        const std::map<std::string, std::string>& headers,
                        const std::string& request_body) override {
            last_headers = headers;
            last_body = request_body;
            return {status_, body_, ""};
        }
        std::map<std::string, std::string> last_headers;
        std::string last_body;

    private:
        int status_;
        std::string body_;
    };

    setenv("HARA_TEST_KEY", "secret-key", 1);
    LiveProviderConfig config{"https://api.example.com/v1/chat/completions",
                              "some-model", "HARA_TEST_KEY"};

    SUBCASE("successful completion") {
        auto stub = std::make_unique<StubTransport>(
            200,
            R"({"choices":[{"message":{"content":"Severity,Rationale\nS2,x"},"finish_reason":"stop"}],"model":"some-model"})");
        auto* raw = stub.get();
        LiveProvider provider(config, std::move(stub));
        auto resp = provider.complete(request_for(Stage::Severity, "classify"));
        CHECK(resp.finish_reason == FinishReason::complete);
        CHECK(resp.raw_text == "Severity,Rationale\nS2,x");
        CHECK(raw->last_headers.at("Authorization") == "Bearer secret-key");
        CHECK(raw->last_body.find("classify") != std::string::npos);
    }

    SUBCASE("length-capped responses are truncated") {
        LiveProvider provider(
            config, std::make_unique<StubTransport>(
                        200,
                        R"({"choices":[{"message":{"content":"partial"},"finish_reason":"length"}]})"));
        auto resp = provider.complete(request_for(Stage::Severity, "classify"));
        CHECK(resp.finish_reason == FinishReason::truncated);
        CHECK(resp.raw_text == "partial");
    }

    SUBCASE("bad credential probe reports an auth problem") {
        LiveProvider provider(config,
                              std::make_unique<StubTransport>(401, "{}"));
        auto report = provider.probe({Stage::Hazards});
        CHECK_FALSE(report.ready);
        REQUIRE_FALSE(report.problems.empty());
        CHECK(report.problems[0].find("auth") != std::string::npos);
    }

    SUBCASE("missing credential fails before any request") {
        LiveProviderConfig no_cred{"https://api.example.com/v1", "m",
                                   "HARA_DEFINITELY_UNSET_VAR"};
        LiveProvider provider(no_cred,
                              std::make_unique<StubTransport>(200, "{}"));
        auto report = provider.probe({Stage::Hazards});
        CHECK_FALSE(report.ready);
        CHECK(report.problems[0].find("HARA_DEFINITELY_UNSET_VAR") !=
              std::string::npos);
    }
}
