#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "hara/stage.hpp"

namespace hara {

struct CompletionRequest {
    std::string prompt_text;
    std::string model_id;
    double temperature = 0.0;  // defaults to 0 for reproducibility
    int max_output_tokens = 2048;
    Stage stage_tag = Stage::Hazards;
    int attempt = 1;  // repair attempt, >= 1
};

enum class FinishReason { complete, truncated, refused, transport_error };

std::string to_string(FinishReason reason);
FinishReason parse_finish_reason(const std::string& name);

struct CompletionResponse {
    std::string raw_text;
    FinishReason finish_reason = FinishReason::complete;
    std::chrono::milliseconds latency{0};
    std::map<std::string, std::string> provider_meta;
};

struct ReadinessReport {
    bool ready = true;
    std::vector<std::string> problems;
};

// Provider-agnostic single-turn chat completion. Implementations must be
// safe to call from multiple workers concurrently.
class Provider {
public:
    virtual ~Provider() = default;

    // Exactly one response per call. Transport failures come back as
    // finish_reason == transport_error, never as exceptions.
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;

    // Pre-run readiness check against the planned stage list.
    virtual ReadinessReport probe(const std::vector<Stage>& planned_stages) = 0;
};

// Fixture-backed deterministic provider. The fixture directory holds a
// manifest.json with entries {stage, attempt, file, match?}; `match` is an
// optional substring tested against the prompt text, longest match wins,
// entries without `match` are the stage/attempt default.
class ScriptedProvider : public Provider {
public:
    explicit ScriptedProvider(const std::filesystem::path& fixtures_dir);

    CompletionResponse complete(const CompletionRequest& request) override;
    ReadinessReport probe(const std::vector<Stage>& planned_stages) override;

private:
    struct Entry {
        Stage stage;
        int attempt;
        std::string match;  // empty = default
        std::string text;
    };
    std::vector<Entry> entries_;
    std::filesystem::path dir_;
};

// Replays a recorded session keyed by (stage, sha256(prompt), attempt);
// call order does not matter. Unknown keys are transport errors.
class ReplayProvider : public Provider {
public:
    // session: key -> response text + finish reason
    struct Recorded {
        std::string response_text;
        FinishReason finish_reason;
    };
    using Session = std::map<std::string, Recorded>;

    explicit ReplayProvider(Session session) : session_(std::move(session)) {}

    static std::string key(Stage stage, const std::string& prompt_digest,
                           int attempt);

    CompletionResponse complete(const CompletionRequest& request) override;
    ReadinessReport probe(const std::vector<Stage>& planned_stages) override;

private:
    Session session_;
};

// Bounds in-flight requests to `limit` via a counting gate.
class RateLimitedProvider : public Provider {
public:
    RateLimitedProvider(std::shared_ptr<Provider> inner, int limit);
    ~RateLimitedProvider() override;

    CompletionResponse complete(const CompletionRequest& request) override;
    ReadinessReport probe(const std::vector<Stage>& planned_stages) override;

private:
    struct Gate;
    std::shared_ptr<Provider> inner_;
    std::unique_ptr<Gate> gate_;
};

struct RetryPolicy {
    int max_retries = 2;  // transport retries per call, beyond the first try
    std::chrono::milliseconds base_delay{250};
    double multiplier = 2.0;
};

}  // namespace hara
