#include "hara/provider.hpp"

#include <condition_variable>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hara/error.hpp"
#include "hara/hash.hpp"

namespace hara {

std::string to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::complete: return "complete";
        case FinishReason::truncated: return "truncated";
        case FinishReason::refused: return "refused";
        case FinishReason::transport_error: return "transport_error";
    }
    return "?";
}

FinishReason parse_finish_reason(const std::string& name) {
    if (name == "complete") return FinishReason::complete;
    if (name == "truncated") return FinishReason::truncated;
    if (name == "refused") return FinishReason::refused;
    return FinishReason::transport_error;
}

// ---------------------------------------------------------------- scripted

ScriptedProvider::ScriptedProvider(const std::filesystem::path& fixtures_dir)
    : dir_(fixtures_dir) {
    std::ifstream in(dir_ / "manifest.json", std::ios::binary);
    if (!in)
        throw ConfigError("scripted provider: cannot read " +
                          (dir_ / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scripted provider: bad manifest: " +
                          std::string(e.what()));
    }
    for (const auto& j : manifest.value("entries", nlohmann::json::array())) {
        Entry e;
        auto stage = parse_stage(j.value("stage", ""));
        if (!stage)
            throw ConfigError("scripted provider: unknown stage in manifest: " +
                              j.value("stage", ""));
        e.stage = *stage;
        e.attempt = j.value("attempt", 1);
        e.match = j.value("match", "");
        std::string file = j.value("file", "");
        std::ifstream f(dir_ / file, std::ios::binary);
        if (!f)
            throw ConfigError("scripted provider: cannot read fixture " +
                              (dir_ / file).string());
        std::ostringstream ss;
        ss << f.rdbuf();
        e.text = ss.str();
        entries_.push_back(std::move(e));
    }
}

CompletionResponse ScriptedProvider::complete(const CompletionRequest& req) {
    const Entry* best = nullptr;
    const Entry* fallback = nullptr;
    for (const auto& e : entries_) {
        if (e.stage != req.stage_tag || e.attempt != req.attempt) continue;
        if (e.match.empty()) {
            if (!fallback) fallback = &e;
        } else if (req.prompt_text.find(e.match) != std::string::npos) {
            if (!best || e.match.size() > best->match.size()) best = &e;
        }
    }
    if (!best) best = fallback;
    if (!best) {
        CompletionResponse resp;
        resp.finish_reason = FinishReason::transport_error;
        resp.provider_meta["error"] =
            "no fixture for key (" + to_string(req.stage_tag) + ", attempt " +
            std::to_string(req.attempt) + ")";
        return resp;
    }
    CompletionResponse resp;
    resp.raw_text = best->text;
    resp.finish_reason = FinishReason::complete;
    return resp;
}

ReadinessReport ScriptedProvider::probe(const std::vector<Stage>& planned) {
    ReadinessReport report;
    for (Stage s : planned) {
        bool found = false;
        for (const auto& e : entries_)
            if (e.stage == s && e.attempt == 1) { found = true; break; }
        if (!found) {
            report.ready = false;
            report.problems.push_back("missing fixtures for stage " +
                                      to_string(s));
        }
    }
    return report;
}

// ------------------------------------------------------------------ replay

std::string ReplayProvider::key(Stage stage, const std::string& prompt_digest,
                                int attempt) {
    return to_string(stage) + ":" + prompt_digest + ":" +
           std::to_string(attempt);
}

CompletionResponse ReplayProvider::complete(const CompletionRequest& req) {
    auto it = session_.find(
        key(req.stage_tag, sha256_hex(req.prompt_text), req.attempt));
    CompletionResponse resp;
    if (it == session_.end()) {
        resp.finish_reason = FinishReason::transport_error;
        resp.provider_meta["error"] =
            "exchange not present in recorded session (" +
            to_string(req.stage_tag) + ", attempt " +
            std::to_string(req.attempt) + ")";
        return resp;
    }
    resp.raw_text = it->second.response_text;
    resp.finish_reason = it->second.finish_reason;
    return resp;
}

ReadinessReport ReplayProvider::probe(const std::vector<Stage>& planned) {
    ReadinessReport report;
    for (Stage s : planned) {
        bool found = false;
        std::string prefix = to_string(s) + ":";
        for (const auto& [k, _] : session_)
            if (k.rfind(prefix, 0) == 0) { found = true; break; }
        if (!found) {
            report.ready = false;
            report.problems.push_back("no recorded exchanges for stage " +
                                      to_string(s));
        }
    }
    return report;
}

// -------------------------------------------------------------- rate limit

struct RateLimitedProvider::Gate {
    std::mutex mu;
    std::condition_variable cv;
    int available;

    explicit Gate(int limit) : available(limit) {}

    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return available > 0; });
        --available;
    }
    void release() {
        {
            std::lock_guard lock(mu);
            ++available;
        }
        cv.notify_one();
    }
};

RateLimitedProvider::RateLimitedProvider(std::shared_ptr<Provider> inner,
                                         int limit)
    : inner_(std::move(inner)), gate_(std::make_unique<Gate>(limit)) {
    if (limit < 1) throw ConfigError("rate limit must be >= 1");
}

RateLimitedProvider::~RateLimitedProvider() = default;

CompletionResponse RateLimitedProvider::complete(
    const CompletionRequest& req) {
    gate_->acquire();
    struct Releaser {
        Gate* g;
        ~Releaser() { g->release(); }
    } releaser{gate_.get()};
    return inner_->complete(req);
}

ReadinessReport RateLimitedProvider::probe(const std::vector<Stage>& planned) {
    return inner_->probe(planned);
}

}  // namespace hara
