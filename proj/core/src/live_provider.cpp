#include "hara/live_provider.hpp"

#include <chrono>
#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

namespace hara {
namespace {

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(int timeout_seconds)
        : timeout_seconds_(timeout_seconds) {}

    HttpResult post(const std::string& url,
                    const std::map<std::string, std::string>& headers,
                    const std::string& body) override {
        // Split scheme://host[:port] from the path.
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos)
            return {0, "", "bad endpoint URL: " + url};
        auto path_start = url.find('/', scheme_end + 3);
        std::string origin =
            path_start == std::string::npos ? url : url.substr(0, path_start);
        std::string path =
            path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(timeout_seconds_);
        client.set_read_timeout(timeout_seconds_);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) return {0, "", httplib::to_string(res.error())};
        return {res->status, res->body, ""};
    }

private:
    int timeout_seconds_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(int timeout_seconds) {
    return std::make_unique<HttplibTransport>(timeout_seconds);
}

LiveProvider::LiveProvider(LiveProviderConfig config,
                           std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

std::string LiveProvider::credential() const {
    const char* v = std::getenv(config_.credential_env.c_str());
    return v ? v : "";
}

CompletionResponse LiveProvider::complete(const CompletionRequest& req) {
    nlohmann::json body = {
        {"model", req.model_id.empty() ? config_.model_id : req.model_id},
        {"messages",
         nlohmann::json::array(
             {{{"role", "user"}, {"content", req.prompt_text}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_output_tokens},
    };

    auto start = std::chrono::steady_clock::now();
    auto result = transport_->post(
        config_.endpoint_url,
        {{"Authorization", "Bearer " + credential()}}, body.dump());
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    CompletionResponse resp;
    resp.latency = latency;
    if (result.status == 0) {
        resp.finish_reason = FinishReason::transport_error;
        resp.provider_meta["error"] = result.error;
        return resp;
    }
    resp.provider_meta["http_status"] = std::to_string(result.status);
    if (result.status < 200 || result.status >= 300) {
        resp.finish_reason = FinishReason::transport_error;
        resp.provider_meta["error"] =
            "HTTP " + std::to_string(result.status);
        return resp;
    }
    try {
        auto json = nlohmann::json::parse(result.body);
        const auto& choice = json.at("choices").at(0);
        if (choice.contains("message") &&
            choice["message"].contains("content") &&
            !choice["message"]["content"].is_null())
            resp.raw_text = choice["message"]["content"].get<std::string>();
        std::string finish = choice.value("finish_reason", "stop");
        if (finish == "length") resp.finish_reason = FinishReason::truncated;
        else if (finish == "content_filter")
            resp.finish_reason = FinishReason::refused;
        else resp.finish_reason = FinishReason::complete;
        if (json.contains("model"))
            resp.provider_meta["model"] = json["model"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        resp.finish_reason = FinishReason::transport_error;
        resp.provider_meta["error"] =
            std::string("unparseable provider response: ") + e.what();
    }
    return resp;
}

ReadinessReport LiveProvider::probe(const std::vector<Stage>& planned) {
    (void)planned;
    ReadinessReport report;
    if (config_.endpoint_url.empty()) {
        report.ready = false;
        report.problems.push_back("no endpoint URL configured");
        return report;
    }
    if (credential().empty()) {
        report.ready = false;
        report.problems.push_back("auth: environment variable " +
                                  config_.credential_env +
                                  " is not set or empty");
        return report;
    }
    // Minimal paid-for probe: a one-token request.
    nlohmann::json body = {
        {"model", config_.model_id},
        {"messages",
         nlohmann::json::array({{{"role", "user"}, {"content", "ping"}}})},
        {"max_tokens", 1},
    };
    auto result = transport_->post(
        config_.endpoint_url,
        {{"Authorization", "Bearer " + credential()}}, body.dump());
    if (result.status == 0) {
        report.ready = false;
        report.problems.push_back("endpoint unreachable: " + result.error);
    } else if (result.status == 401 || result.status == 403) {
        report.ready = false;
        report.problems.push_back("auth: HTTP " +
                                  std::to_string(result.status) +
                                  " from provider");
    } else if (result.status < 200 || result.status >= 300) {
        report.ready = false;
        report.problems.push_back("provider returned HTTP " +
                                  std::to_string(result.status));
    }
    return report;
}

}  // namespace hara
