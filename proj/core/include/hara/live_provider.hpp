#pragma once

#include <map>
#include <memory>
#include <string>

#include "hara/provider.hpp"

namespace hara {

struct HttpResult {
    int status = 0;           // 0 = transport-level failure
    std::string body;
    std::string error;        // set when status == 0
};

// Thin HTTP POST abstraction so the live provider is testable offline.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& url,
                            const std::map<std::string, std::string>& headers,
                            const std::string& body) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(int timeout_seconds = 120);

struct LiveProviderConfig {
    std::string endpoint_url;  // e.g. https://api.openai.com/v1/chat/completions
    std::string model_id;
    std::string credential_env;  // env var holding the API key
};

// OpenAI-compatible chat-completions client. Credential is read from the
// configured environment variable at call time and never persisted.
class LiveProvider : public Provider {
public:
    LiveProvider(LiveProviderConfig config,
                 std::unique_ptr<HttpTransport> transport);

    CompletionResponse complete(const CompletionRequest& request) override;
    ReadinessReport probe(const std::vector<Stage>& planned_stages) override;

private:
    std::string credential() const;

    LiveProviderConfig config_;
    std::unique_ptr<HttpTransport> transport_;
};

}  // namespace hara
