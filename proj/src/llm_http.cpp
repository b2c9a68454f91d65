#include <httplib.h>

#include <regex>
#include <thread>

#include <fmt/format.h>

#include "debinforge/error.hpp"
#include "debinforge/llm.hpp"

namespace debinforge::llm {

namespace {

struct Endpoint {
    std::string origin;
    std::string path;
};

Endpoint split_endpoint(const std::string& url)
{
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern))
        fail(ErrorKind::Config, "llm endpoint must be an http(s) URL: '" + url + "'");
    return {m[1].str(), m[2].matched ? m[2].str() : "/v1/chat/completions"};
}

bool retryable(int status)
{
    return status == 429 || status >= 500;
}

} // namespace

HttpChatClient::HttpChatClient(ClientSettings settings) : ChatClient(std::move(settings))
{
    split_endpoint(this->settings().endpoint);
}

std::string HttpChatClient::complete(const ChatRequest& request)
{
    const auto& s = settings();
    const Endpoint endpoint = split_endpoint(s.endpoint);
    httplib::Client client(endpoint.origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(s.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(s.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    httplib::Headers headers;
    if (!s.api_key.empty())
        headers.emplace("Authorization", "Bearer " + s.api_key);
    const std::string body = to_json(request).dump();

    std::string last_error;
    auto backoff = s.initial_backoff;
    for (int attempt = 0; attempt <= s.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto result = client.Post(endpoint.path, headers, body, "application/json");
        if (!result) {
            last_error = "transport failure: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status == 200) {
            Json parsed = Json::parse(result->body, nullptr, false);
            if (parsed.is_discarded())
                fail(ErrorKind::MalformedResponse, "completion body is not JSON");
            return parse_completion(parsed);
        }
        last_error = fmt::format("HTTP {}: {}", result->status, result->body.substr(0, 200));
        if (!retryable(result->status))
            break;
    }
    fail(ErrorKind::TransportError, last_error);
}

} // namespace debinforge::llm
