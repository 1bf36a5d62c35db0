#pragma once

// OpenAI-compatible chat-completions client:
//   POST {base_url}/chat/completions  {model, messages, temperature, max_tokens}
// with a bearer token read from an environment variable.

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>

#include "gazecoach/errors.hpp"
#include "gazecoach/gateway.hpp"

namespace gazecoach {

struct RemoteConfig {
    std::string base_url;    // e.g. https://api.openai.com/v1
    std::string api_key_env; // name of the variable holding the key
    std::chrono::milliseconds timeout{60000};
    std::size_t max_concurrent = kDefaultBackendConcurrency;
};

/// Request body as sent on the wire.
inline nlohmann::ordered_json chat_payload(const ChatRequest& r) {
    nlohmann::ordered_json msgs = nlohmann::ordered_json::array();
    for (const auto& m : r.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return {{"model", r.model_id}, {"messages", std::move(msgs)}, {"temperature", r.temperature},
            {"max_tokens", r.max_tokens}};
}

class RemoteBackend : public ChatBackend {
public:
    explicit RemoteBackend(RemoteConfig cfg) : ChatBackend("remote", cfg.max_concurrent), cfg_(std::move(cfg)) {
        if (cfg_.api_key_env.empty()) throw ConfigError("remote backend needs api_key_env");
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key || !*key) throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");
        api_key_ = key;
        split_url(cfg_.base_url);
    }

protected:
    ChatCompletion send(const ChatRequest& request) override {
        httplib::Client cli(origin_);
        cli.set_bearer_token_auth(api_key_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());

        const auto start = std::chrono::steady_clock::now();
        auto res = cli.Post(path_prefix_ + "/chat/completions", chat_payload(request).dump(), "application/json");
        if (!res) {
            const auto err = res.error();
            const bool timed_out =
                err == httplib::Error::ConnectionTimeout ||
                (err == httplib::Error::Read && std::chrono::steady_clock::now() - start >= cfg_.timeout);
            const std::string what = redact("request to " + cfg_.base_url + " failed: " + httplib::to_string(err));
            if (timed_out) throw TimeoutError(what);
            throw TransportError(what);
        }
        const std::string body = redact(res->body.substr(0, 512));
        if (res->status == 401 || res->status == 403) throw AuthError(res->status, body);
        if (res->status < 200 || res->status >= 300) throw HttpStatusError(res->status, body);

        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw ResponseFormatError("reply is not JSON");
        }
        ChatCompletion c;
        try {
            c.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ResponseFormatError("reply has no choices[0].message.content");
        }
        if (auto u = doc.find("usage"); u != doc.end() && u->is_object())
            c.token_usage = TokenUsage{u->value("prompt_tokens", std::int64_t{0}),
                                       u->value("completion_tokens", std::int64_t{0})};
        return c;
    }

private:
    void split_url(const std::string& url) {
        const auto scheme = url.find("://");
        if (scheme == std::string::npos) throw ConfigError("base_url needs a scheme: " + url);
        const auto slash = url.find('/', scheme + 3);
        origin_ = url.substr(0, slash);
        path_prefix_ = slash == std::string::npos ? "" : url.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }

    std::string redact(std::string s) const {
        if (api_key_.empty()) return s;
        for (auto pos = s.find(api_key_); pos != std::string::npos; pos = s.find(api_key_, pos + 3))
            s.replace(pos, api_key_.size(), "***");
        return s;
    }

    RemoteConfig cfg_;
    std::string api_key_;
    std::string origin_;
    std::string path_prefix_;
};

} // namespace gazecoach
