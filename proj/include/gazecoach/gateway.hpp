#pragma once

// Chat-completion backend abstraction. Concrete backends implement `send`;
// the base class validates requests, gates concurrency, measures latency and
// journals every call.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

namespace gazecoach {

enum class ChatRole { system, user, assistant };

inline std::string to_string(ChatRole r) {
    switch (r) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: break;
    }
    return "assistant";
}

struct ChatMessage {
    ChatRole role = ChatRole::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

inline constexpr double kDefaultTemperature = 0.2;

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = kDefaultTemperature;
    int max_tokens = 1024;
    std::string request_tag; // free-form, logged
    std::string case_key;    // groups calls per case in the run log; not sent

    void validate() const {
        if (messages.empty()) throw std::invalid_argument("chat request has no messages");
        if (messages.front().role == ChatRole::assistant)
            throw std::invalid_argument("first chat message must be system or user");
        if (!(temperature >= 0.0 && temperature <= 2.0))
            throw std::invalid_argument("temperature outside [0,2]");
        if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
    }
};

struct TokenUsage {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;
};

struct ChatCompletion {
    std::string text;
    double latency_ms = 0.0;
    std::optional<TokenUsage> token_usage;
    std::string backend_id;
    int attempts = 1;
};

// --- errors -----------------------------------------------------------------

enum class GatewayErrorKind { transport, timeout, http_status, auth, script_miss, bad_response, exhausted };

inline std::string to_string(GatewayErrorKind k) {
    switch (k) {
    case GatewayErrorKind::transport: return "transport";
    case GatewayErrorKind::timeout: return "timeout";
    case GatewayErrorKind::http_status: return "http_status";
    case GatewayErrorKind::auth: return "auth";
    case GatewayErrorKind::script_miss: return "script_miss";
    case GatewayErrorKind::bad_response: return "bad_response";
    case GatewayErrorKind::exhausted: break;
    }
    return "exhausted";
}

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    GatewayErrorKind kind() const noexcept { return kind_; }

private:
    GatewayErrorKind kind_;
};

class TransportError : public GatewayError {
public:
    explicit TransportError(const std::string& msg) : GatewayError(GatewayErrorKind::transport, msg) {}
};

class TimeoutError : public GatewayError {
public:
    explicit TimeoutError(const std::string& msg) : GatewayError(GatewayErrorKind::timeout, msg) {}
};

class HttpStatusError : public GatewayError {
public:
    HttpStatusError(int status, const std::string& msg)
        : HttpStatusError(GatewayErrorKind::http_status, status, msg) {}
    int status() const noexcept { return status_; }

protected:
    HttpStatusError(GatewayErrorKind kind, int status, const std::string& msg)
        : GatewayError(kind, "HTTP " + std::to_string(status) + ": " + msg), status_(status) {}

private:
    int status_;
};

/// 401/403. Never retried.
class AuthError : public HttpStatusError {
public:
    AuthError(int status, const std::string& msg) : HttpStatusError(GatewayErrorKind::auth, status, msg) {}
};

class ScriptMissError : public GatewayError {
public:
    explicit ScriptMissError(const std::string& msg) : GatewayError(GatewayErrorKind::script_miss, msg) {}
};

/// 2xx reply whose body is not a chat completion.
class ResponseFormatError : public GatewayError {
public:
    explicit ResponseFormatError(const std::string& msg) : GatewayError(GatewayErrorKind::bad_response, msg) {}
};

class RetriesExhaustedError : public GatewayError {
public:
    RetriesExhaustedError(int attempts, const std::string& last)
        : GatewayError(GatewayErrorKind::exhausted,
                       "gave up after " + std::to_string(attempts) + " attempts: " + last),
          attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

// --- digest -----------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

/// Contents of all user-role messages joined by a blank line.
inline std::string user_content(const ChatRequest& r) {
    std::string out;
    bool first = true;
    for (const auto& m : r.messages) {
        if (m.role != ChatRole::user) continue;
        if (!first) out += "\n\n";
        out += m.content;
        first = false;
    }
    return out;
}

inline std::string request_digest(const ChatRequest& r) { return sha256_hex(user_content(r)); }

// --- run log ----------------------------------------------------------------

/// Append-only JSON-lines journal. Records never contain message content or
/// credentials: only digests, tags, timings and outcomes.
class RunLog {
public:
    RunLog() = default;

    /// Appends to `path` (created if missing) in addition to memory.
    explicit RunLog(const std::filesystem::path& path) : file_(path, std::ios::app) {
        if (!file_) throw std::runtime_error("cannot open run log " + path.string());
    }

    void append(nlohmann::ordered_json record) {
        std::lock_guard lock(mu_);
        std::string line = record.dump();
        if (file_.is_open()) {
            file_ << line << '\n';
            file_.flush();
        }
        lines_.push_back(std::move(line));
    }

    void record_case(const std::string& case_key, double local_ms) {
        append({{"kind", "case"}, {"case_key", case_key}, {"local_ms", local_ms}});
    }

    std::vector<std::string> lines() const {
        std::lock_guard lock(mu_);
        return lines_;
    }

    std::vector<nlohmann::json> records() const {
        std::vector<nlohmann::json> out;
        for (const auto& l : lines()) out.push_back(nlohmann::json::parse(l));
        return out;
    }

private:
    mutable std::mutex mu_;
    std::ofstream file_;
    std::vector<std::string> lines_;
};

inline std::vector<nlohmann::json> read_run_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read run log " + path.string());
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

// --- backend base -----------------------------------------------------------

inline constexpr std::size_t kDefaultBackendConcurrency = 8;

class ChatBackend {
public:
    explicit ChatBackend(std::string id, std::size_t max_concurrent = kDefaultBackendConcurrency)
        : id_(std::move(id)),
          gate_(static_cast<std::ptrdiff_t>(max_concurrent == 0 ? 1 : max_concurrent)) {}
    virtual ~ChatBackend() = default;

    ChatBackend(const ChatBackend&) = delete;
    ChatBackend& operator=(const ChatBackend&) = delete;

    const std::string& id() const { return id_; }

    void set_run_log(std::shared_ptr<RunLog> log) { log_ = std::move(log); }

    /// One call. Safe to invoke concurrently.
    ChatCompletion complete(const ChatRequest& request) {
        request.validate();
        const std::string digest = request_digest(request);
        gate_.acquire();
        const auto start = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        };
        try {
            ChatCompletion c = send(request);
            gate_.release();
            c.latency_ms = elapsed();
            c.backend_id = id_;
            journal(request, digest, c.latency_ms, nullptr);
            return c;
        } catch (const GatewayError& e) {
            gate_.release();
            journal(request, digest, elapsed(), &e);
            throw;
        } catch (...) {
            gate_.release();
            throw;
        }
    }

protected:
    virtual ChatCompletion send(const ChatRequest& request) = 0;

private:
    void journal(const ChatRequest& r, const std::string& digest, double latency_ms, const GatewayError* err) {
        if (!log_) return;
        nlohmann::ordered_json rec = {{"kind", "call"},
                                      {"case_key", r.case_key},
                                      {"request_tag", r.request_tag},
                                      {"backend", id_},
                                      {"model", r.model_id},
                                      {"digest", digest},
                                      {"latency_ms", latency_ms},
                                      {"outcome", err ? "error" : "ok"}};
        if (err) rec["error_kind"] = to_string(err->kind());
        log_->append(std::move(rec));
    }

    std::string id_;
    std::counting_semaphore<> gate_;
    std::shared_ptr<RunLog> log_;
};

inline ChatCompletion complete(ChatBackend& backend, const ChatRequest& request) {
    return backend.complete(request);
}

// --- retry ------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
    /// Replaceable for tests.
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };

    std::chrono::milliseconds backoff(int retry_index) const {
        const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry_index);
        return std::min(max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(ms)));
    }
};

/// Transport failures, timeouts and HTTP 429 are transient.
inline bool is_retryable(const GatewayError& e) {
    if (e.kind() == GatewayErrorKind::transport || e.kind() == GatewayErrorKind::timeout) return true;
    if (e.kind() == GatewayErrorKind::http_status) {
        const auto* h = dynamic_cast<const HttpStatusError*>(&e);
        return h && h->status() == 429;
    }
    return false;
}

inline ChatCompletion with_retry(ChatBackend& backend, const ChatRequest& request, const RetryPolicy& policy = {}) {
    const int attempts = std::max(1, policy.max_attempts);
    double spent_ms = 0.0;
    for (int attempt = 1;; ++attempt) {
        const auto start = std::chrono::steady_clock::now();
        try {
            ChatCompletion c = backend.complete(request);
            c.latency_ms += spent_ms;
            c.attempts = attempt;
            return c;
        } catch (const GatewayError& e) {
            spent_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            if (!is_retryable(e)) throw;
            if (attempt >= attempts) throw RetriesExhaustedError(attempt, e.what());
            if (policy.sleep) policy.sleep(policy.backoff(attempt - 1));
        }
    }
}

} // namespace gazecoach
