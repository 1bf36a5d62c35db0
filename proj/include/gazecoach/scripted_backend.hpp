#pragma once

// Deterministic backend for tests and offline runs. Replies come from a
// fixture; a request with no matching entry is an error, never a made-up reply.

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "gazecoach/errors.hpp"
#include "gazecoach/gateway.hpp"

namespace gazecoach {

struct ScriptEntry {
    enum class Kind { digest, prefix, contains };
    Kind kind = Kind::digest;
    std::string match;
    std::string reply;
};

/// Fixture: JSON array of {"match": str, "reply": str, "kind": "digest"|"prefix"|"contains"}.
/// `kind` defaults to "digest" (SHA-256 hex of the user content).
inline std::vector<ScriptEntry> parse_script(std::string_view raw) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("", std::string("malformed script fixture: ") + e.what());
    }
    if (!doc.is_array()) throw ValidationError("", "script fixture must be a JSON array");
    std::vector<ScriptEntry> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string p = "[" + std::to_string(i) + "]";
        const auto& e = doc[i];
        if (!e.is_object()) throw ValidationError(p, "expected object");
        if (!e.contains("match") || !e["match"].is_string()) throw ValidationError(p + ".match", "expected string");
        if (!e.contains("reply") || !e["reply"].is_string()) throw ValidationError(p + ".reply", "expected string");
        ScriptEntry s;
        s.match = e["match"].get<std::string>();
        s.reply = e["reply"].get<std::string>();
        const std::string kind = e.value("kind", "digest");
        if (kind == "digest") s.kind = ScriptEntry::Kind::digest;
        else if (kind == "prefix") s.kind = ScriptEntry::Kind::prefix;
        else if (kind == "contains") s.kind = ScriptEntry::Kind::contains;
        else throw ValidationError(p + ".kind", "expected digest, prefix or contains");
        out.push_back(std::move(s));
    }
    return out;
}

class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> entries,
                             std::size_t max_concurrent = kDefaultBackendConcurrency)
        : ChatBackend("scripted", max_concurrent), entries_(std::move(entries)), used_(entries_.size(), false) {}

    /// Requests seen so far, in arrival order.
    std::vector<ChatRequest> requests() const {
        std::lock_guard lock(mu_);
        return seen_;
    }

    std::size_t call_count() const {
        std::lock_guard lock(mu_);
        return seen_.size();
    }

protected:
    ChatCompletion send(const ChatRequest& request) override {
        const std::string content = user_content(request);
        const std::string digest = sha256_hex(content);
        std::lock_guard lock(mu_);
        seen_.push_back(request);
        // Matching entries are consumed in order; the last one stays in effect.
        std::optional<std::size_t> last;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (!matches(entries_[i], content, digest)) continue;
            last = i;
            if (!used_[i]) {
                used_[i] = true;
                return {entries_[i].reply, 0.0, std::nullopt, id(), 1};
            }
        }
        if (last) return {entries_[*last].reply, 0.0, std::nullopt, id(), 1};
        throw ScriptMissError("no scripted reply for request digest " + digest +
                              (request.request_tag.empty() ? "" : " (tag " + request.request_tag + ")"));
    }

private:
    static bool matches(const ScriptEntry& e, const std::string& content, const std::string& digest) {
        switch (e.kind) {
        case ScriptEntry::Kind::digest: return e.match == digest;
        case ScriptEntry::Kind::prefix: return content.compare(0, e.match.size(), e.match) == 0;
        case ScriptEntry::Kind::contains: break;
        }
        return content.find(e.match) != std::string::npos;
    }

    std::vector<ScriptEntry> entries_;
    mutable std::mutex mu_;
    std::vector<bool> used_;
    std::vector<ChatRequest> seen_;
};

} // namespace gazecoach
