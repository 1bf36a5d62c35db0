#pragma once

// Run configuration: a JSON file, overridable flag by flag.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "gazecoach/agents.hpp"
#include "gazecoach/errors.hpp"
#include "gazecoach/synth.hpp"

namespace gazecoach {

enum class BackendKind { remote, scripted };

struct BackendConfig {
    BackendKind kind = BackendKind::scripted;
    std::optional<std::string> base_url;
    std::optional<std::string> model_id;
    std::optional<std::string> api_key_env;
    std::optional<std::string> script_path;
    std::int64_t timeout_ms = 60000;
    std::size_t max_concurrent = kDefaultBackendConcurrency;
};

struct RunConfig {
    std::optional<BackendConfig> backend;
    double temperature = kDefaultTemperature;
    int max_tokens = 1024;
    AgentPolicy policy;
    PetMode mode = PetMode::reference;
    bool communication = false;
    MatcherMode matcher = MatcherMode::exact;
    std::optional<std::string> synonym_table_path;
    std::int64_t tolerance_ms = 0;
    Thresholds thresholds;
    std::size_t max_parallel_agents = 0;
    std::size_t max_parallel_cases = 4;
    std::uint64_t seed = 0;
    int retry_max_attempts = 3;
    std::int64_t retry_initial_backoff_ms = 500;
    bool strict = false;

    bool needs_backend() const { return mode == PetMode::llm || matcher == MatcherMode::llm; }

    void validate() const {
        if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must be in [0,2]");
        if (max_tokens <= 0) throw ConfigError("max_tokens must be positive");
        if (tolerance_ms < 0) throw ConfigError("tolerance_ms must be nonnegative");
        if (!(thresholds.radius >= 0.0)) throw ConfigError("thresholds.radius must be nonnegative");
        if (!(thresholds.dwell_fraction >= 0.0)) throw ConfigError("thresholds.dwell_fraction must be nonnegative");
        if (max_parallel_cases == 0) throw ConfigError("max_parallel_cases must be at least 1");
        if (retry_max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
        if (backend) {
            if (backend->kind == BackendKind::remote &&
                (!backend->base_url || !backend->model_id || !backend->api_key_env))
                throw ConfigError("remote backend requires base_url, model_id and api_key_env");
            if (backend->kind == BackendKind::scripted && !backend->script_path)
                throw ConfigError("scripted backend requires script_path");
        }
        if (needs_backend() && !backend) throw ConfigError("llm mode and llm matcher need a backend");
    }
};

inline std::string to_string(PetMode m) { return m == PetMode::llm ? "llm" : "reference"; }
inline std::string to_string(MatcherMode m) { return m == MatcherMode::llm ? "llm_matcher" : "exact"; }
inline std::string to_string(BackendKind k) { return k == BackendKind::remote ? "remote" : "scripted"; }

namespace detail {

template <class T>
T config_value(const json& obj, const char* key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key " + where + key + " has the wrong type");
    }
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
    for (const auto& [k, _] : obj.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError("unknown config key " + where + k);
}

inline std::string resolve(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path(p);
    return (path.is_absolute() || base.empty()) ? p : (base / path).lexically_normal().string();
}

} // namespace detail

inline PetMode parse_pet_mode(std::string_view s) {
    if (s == "reference") return PetMode::reference;
    if (s == "llm") return PetMode::llm;
    throw ConfigError("mode must be reference or llm");
}

inline MatcherMode parse_matcher_mode(std::string_view s) {
    if (s == "exact") return MatcherMode::exact;
    if (s == "llm_matcher" || s == "llm") return MatcherMode::llm;
    throw ConfigError("matcher must be exact or llm_matcher");
}

inline BackendKind parse_backend_kind(std::string_view s) {
    if (s == "remote") return BackendKind::remote;
    if (s == "scripted") return BackendKind::scripted;
    throw ConfigError("backend.kind must be remote or scripted");
}

inline AgentPolicyKind parse_policy(std::string_view s) {
    if (auto k = parse_policy_kind(s)) return *k;
    throw ConfigError("policy must be by_complexity or by_error_count");
}

/// Relative paths inside the document resolve against `base_dir`.
inline RunConfig parse_run_config(std::string_view raw, const std::filesystem::path& base_dir = {}) {
    json doc;
    try {
        doc = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    using detail::config_value;
    detail::reject_unknown(doc,
                           {"backend", "temperature", "max_tokens", "policy", "agent_cap", "mode", "communication",
                            "matcher", "synonym_table_path", "tolerance_ms", "thresholds", "max_parallel_agents",
                            "max_parallel_cases", "seed", "retry", "strict"},
                           "");
    RunConfig c;
    if (doc.contains("backend") && !doc["backend"].is_null()) {
        const json& b = doc["backend"];
        if (!b.is_object()) throw ConfigError("backend must be an object");
        detail::reject_unknown(b, {"kind", "base_url", "model_id", "api_key_env", "script_path", "timeout_ms",
                                   "max_concurrent"},
                               "backend.");
        BackendConfig bc;
        bc.kind = parse_backend_kind(config_value<std::string>(b, "kind", "backend."));
        auto opt = [&](const char* key, std::optional<std::string>& dst) {
            if (b.contains(key) && !b[key].is_null()) dst = config_value<std::string>(b, key, "backend.");
        };
        opt("base_url", bc.base_url);
        opt("model_id", bc.model_id);
        opt("api_key_env", bc.api_key_env);
        opt("script_path", bc.script_path);
        if (bc.script_path) bc.script_path = detail::resolve(*bc.script_path, base_dir);
        if (b.contains("timeout_ms")) bc.timeout_ms = config_value<std::int64_t>(b, "timeout_ms", "backend.");
        if (b.contains("max_concurrent"))
            bc.max_concurrent = config_value<std::size_t>(b, "max_concurrent", "backend.");
        c.backend = bc;
    }
    if (doc.contains("temperature")) c.temperature = config_value<double>(doc, "temperature", "");
    if (doc.contains("max_tokens")) c.max_tokens = config_value<int>(doc, "max_tokens", "");
    if (doc.contains("policy")) c.policy.kind = parse_policy(config_value<std::string>(doc, "policy", ""));
    if (doc.contains("agent_cap") && !doc["agent_cap"].is_null())
        c.policy.agent_cap = config_value<std::size_t>(doc, "agent_cap", "");
    if (doc.contains("mode")) c.mode = parse_pet_mode(config_value<std::string>(doc, "mode", ""));
    if (doc.contains("communication")) c.communication = config_value<bool>(doc, "communication", "");
    if (doc.contains("matcher")) c.matcher = parse_matcher_mode(config_value<std::string>(doc, "matcher", ""));
    if (doc.contains("synonym_table_path") && !doc["synonym_table_path"].is_null())
        c.synonym_table_path = detail::resolve(config_value<std::string>(doc, "synonym_table_path", ""), base_dir);
    if (doc.contains("tolerance_ms")) c.tolerance_ms = config_value<std::int64_t>(doc, "tolerance_ms", "");
    if (doc.contains("thresholds")) {
        const json& t = doc["thresholds"];
        if (!t.is_object()) throw ConfigError("thresholds must be an object");
        detail::reject_unknown(t, {"radius", "dwell_fraction"}, "thresholds.");
        if (t.contains("radius")) c.thresholds.radius = config_value<double>(t, "radius", "thresholds.");
        if (t.contains("dwell_fraction"))
            c.thresholds.dwell_fraction = config_value<double>(t, "dwell_fraction", "thresholds.");
    }
    if (doc.contains("max_parallel_agents"))
        c.max_parallel_agents = config_value<std::size_t>(doc, "max_parallel_agents", "");
    if (doc.contains("max_parallel_cases"))
        c.max_parallel_cases = config_value<std::size_t>(doc, "max_parallel_cases", "");
    if (doc.contains("seed")) c.seed = config_value<std::uint64_t>(doc, "seed", "");
    if (doc.contains("retry")) {
        const json& r = doc["retry"];
        if (!r.is_object()) throw ConfigError("retry must be an object");
        detail::reject_unknown(r, {"max_attempts", "initial_backoff_ms"}, "retry.");
        if (r.contains("max_attempts")) c.retry_max_attempts = config_value<int>(r, "max_attempts", "retry.");
        if (r.contains("initial_backoff_ms"))
            c.retry_initial_backoff_ms = config_value<std::int64_t>(r, "initial_backoff_ms", "retry.");
    }
    if (doc.contains("strict")) c.strict = config_value<bool>(doc, "strict", "");
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::string raw;
    try {
        raw = read_file(path);
    } catch (const ValidationError&) {
        throw ConfigError("cannot read config " + path.string());
    }
    return parse_run_config(raw, path.parent_path());
}

inline ordered_json to_json(const RunConfig& c) {
    ordered_json j = ordered_json::object();
    if (c.backend) {
        const auto& b = *c.backend;
        auto opt = [](const std::optional<std::string>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
        j["backend"] = {{"kind", to_string(b.kind)},       {"base_url", opt(b.base_url)},
                        {"model_id", opt(b.model_id)},     {"api_key_env", opt(b.api_key_env)},
                        {"script_path", opt(b.script_path)}, {"timeout_ms", b.timeout_ms},
                        {"max_concurrent", b.max_concurrent}};
    } else {
        j["backend"] = nullptr;
    }
    j["temperature"] = c.temperature;
    j["max_tokens"] = c.max_tokens;
    j["policy"] = to_string(c.policy.kind);
    j["agent_cap"] = c.policy.agent_cap ? ordered_json(*c.policy.agent_cap) : ordered_json(nullptr);
    j["mode"] = to_string(c.mode);
    j["communication"] = c.communication;
    j["matcher"] = to_string(c.matcher);
    j["synonym_table_path"] = c.synonym_table_path ? ordered_json(*c.synonym_table_path) : ordered_json(nullptr);
    j["tolerance_ms"] = c.tolerance_ms;
    j["thresholds"] = {{"radius", c.thresholds.radius}, {"dwell_fraction", c.thresholds.dwell_fraction}};
    j["max_parallel_agents"] = c.max_parallel_agents;
    j["max_parallel_cases"] = c.max_parallel_cases;
    j["seed"] = c.seed;
    j["retry"] = {{"max_attempts", c.retry_max_attempts}, {"initial_backoff_ms", c.retry_initial_backoff_ms}};
    j["strict"] = c.strict;
    return j;
}

/// Agent settings implied by a run config (synonym table loaded from disk).
inline AgentConfig agent_config(const RunConfig& c) {
    AgentConfig a;
    a.mode = c.mode;
    a.matcher = c.matcher;
    a.policy = c.policy;
    a.thresholds = c.thresholds;
    a.tolerance_ms = c.tolerance_ms;
    a.communication = c.communication;
    a.max_parallel_agents = c.max_parallel_agents;
    if (c.synonym_table_path) a.synonyms = parse_synonym_table(read_file(*c.synonym_table_path));
    a.model_id = c.backend && c.backend->model_id ? *c.backend->model_id : "scripted";
    a.temperature = c.temperature;
    a.max_tokens = c.max_tokens;
    a.retry.max_attempts = c.retry_max_attempts;
    a.retry.initial_backoff = std::chrono::milliseconds(c.retry_initial_backoff_ms);
    return a;
}

} // namespace gazecoach
