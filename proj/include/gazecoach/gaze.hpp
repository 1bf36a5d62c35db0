#pragma once

// Gaze sessions and report transcripts: domain types, JSON ingestion with
// field-path diagnostics, serialization, and pair validation.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gazecoach/errors.hpp"

namespace gazecoach {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class ReaderRole { teacher, student };

inline std::string to_string(ReaderRole role) {
    return role == ReaderRole::teacher ? "teacher" : "student";
}

inline std::optional<ReaderRole> parse_reader_role(std::string_view s) {
    if (s == "teacher") return ReaderRole::teacher;
    if (s == "student") return ReaderRole::student;
    return std::nullopt;
}

/// One fixation. Coordinates are normalized to the image bounds.
struct Fixation {
    double x = 0.0;
    double y = 0.0;
    std::int64_t onset_ms = 0;
    std::int64_t duration_ms = 1;

    /// Midpoint doubled, so alignment stays in integer arithmetic.
    std::int64_t midpoint_x2() const { return 2 * onset_ms + duration_ms; }

    bool operator==(const Fixation&) const = default;
};

/// Number of feature columns each fixation contributes to the gaze matrix.
inline constexpr std::size_t kFixationFeatures = 4;

struct GazeSession {
    std::string case_id;
    ReaderRole reader_role = ReaderRole::teacher;
    std::vector<Fixation> fixations;

    /// Row-major t x 4 gaze matrix (x, y, onset_ms, duration_ms).
    std::vector<double> matrix() const {
        std::vector<double> m;
        m.reserve(fixations.size() * kFixationFeatures);
        for (const auto& f : fixations) {
            m.push_back(f.x);
            m.push_back(f.y);
            m.push_back(static_cast<double>(f.onset_ms));
            m.push_back(static_cast<double>(f.duration_ms));
        }
        return m;
    }

    bool operator==(const GazeSession&) const = default;
};

struct Sentence {
    std::int64_t index = 0;
    std::string text;
    std::int64_t begin_ms = 0;
    std::int64_t end_ms = 1;
    std::optional<std::string> finding_label;

    bool operator==(const Sentence&) const = default;
};

struct Transcript {
    std::string case_id;
    ReaderRole reader_role = ReaderRole::teacher;
    std::vector<Sentence> sentences;

    std::vector<std::string> finding_labels() const {
        std::vector<std::string> out;
        for (const auto& s : sentences)
            if (s.finding_label) out.push_back(*s.finding_label);
        return out;
    }

    bool operator==(const Transcript&) const = default;
};

/// A session and the transcript dictated alongside it.
struct Reading {
    GazeSession session;
    Transcript transcript;

    bool operator==(const Reading&) const = default;
};

struct ParseOptions {
    /// Reject unknown keys instead of warning about them.
    bool strict = false;
    /// Receives non-fatal diagnostics when set.
    std::vector<std::string>* warnings = nullptr;
};

/// Lowercase (ASCII) and trim surrounding whitespace.
inline std::string normalize_label(std::string_view raw) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = raw.size();
    while (b < e && is_space(static_cast<unsigned char>(raw[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(raw[e - 1]))) --e;
    std::string out(raw.substr(b, e - b));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

inline json parse_document(std::string_view raw) {
    try {
        return json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ValidationError("", std::string("malformed JSON: ") + e.what());
    }
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<std::string_view> known,
                       const ParseOptions& opts) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(known.begin(), known.end(), key) != known.end()) continue;
        std::string where = join_path(path, key);
        if (opts.strict) throw ValidationError(where, "unknown key");
        if (opts.warnings) opts.warnings->push_back(where + ": unknown key ignored");
    }
}

inline const json& require(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(join_path(path, key), "missing required field");
    return *it;
}

inline const json& require_object(const json& v, const std::string& path) {
    if (!v.is_object()) throw ValidationError(path, "expected object");
    return v;
}

inline std::string get_string(const json& obj, const std::string& path, const char* key) {
    const json& v = require(obj, path, key);
    if (!v.is_string()) throw ValidationError(join_path(path, key), "expected string");
    return v.get<std::string>();
}

inline std::int64_t get_int(const json& obj, const std::string& path, const char* key) {
    const json& v = require(obj, path, key);
    if (!v.is_number_integer()) throw ValidationError(join_path(path, key), "expected integer");
    if (v.is_number_unsigned()) {
        auto u = v.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX))
            throw ValidationError(join_path(path, key), "integer out of range");
        return static_cast<std::int64_t>(u);
    }
    return v.get<std::int64_t>();
}

inline double get_number(const json& obj, const std::string& path, const char* key) {
    const json& v = require(obj, path, key);
    if (!v.is_number()) throw ValidationError(join_path(path, key), "expected number");
    return v.get<double>();
}

inline ReaderRole get_role(const json& obj, const std::string& path) {
    std::string s = get_string(obj, path, "reader_role");
    auto role = parse_reader_role(s);
    if (!role) throw ValidationError(join_path(path, "reader_role"),
                                     "expected \"teacher\" or \"student\", got \"" + s + "\"");
    return *role;
}

} // namespace detail

inline GazeSession parse_session(std::string_view raw, const ParseOptions& opts = {}) {
    using namespace detail;
    const json doc = parse_document(raw);
    require_object(doc, "");
    check_keys(doc, "", {"case_id", "reader_role", "fixations"}, opts);

    GazeSession s;
    s.case_id = get_string(doc, "", "case_id");
    s.reader_role = get_role(doc, "");
    const json& fx = require(doc, "", "fixations");
    if (!fx.is_array()) throw ValidationError("fixations", "expected array");

    s.fixations.reserve(fx.size());
    for (std::size_t k = 0; k < fx.size(); ++k) {
        const std::string p = index_path("fixations", k);
        require_object(fx[k], p);
        check_keys(fx[k], p, {"x", "y", "onset_ms", "duration_ms"}, opts);
        Fixation f;
        f.x = get_number(fx[k], p, "x");
        f.y = get_number(fx[k], p, "y");
        f.onset_ms = get_int(fx[k], p, "onset_ms");
        f.duration_ms = get_int(fx[k], p, "duration_ms");
        if (!(f.x >= 0.0 && f.x <= 1.0)) throw ValidationError(p + ".x", "coordinate outside [0,1]");
        if (!(f.y >= 0.0 && f.y <= 1.0)) throw ValidationError(p + ".y", "coordinate outside [0,1]");
        if (f.onset_ms < 0) throw ValidationError(p + ".onset_ms", "negative onset");
        if (f.duration_ms <= 0) throw ValidationError(p + ".duration_ms", "duration must be positive");
        s.fixations.push_back(f);
    }
    std::stable_sort(s.fixations.begin(), s.fixations.end(),
                     [](const Fixation& a, const Fixation& b) { return a.onset_ms < b.onset_ms; });
    return s;
}

inline Transcript parse_transcript(std::string_view raw, const ParseOptions& opts = {}) {
    using namespace detail;
    const json doc = parse_document(raw);
    require_object(doc, "");
    check_keys(doc, "", {"case_id", "reader_role", "sentences"}, opts);

    Transcript t;
    t.case_id = get_string(doc, "", "case_id");
    t.reader_role = get_role(doc, "");
    const json& ss = require(doc, "", "sentences");
    if (!ss.is_array()) throw ValidationError("sentences", "expected array");

    // Keep the source position so diagnostics name the original element.
    std::vector<std::pair<std::size_t, Sentence>> items;
    items.reserve(ss.size());
    for (std::size_t k = 0; k < ss.size(); ++k) {
        const std::string p = index_path("sentences", k);
        require_object(ss[k], p);
        check_keys(ss[k], p, {"index", "text", "begin_ms", "end_ms", "finding_label"}, opts);
        Sentence s;
        s.index = get_int(ss[k], p, "index");
        s.text = get_string(ss[k], p, "text");
        s.begin_ms = get_int(ss[k], p, "begin_ms");
        s.end_ms = get_int(ss[k], p, "end_ms");
        if (s.begin_ms >= s.end_ms) throw ValidationError(p + ".end_ms", "begin_ms must be < end_ms");
        if (auto it = ss[k].find("finding_label"); it != ss[k].end() && !it->is_null()) {
            if (!it->is_string()) throw ValidationError(p + ".finding_label", "expected string or null");
            std::string label = normalize_label(it->get<std::string>());
            if (label.empty()) throw ValidationError(p + ".finding_label", "empty label");
            s.finding_label = std::move(label);
        }
        items.emplace_back(k, std::move(s));
    }
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        return a.second.begin_ms < b.second.begin_ms;
    });

    std::set<std::string> seen;
    std::optional<std::pair<std::size_t, std::int64_t>> latest_end; // (source pos, end)
    for (const auto& [pos, s] : items) {
        if (!s.finding_label) continue;
        const std::string p = index_path("sentences", pos) + ".finding_label";
        if (!seen.insert(*s.finding_label).second)
            throw ValidationError(p, "duplicate finding label \"" + *s.finding_label + "\"");
        if (latest_end && s.begin_ms < latest_end->second)
            throw ValidationError(index_path("sentences", pos) + ".begin_ms",
                                  "finding window overlaps " + index_path("sentences", latest_end->first));
        if (!latest_end || s.end_ms > latest_end->second) latest_end = {pos, s.end_ms};
    }

    t.sentences.reserve(items.size());
    for (auto& [_, s] : items) t.sentences.push_back(std::move(s));
    return t;
}

inline ordered_json to_json(const GazeSession& s) {
    ordered_json fx = ordered_json::array();
    for (const auto& f : s.fixations)
        fx.push_back({{"x", f.x}, {"y", f.y}, {"onset_ms", f.onset_ms}, {"duration_ms", f.duration_ms}});
    return {{"case_id", s.case_id}, {"reader_role", to_string(s.reader_role)}, {"fixations", std::move(fx)}};
}

inline ordered_json to_json(const Transcript& t) {
    ordered_json ss = ordered_json::array();
    for (const auto& s : t.sentences) {
        ordered_json j = {{"index", s.index}, {"text", s.text}, {"begin_ms", s.begin_ms}, {"end_ms", s.end_ms}};
        j["finding_label"] = s.finding_label ? ordered_json(*s.finding_label) : ordered_json(nullptr);
        ss.push_back(std::move(j));
    }
    return {{"case_id", t.case_id}, {"reader_role", to_string(t.reader_role)}, {"sentences", std::move(ss)}};
}

/// Pretty-printed, newline-terminated UTF-8.
inline std::string serialize(const GazeSession& s) { return to_json(s).dump(2) + "\n"; }
inline std::string serialize(const Transcript& t) { return to_json(t).dump(2) + "\n"; }

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> problems;
    std::vector<std::string> warnings;
};

/// Cross-file consistency checks. Never throws.
inline ValidationReport validate_pair(const Reading& teacher, const Reading& student) {
    ValidationReport r;
    std::set<std::string> ids{teacher.session.case_id, teacher.transcript.case_id,
                              student.session.case_id, student.transcript.case_id};
    if (ids.size() > 1) {
        std::string list;
        for (const auto& id : ids) list += (list.empty() ? "" : ", ") + ("\"" + id + "\"");
        r.problems.push_back("case_id mismatch: " + list);
    }
    auto check_role = [&](ReaderRole got, ReaderRole want, const char* what) {
        if (got != want)
            r.problems.push_back(std::string(what) + " has reader_role " + to_string(got) +
                                 ", expected " + to_string(want));
    };
    check_role(teacher.session.reader_role, ReaderRole::teacher, "teacher session");
    check_role(teacher.transcript.reader_role, ReaderRole::teacher, "teacher transcript");
    check_role(student.session.reader_role, ReaderRole::student, "student session");
    check_role(student.transcript.reader_role, ReaderRole::student, "student transcript");
    if (teacher.session.fixations.empty()) r.warnings.push_back("teacher session has no fixations");
    if (student.session.fixations.empty()) r.warnings.push_back("student session has no fixations");
    r.ok = r.problems.empty();
    return r;
}

} // namespace gazecoach
