#pragma once

// Template rendering and parsing of model replies.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gazecoach/error_type.hpp"
#include "gazecoach/prompt_templates.hpp"

namespace gazecoach {

inline constexpr std::string_view kPromptVersion = "v1";

/// Replaces every `{{name}}`. Unknown placeholders and unused variables are
/// both errors, so a template and its caller cannot drift apart silently.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::set<std::string> used;
    std::size_t pos = 0;
    while (true) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) throw std::invalid_argument("unterminated placeholder in template");
        const std::string name(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw std::invalid_argument("template variable not provided: " + name);
        out.append(tmpl.substr(pos, open - pos));
        out += it->second;
        used.insert(name);
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    for (const auto& [k, _] : vars)
        if (!used.count(k)) throw std::invalid_argument("template variable not used: " + k);
    return out;
}

class ReplyParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Finds the JSON object in a model reply: the whole text, a fenced block, or
/// the span from the first '{' to the last '}'.
inline nlohmann::json extract_json_object(std::string_view text) {
    auto try_parse = [](std::string_view s) -> std::optional<nlohmann::json> {
        auto j = nlohmann::json::parse(s, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object()) return std::nullopt;
        return j;
    };
    if (auto j = try_parse(text)) return *j;
    if (auto fence = text.find("```"); fence != std::string_view::npos) {
        auto body = text.find('\n', fence);
        auto end = body == std::string_view::npos ? body : text.find("```", body);
        if (end != std::string_view::npos)
            if (auto j = try_parse(text.substr(body + 1, end - body - 1))) return *j;
    }
    const auto first = text.find('{');
    const auto last = text.rfind('}');
    if (first != std::string_view::npos && last != std::string_view::npos && last > first)
        if (auto j = try_parse(text.substr(first, last - first + 1))) return *j;
    throw ReplyParseError("no JSON object found in reply");
}

struct VerdictReply {
    ErrorType error_type = ErrorType::none;
    std::string rationale;
};

/// `{"error_type": one of 4, "rationale": str}`
inline VerdictReply parse_verdict_reply(std::string_view text) {
    const nlohmann::json j = extract_json_object(text);
    auto et = j.find("error_type");
    if (et == j.end() || !et->is_string()) throw ReplyParseError("\"error_type\" must be a string");
    auto type = parse_error_type(et->get<std::string>());
    if (!type)
        throw ReplyParseError("\"error_type\" must be one of missed_fixation, brief_fixation, knowledge_gap, none");
    auto rat = j.find("rationale");
    if (rat == j.end() || !rat->is_string()) throw ReplyParseError("\"rationale\" must be a string");
    return {*type, rat->get<std::string>()};
}

/// `{"matches": [{"teacher": label, "student": label|null}]}` checked against
/// the known label sets. Returns teacher label -> student label (or nullopt).
/// Teacher labels the reply leaves out count as unmatched.
inline std::map<std::string, std::optional<std::string>> parse_matcher_reply(
    std::string_view text, const std::vector<std::string>& teacher_labels,
    const std::vector<std::string>& student_labels) {
    const nlohmann::json j = extract_json_object(text);
    auto ms = j.find("matches");
    if (ms == j.end() || !ms->is_array()) throw ReplyParseError("\"matches\" must be an array");
    const std::set<std::string> teachers(teacher_labels.begin(), teacher_labels.end());
    const std::set<std::string> students(student_labels.begin(), student_labels.end());

    std::map<std::string, std::optional<std::string>> out;
    for (const auto& t : teacher_labels) out[t] = std::nullopt;
    std::set<std::string> seen_teacher, used_student;
    for (const auto& m : *ms) {
        if (!m.is_object()) throw ReplyParseError("each match must be an object");
        auto t = m.find("teacher");
        if (t == m.end() || !t->is_string()) throw ReplyParseError("match \"teacher\" must be a string");
        const std::string tl = t->get<std::string>();
        if (!teachers.count(tl)) throw ReplyParseError("unknown expert finding \"" + tl + "\"");
        if (!seen_teacher.insert(tl).second) throw ReplyParseError("expert finding \"" + tl + "\" listed twice");
        auto s = m.find("student");
        if (s == m.end() || s->is_null()) continue;
        if (!s->is_string()) throw ReplyParseError("match \"student\" must be a string or null");
        const std::string sl = s->get<std::string>();
        if (!students.count(sl)) throw ReplyParseError("unknown trainee finding \"" + sl + "\"");
        if (!used_student.insert(sl).second) throw ReplyParseError("trainee finding \"" + sl + "\" used twice");
        out[tl] = sl;
    }
    return out;
}

} // namespace gazecoach
