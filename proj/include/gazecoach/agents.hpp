#pragma once

// Principal coordinator, PET agents and the consolidator.
//
// The principal builds both thought graphs, matches findings and plans the
// comparisons. Each PET task compares one missed teacher finding with one
// student gaze pool, either through a model (llm) or through the
// deterministic evidence ladder (reference). The consolidator reduces the
// verdicts to one error type per missed finding and ORs them into the case
// verdict.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gazecoach/complexity.hpp"
#include "gazecoach/error_type.hpp"
#include "gazecoach/executor.hpp"
#include "gazecoach/gateway.hpp"
#include "gazecoach/gaze.hpp"
#include "gazecoach/prompts.hpp"
#include "gazecoach/thought_graph.hpp"

namespace gazecoach {

inline constexpr std::string_view kReportSchemaVersion = "1";

struct Thresholds {
    double radius = 0.1;         // normalized units around the teacher centroid
    double dwell_fraction = 0.5; // of teacher dwell

    bool operator==(const Thresholds&) const = default;
};

/// Locally computed gaze evidence for one comparison. Never produced by a model.
struct Evidence {
    std::int64_t overlap_fixations = 0;
    std::int64_t student_dwell_ms = 0; // dwell of the overlapping fixations
    std::int64_t teacher_dwell_ms = 0;
    std::optional<double> dwell_ratio; // present iff teacher_dwell_ms > 0

    static Evidence of(std::int64_t overlap, std::int64_t student_dwell, std::int64_t teacher_dwell) {
        Evidence e{overlap, student_dwell, teacher_dwell, std::nullopt};
        if (teacher_dwell > 0)
            e.dwell_ratio = static_cast<double>(student_dwell) / static_cast<double>(teacher_dwell);
        return e;
    }

    bool operator==(const Evidence&) const = default;
};

inline Evidence compute_evidence(const SubgraphSummary& teacher, std::span<const Fixation> student_view,
                                 const Thresholds& th) {
    if (teacher.fixation_count == 0 || !teacher.centroid) return Evidence::of(0, 0, 0);
    std::int64_t count = 0, dwell = 0;
    for (const auto& f : student_view) {
        if (std::hypot(f.x - teacher.centroid->x, f.y - teacher.centroid->y) <= th.radius) {
            ++count;
            dwell += f.duration_ms;
        }
    }
    return Evidence::of(count, dwell, teacher.total_dwell_ms);
}

/// Decision ladder: no overlap -> missed_fixation; overlap dwell strictly
/// below dwell_fraction of the teacher's -> brief_fixation; otherwise
/// knowledge_gap. A teacher finding without gaze cannot be compared and is
/// reported as knowledge_gap.
inline ErrorType classify_evidence(const Evidence& e, const Thresholds& th) {
    if (e.teacher_dwell_ms == 0) return ErrorType::knowledge_gap;
    if (e.overlap_fixations == 0) return ErrorType::missed_fixation;
    if (static_cast<double>(e.student_dwell_ms) < th.dwell_fraction * static_cast<double>(e.teacher_dwell_ms))
        return ErrorType::brief_fixation;
    return ErrorType::knowledge_gap;
}

class EmptyTeacherSubgraph : public std::invalid_argument {
public:
    explicit EmptyTeacherSubgraph(const std::string& label)
        : std::invalid_argument("teacher finding \"" + label + "\" has no fixations") {}
};

inline ErrorType reference_classify(const SubgraphSummary& teacher, std::span<const Fixation> student_view,
                                    const Thresholds& th = {}) {
    if (teacher.fixation_count == 0) throw EmptyTeacherSubgraph(teacher.finding_label);
    return classify_evidence(compute_evidence(teacher, student_view, th), th);
}

/// Sums overlap counts and dwell over disjoint student pools.
inline Evidence merge_evidence(std::span<const Evidence> parts) {
    std::int64_t overlap = 0, student = 0, teacher = 0;
    for (const auto& e : parts) {
        overlap += e.overlap_fixations;
        student += e.student_dwell_ms;
        teacher = std::max(teacher, e.teacher_dwell_ms);
    }
    return Evidence::of(overlap, student, teacher);
}

inline std::string describe_evidence(const Evidence& e, ErrorType type, const Thresholds& th) {
    std::ostringstream os;
    if (e.teacher_dwell_ms == 0) {
        os << "Flagged: the expert dictated this finding without fixating it, so gaze cannot be compared; "
              "treated as a knowledge gap.";
        return os.str();
    }
    switch (type) {
    case ErrorType::missed_fixation:
        os << "No trainee fixation came within " << th.radius << " of the region the expert examined ("
           << e.teacher_dwell_ms << " ms of expert dwell).";
        break;
    case ErrorType::brief_fixation:
        os << "The trainee fixated the region " << e.overlap_fixations << " time(s) for " << e.student_dwell_ms
           << " ms, below " << th.dwell_fraction << " of the expert's " << e.teacher_dwell_ms << " ms.";
        break;
    case ErrorType::knowledge_gap:
        os << "The trainee fixated the region " << e.overlap_fixations << " time(s) for " << e.student_dwell_ms
           << " ms against the expert's " << e.teacher_dwell_ms
           << " ms, yet did not report the finding.";
        break;
    case ErrorType::none:
        os << "No evidence either way.";
        break;
    }
    return os.str();
}

struct PetVerdict {
    std::size_t task_id = 0;
    std::string missed_finding_label;
    StudentPool pool;
    ErrorType error_type = ErrorType::none;
    std::string rationale;
    Evidence evidence;
};

enum class PetMode { reference, llm };
enum class MatcherMode { exact, llm };

struct AgentConfig {
    PetMode mode = PetMode::reference;
    MatcherMode matcher = MatcherMode::exact;
    AgentPolicy policy;
    Thresholds thresholds;
    std::int64_t tolerance_ms = 0;
    bool communication = false;
    std::size_t max_parallel_agents = 0; // 0: one thread per agent
    std::map<std::string, std::string> synonyms;
    std::string model_id;
    double temperature = kDefaultTemperature;
    int max_tokens = 1024;
    RetryPolicy retry;
};

/// Per-case bookkeeping that is not configuration.
struct CaseContext {
    std::string case_key;                 // run log grouping; defaults to case_id
    std::optional<std::string> variant_id; // copied into the report
    RunLog* log = nullptr;                // receives the per-case timing record
    ComparisonPlan* plan_out = nullptr;   // receives the plan, for --explain-plan
};

inline std::vector<std::size_t> pool_nodes(const ThoughtGraph& student, const StudentPool& pool) {
    switch (pool.kind) {
    case StudentPool::Kind::subgraph: return student.at(pool.label).nodes;
    case StudentPool::Kind::residual: return student.residual;
    case StudentPool::Kind::empty: break;
    }
    return {};
}

inline std::vector<Fixation> pool_fixations(const ThoughtGraph& student, const StudentPool& pool) {
    std::vector<Fixation> out;
    for (std::size_t i : pool_nodes(student, pool)) out.push_back(student.nodes[i]);
    return out;
}

namespace detail {

inline std::string format_fixations(const ThoughtGraph& g, const std::vector<std::size_t>& nodes) {
    if (nodes.empty()) return "(none)";
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const Fixation& f = g.nodes[nodes[k]];
        if (k) os << '\n';
        os << "#" << nodes[k] << ", " << f.x << ", " << f.y << ", " << f.onset_ms << ", " << f.duration_ms;
    }
    return os.str();
}

inline std::string format_summary(const SubgraphSummary& s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << s.fixation_count << " fixation(s), total dwell " << s.total_dwell_ms << " ms";
    if (s.centroid) os << ", dwell-weighted centroid (" << s.centroid->x << ", " << s.centroid->y << ")";
    if (s.bounding_box)
        os << ", bounding box x " << s.bounding_box->min_x << "-" << s.bounding_box->max_x << ", y "
           << s.bounding_box->min_y << "-" << s.bounding_box->max_y;
    return os.str();
}

inline std::string format_labels(const std::vector<std::string>& labels) {
    if (labels.empty()) return "(none)";
    std::string out;
    for (const auto& l : labels) out += (out.empty() ? "- " : "\n- ") + l;
    return out;
}

inline std::string tag(const std::string& case_key, const std::string& what) { return case_key + "/" + what; }

} // namespace detail

/// Bulletin block for communication mode; empty when there is nothing to share.
inline std::string render_bulletin(std::span<const PetVerdict> earlier) {
    if (earlier.empty()) return {};
    std::string entries;
    for (const auto& v : earlier) {
        if (!entries.empty()) entries += '\n';
        entries += "- task " + std::to_string(v.task_id) + " (\"" + v.missed_finding_label + "\" vs " +
                   v.pool.name() + "): " + to_string(v.error_type) + ". " + v.rationale;
    }
    return render_template(templates::bulletin_v1, {{"entries", entries}});
}

inline std::string render_pet_prompt(const ComparisonTask& task, const ThoughtGraph& teacher,
                                     const ThoughtGraph& student, std::string_view bulletin) {
    const SubgraphSummary summary = summarize_subgraph(teacher, task.missed_finding_label);
    return render_template(templates::pet_user_v1,
                           {{"case_id", teacher.case_id},
                            {"finding", task.missed_finding_label},
                            {"teacher_summary", detail::format_summary(summary)},
                            {"teacher_fixations",
                             detail::format_fixations(teacher, teacher.at(task.missed_finding_label).nodes)},
                            {"student_pool", task.pool.name()},
                            {"student_total", std::to_string(student.nodes.size())},
                            {"student_fixations", detail::format_fixations(student, pool_nodes(student, task.pool))},
                            {"bulletin", std::string(bulletin)}});
}

namespace detail {

/// One model exchange with a single repair round on unusable JSON.
template <class Parse>
auto ask_with_repair(ChatBackend& backend, ChatRequest req, const RetryPolicy& retry, Parse&& parse,
                     double& backend_ms) -> std::pair<std::optional<decltype(parse(std::string_view{}))>, std::string> {
    ChatCompletion first = with_retry(backend, req, retry);
    backend_ms += first.latency_ms;
    try {
        return {parse(first.text), {}};
    } catch (const ReplyParseError& e) {
        req.messages.push_back({ChatRole::assistant, first.text});
        req.messages.push_back({ChatRole::user, render_template(templates::repair_v1, {{"error", e.what()}})});
        req.request_tag += "/repair";
    }
    ChatCompletion second = with_retry(backend, req, retry);
    backend_ms += second.latency_ms;
    try {
        return {parse(second.text), {}};
    } catch (const ReplyParseError& e) {
        return {std::nullopt, e.what()};
    }
}

} // namespace detail

/// Runs one comparison task. `backend_ms` accumulates time spent in backend calls.
inline PetVerdict run_pet(const ComparisonTask& task, const ThoughtGraph& teacher, const ThoughtGraph& student,
                          ChatBackend* backend, const AgentConfig& cfg, std::string_view bulletin = {},
                          const std::string& case_key = {}, double* backend_ms = nullptr) {
    const SubgraphSummary summary = summarize_subgraph(teacher, task.missed_finding_label);
    const std::vector<Fixation> view = pool_fixations(student, task.pool);

    PetVerdict v;
    v.task_id = task.task_id;
    v.missed_finding_label = task.missed_finding_label;
    v.pool = task.pool;
    v.evidence = compute_evidence(summary, view, cfg.thresholds);

    if (cfg.mode == PetMode::reference) {
        try {
            v.error_type = reference_classify(summary, view, cfg.thresholds);
        } catch (const EmptyTeacherSubgraph&) {
            v.error_type = ErrorType::knowledge_gap;
        }
        v.rationale = describe_evidence(v.evidence, v.error_type, cfg.thresholds);
        return v;
    }

    if (!backend) throw std::invalid_argument("llm mode needs a chat backend");
    ChatRequest req;
    req.model_id = cfg.model_id;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    req.case_key = case_key.empty() ? teacher.case_id : case_key;
    req.request_tag = detail::tag(req.case_key, "pet/" + std::to_string(task.task_id));
    req.messages = {{ChatRole::system, std::string(templates::pet_system_v1)},
                    {ChatRole::user, render_pet_prompt(task, teacher, student, bulletin)}};

    double spent = 0.0;
    auto [reply, error] = detail::ask_with_repair(*backend, std::move(req), cfg.retry, parse_verdict_reply, spent);
    if (backend_ms) *backend_ms += spent;
    if (reply) {
        v.error_type = reply->error_type;
        v.rationale = std::move(reply->rationale);
    } else {
        v.error_type = ErrorType::none;
        v.rationale = "Diagnostic: model reply unusable after one repair attempt (" + error + ").";
    }
    return v;
}

struct FindingFeedback {
    std::string label;
    ErrorType error_type = ErrorType::none;
    std::string rationale;
    Evidence evidence;
    std::size_t verdict_count = 0;
};

struct FeedbackReport {
    std::string schema_version{kReportSchemaVersion};
    std::string case_id;
    std::optional<std::string> variant_id;
    ComplexityAssessment assessment;
    std::vector<FindingFeedback> per_finding;  // assessment.missed order
    std::vector<ErrorType> consolidated_error_types; // kErrorLabels order

    const FindingFeedback* finding(std::string_view label) const {
        for (const auto& f : per_finding)
            if (f.label == label) return &f;
        return nullptr;
    }
};

/// How several verdicts on the same finding reduce to one error type.
enum class VerdictMerge {
    evidence, // ladder over the summed evidence (reference mode)
    majority, // vote, ties settled by the evidence ladder (llm mode)
};

class ConsolidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline FeedbackReport consolidate(std::span<const PetVerdict> verdicts, const ComplexityAssessment& assessment,
                                  VerdictMerge merge, const Thresholds& th = {}) {
    std::map<std::string, std::vector<const PetVerdict*>> by_label;
    for (const auto& l : assessment.missed) by_label[l];
    for (const auto& v : verdicts) {
        auto it = by_label.find(v.missed_finding_label);
        if (it == by_label.end())
            throw ConsolidationError("verdict for \"" + v.missed_finding_label + "\", which is not a missed finding");
        it->second.push_back(&v);
    }

    FeedbackReport r;
    r.assessment = assessment;
    std::array<bool, 3> present{};
    for (const auto& label : assessment.missed) {
        const auto& vs = by_label[label];
        FindingFeedback f;
        f.label = label;
        f.verdict_count = vs.size();
        if (vs.empty()) {
            if (assessment.n_agents != 0)
                throw ConsolidationError("no verdict for missed finding \"" + label + "\"");
            f.error_type = ErrorType::none;
            f.rationale = "Not analyzed: the error complexity score is zero, so no agents were recruited.";
            r.per_finding.push_back(std::move(f));
            continue;
        }

        std::vector<Evidence> parts;
        for (const auto* v : vs) parts.push_back(v->evidence);
        f.evidence = merge_evidence(parts);
        const ErrorType ladder = classify_evidence(f.evidence, th);

        if (merge == VerdictMerge::evidence) {
            f.error_type = ladder;
            f.rationale = describe_evidence(f.evidence, ladder, th);
        } else {
            // none is an abstention unless every agent abstained
            std::map<ErrorType, std::size_t> votes;
            for (const auto* v : vs)
                if (v->error_type != ErrorType::none) ++votes[v->error_type];
            if (votes.empty()) votes[ErrorType::none] = vs.size();
            std::size_t top = 0;
            for (const auto& [_, n] : votes) top = std::max(top, n);
            auto tied = [&](ErrorType t) { return votes.count(t) && votes[t] == top; };
            if (tied(ladder)) {
                f.error_type = ladder;
            } else {
                // std::map iterates in enum order: missed, brief, knowledge, none.
                for (const auto& [t, n] : votes)
                    if (n == top) {
                        f.error_type = t;
                        break;
                    }
            }
            const PetVerdict* chosen = nullptr;
            for (const auto* v : vs)
                if (v->error_type == f.error_type && (!chosen || v->task_id < chosen->task_id)) chosen = v;
            f.rationale = chosen->rationale;
        }
        if (f.error_type != ErrorType::none) present[static_cast<std::size_t>(f.error_type)] = true;
        r.per_finding.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < kErrorLabels.size(); ++i)
        if (present[i]) r.consolidated_error_types.push_back(kErrorLabels[i]);
    return r;
}

struct PrincipalResult {
    ThoughtGraph teacher;
    ThoughtGraph student;
    ComplexityAssessment assessment;
    ComparisonPlan plan;
    double backend_ms = 0.0;
};

class MatcherReplyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline PrincipalResult run_principal(const Reading& teacher, const Reading& student, ChatBackend* backend,
                                     const AgentConfig& cfg, const std::string& case_key = {}) {
    const ValidationReport vr = validate_pair(teacher, student);
    if (!vr.ok) {
        std::string msg;
        for (const auto& p : vr.problems) msg += (msg.empty() ? "" : "; ") + p;
        throw ValidationError("", msg);
    }
    PrincipalResult out;
    out.teacher = build_thought_graph(teacher, cfg.tolerance_ms);
    out.student = build_thought_graph(student, cfg.tolerance_ms);

    FindingMatcher matcher = FindingMatcher::with_synonyms(cfg.synonyms);
    if (cfg.matcher == MatcherMode::llm) {
        const auto tl = out.teacher.labels();
        const auto sl = out.student.labels();
        std::set<std::pair<std::string, std::string>> pairs;
        if (!tl.empty() && !sl.empty()) {
            if (!backend) throw std::invalid_argument("llm matcher needs a chat backend");
            ChatRequest req;
            req.model_id = cfg.model_id;
            req.temperature = cfg.temperature;
            req.max_tokens = cfg.max_tokens;
            req.case_key = case_key.empty() ? out.teacher.case_id : case_key;
            req.request_tag = detail::tag(req.case_key, "matcher");
            req.messages = {{ChatRole::system, std::string(templates::matcher_system_v1)},
                            {ChatRole::user, render_template(templates::matcher_user_v1,
                                                             {{"case_id", out.teacher.case_id},
                                                              {"teacher_labels", detail::format_labels(tl)},
                                                              {"student_labels", detail::format_labels(sl)}})}};
            auto parse = [&](std::string_view text) { return parse_matcher_reply(text, tl, sl); };
            auto [mapping, error] = detail::ask_with_repair(*backend, std::move(req), cfg.retry, parse, out.backend_ms);
            if (!mapping) throw MatcherReplyError("finding matcher reply unusable after one repair attempt: " + error);
            for (const auto& [t, s] : *mapping)
                if (s) pairs.insert({t, *s});
        }
        matcher = FindingMatcher::from_pairs(std::move(pairs));
    }
    out.assessment = assess(out.teacher, out.student, matcher, cfg.policy);
    out.plan = plan_comparisons(out.assessment, out.teacher, out.student);
    return out;
}

/// Full pipeline for one case. Any unrecoverable backend failure fails the
/// whole case; no partial report is produced.
inline FeedbackReport run_case(const Reading& teacher, const Reading& student, ChatBackend* backend,
                               const AgentConfig& cfg, const CaseContext& ctx = {}) {
    const auto start = std::chrono::steady_clock::now();
    const std::string key = ctx.case_key.empty() ? teacher.session.case_id : ctx.case_key;
    PrincipalResult p = run_principal(teacher, student, backend, cfg, key);
    if (ctx.plan_out) *ctx.plan_out = p.plan;

    const auto& tasks = p.plan.tasks;
    std::vector<PetVerdict> verdicts(tasks.size());
    std::vector<double> spent(tasks.size(), 0.0);
    if (cfg.communication) {
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const std::string bulletin = render_bulletin(std::span(verdicts).first(i));
            verdicts[i] = run_pet(tasks[i], p.teacher, p.student, backend, cfg, bulletin, key, &spent[i]);
        }
    } else if (!tasks.empty()) {
        std::vector<std::vector<std::size_t>> slots(p.plan.n_agents);
        for (std::size_t i = 0; i < tasks.size(); ++i) slots[tasks[i].agent_slot].push_back(i);
        const std::size_t width = cfg.max_parallel_agents ? cfg.max_parallel_agents : p.plan.n_agents;
        parallel_for(slots.size(), width, [&](std::size_t s) {
            for (std::size_t i : slots[s])
                verdicts[i] = run_pet(tasks[i], p.teacher, p.student, backend, cfg, {}, key, &spent[i]);
        });
    }

    FeedbackReport report = consolidate(verdicts, p.assessment,
                                        cfg.mode == PetMode::llm ? VerdictMerge::majority : VerdictMerge::evidence,
                                        cfg.thresholds);
    report.case_id = teacher.session.case_id;
    report.variant_id = ctx.variant_id;

    if (ctx.log) {
        double backend_total = p.backend_ms;
        for (double s : spent) backend_total += s;
        const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        ctx.log->record_case(key, std::max(0.0, wall - backend_total));
    }
    return report;
}

inline ordered_json to_json(const Evidence& e) {
    ordered_json j = {{"overlap_fixations", e.overlap_fixations},
                      {"student_dwell_ms", e.student_dwell_ms},
                      {"teacher_dwell_ms", e.teacher_dwell_ms}};
    if (e.dwell_ratio) j["dwell_ratio"] = *e.dwell_ratio;
    return j;
}

inline ordered_json to_json(const PetVerdict& v) {
    return {{"task_id", v.task_id},
            {"missed_finding_label", v.missed_finding_label},
            {"student_pool", v.pool.name()},
            {"error_type", to_string(v.error_type)},
            {"rationale", v.rationale},
            {"evidence", to_json(v.evidence)}};
}

inline ordered_json to_json(const FeedbackReport& r) {
    ordered_json j = {{"schema_version", r.schema_version}, {"case_id", r.case_id}};
    if (r.variant_id) j["variant_id"] = *r.variant_id;
    j["assessment"] = to_json(r.assessment);
    ordered_json per = ordered_json::object();
    for (const auto& f : r.per_finding)
        per[f.label] = {{"error_type", to_string(f.error_type)},
                        {"rationale", f.rationale},
                        {"evidence", to_json(f.evidence)},
                        {"verdicts", f.verdict_count}};
    j["per_finding"] = std::move(per);
    ordered_json types = ordered_json::array();
    for (auto t : r.consolidated_error_types) types.push_back(to_string(t));
    j["consolidated_error_types"] = std::move(types);
    return j;
}

inline std::string serialize(const FeedbackReport& r) { return to_json(r).dump(2) + "\n"; }

} // namespace gazecoach
