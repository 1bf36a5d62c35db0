#pragma once

// Error complexity and the comparison plan that feeds the PET agents.
//
//   delta_n = |n_teacher - n_student|
//   c_error = delta_n * n_student
//   n_agents = min(c_error, cap)          (by_complexity)
//            = min(|missed|, cap)         (by_error_count)
//   and n_agents = 0 whenever c_error = 0.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gazecoach/thought_graph.hpp"

namespace gazecoach {

enum class AgentPolicyKind { by_error_count, by_complexity };

inline std::string to_string(AgentPolicyKind k) {
    return k == AgentPolicyKind::by_complexity ? "by_complexity" : "by_error_count";
}

inline std::optional<AgentPolicyKind> parse_policy_kind(std::string_view s) {
    if (s == "by_complexity") return AgentPolicyKind::by_complexity;
    if (s == "by_error_count") return AgentPolicyKind::by_error_count;
    return std::nullopt;
}

struct AgentPolicy {
    AgentPolicyKind kind = AgentPolicyKind::by_complexity;
    std::optional<std::size_t> agent_cap;

    bool operator==(const AgentPolicy&) const = default;
};

struct ComplexityAssessment {
    std::size_t n_teacher = 0;
    std::size_t n_student = 0;
    std::size_t delta_n = 0;
    std::size_t c_error = 0;
    std::size_t n_agents = 0;
    std::vector<std::string> missed;
    std::vector<std::string> extra;
    AgentPolicy policy;

    bool operator==(const ComplexityAssessment&) const = default;
};

struct ErrorComplexity {
    std::size_t delta_n = 0;
    std::size_t c_error = 0;
};

inline ErrorComplexity error_complexity(std::size_t n_teacher, std::size_t n_student) {
    const std::size_t delta = n_teacher > n_student ? n_teacher - n_student : n_student - n_teacher;
    return {delta, delta * n_student};
}

inline std::size_t agent_count(std::size_t c_error, std::size_t missed_count, const AgentPolicy& policy) {
    if (c_error == 0) return 0;
    const std::size_t want = policy.kind == AgentPolicyKind::by_complexity ? c_error : missed_count;
    return std::min(want, policy.agent_cap.value_or(std::numeric_limits<std::size_t>::max()));
}

/// Assessment from counts and an already-diffed label list.
inline ComplexityAssessment assess_counts(std::size_t n_teacher, std::size_t n_student,
                                          std::vector<std::string> missed, std::vector<std::string> extra,
                                          const AgentPolicy& policy) {
    ComplexityAssessment a;
    a.n_teacher = n_teacher;
    a.n_student = n_student;
    const auto ec = error_complexity(n_teacher, n_student);
    a.delta_n = ec.delta_n;
    a.c_error = ec.c_error;
    a.n_agents = agent_count(a.c_error, missed.size(), policy);
    a.missed = std::move(missed);
    a.extra = std::move(extra);
    a.policy = policy;
    return a;
}

inline ComplexityAssessment assess(const ThoughtGraph& teacher, const ThoughtGraph& student,
                                   const FindingMatcher& matcher, const AgentPolicy& policy = {}) {
    if (teacher.case_id != student.case_id)
        throw ValidationError("case_id", "teacher case \"" + teacher.case_id + "\" does not match student case \"" +
                                             student.case_id + "\"");
    FindingDiff d = diff_findings(teacher, student, matcher);
    return assess_counts(teacher.n(), student.n(), std::move(d.missed), std::move(d.extra), policy);
}

/// Which slice of the student's gaze a comparison task looks at.
struct StudentPool {
    enum class Kind { subgraph, residual, empty };
    Kind kind = Kind::empty;
    std::string label; // subgraph only

    static StudentPool subgraph(std::string l) { return {Kind::subgraph, std::move(l)}; }
    static StudentPool residual() { return {Kind::residual, {}}; }
    static StudentPool empty() { return {Kind::empty, {}}; }

    /// Finding labels are lowercase, so the uppercase sentinels cannot collide.
    std::string name() const {
        switch (kind) {
        case Kind::subgraph: return label;
        case Kind::residual: return "RESIDUAL";
        case Kind::empty: break;
        }
        return "EMPTY";
    }

    bool operator==(const StudentPool&) const = default;
};

struct ComparisonTask {
    std::size_t task_id = 0;
    std::string missed_finding_label;
    StudentPool pool;
    std::size_t agent_slot = 0;

    bool operator==(const ComparisonTask&) const = default;
};

struct ComparisonPlan {
    std::vector<ComparisonTask> tasks;
    std::size_t n_agents = 0;

    bool operator==(const ComparisonPlan&) const = default;
};

/// Pairs every missed teacher finding with every student pool: each student
/// subgraph (empty ones included, they count toward n_student) plus the
/// residual pool when it holds fixations. With no pool at all a finding is
/// compared against an explicit EMPTY view.
inline ComparisonPlan plan_comparisons(const ComplexityAssessment& assessment, const ThoughtGraph& /*teacher*/,
                                       const ThoughtGraph& student) {
    ComparisonPlan plan;
    plan.n_agents = assessment.n_agents;
    if (assessment.n_agents == 0) return plan;

    std::vector<StudentPool> pools;
    for (const auto& sg : student.subgraphs) pools.push_back(StudentPool::subgraph(sg.label));
    if (!student.residual.empty()) pools.push_back(StudentPool::residual());
    if (pools.empty()) pools.push_back(StudentPool::empty());

    const bool per_finding = assessment.policy.kind == AgentPolicyKind::by_error_count;
    for (std::size_t m = 0; m < assessment.missed.size(); ++m) {
        for (const auto& pool : pools) {
            ComparisonTask t;
            t.task_id = plan.tasks.size();
            t.missed_finding_label = assessment.missed[m];
            t.pool = pool;
            t.agent_slot = (per_finding ? m : t.task_id) % plan.n_agents;
            plan.tasks.push_back(std::move(t));
        }
    }
    return plan;
}

inline ordered_json to_json(const AgentPolicy& p) {
    ordered_json j = {{"kind", to_string(p.kind)}};
    j["agent_cap"] = p.agent_cap ? ordered_json(*p.agent_cap) : ordered_json(nullptr);
    return j;
}

inline ordered_json to_json(const ComplexityAssessment& a) {
    return {{"n_teacher", a.n_teacher}, {"n_student", a.n_student}, {"delta_n", a.delta_n},
            {"c_error", a.c_error},     {"n_agents", a.n_agents},   {"missed", a.missed},
            {"extra", a.extra},         {"policy", to_json(a.policy)}};
}

inline ordered_json to_json(const ComparisonPlan& p) {
    ordered_json tasks = ordered_json::array();
    for (const auto& t : p.tasks)
        tasks.push_back({{"task_id", t.task_id},
                         {"missed_finding_label", t.missed_finding_label},
                         {"student_pool", t.pool.name()},
                         {"agent_slot", t.agent_slot}});
    return {{"n_agents", p.n_agents}, {"tasks", std::move(tasks)}};
}

} // namespace gazecoach
