#pragma once

// Alignment of fixations to dictated findings and the finding-partitioned
// directed graphs built from that alignment.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gazecoach/gaze.hpp"

namespace gazecoach {

/// Node indices attached to one finding, in onset order.
struct FindingNodes {
    std::string label;
    std::vector<std::size_t> nodes;

    bool operator==(const FindingNodes&) const = default;
};

struct FixationMapping {
    std::vector<FindingNodes> findings; // transcript sentence order
    std::vector<std::size_t> residual;

    bool operator==(const FixationMapping&) const = default;
};

struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;

    bool operator==(const Edge&) const = default;
};

class UnknownFinding : public std::out_of_range {
public:
    explicit UnknownFinding(const std::string& label)
        : std::out_of_range("unknown finding \"" + label + "\"") {}
};

struct ThoughtGraph {
    std::string case_id;
    ReaderRole reader_role = ReaderRole::teacher;
    std::vector<Fixation> nodes; // node index == position in the session
    std::vector<Edge> edges;
    std::vector<FindingNodes> subgraphs;
    std::vector<std::size_t> residual;

    std::size_t n() const { return subgraphs.size(); }

    const FindingNodes* find(std::string_view label) const {
        for (const auto& s : subgraphs)
            if (s.label == label) return &s;
        return nullptr;
    }

    const FindingNodes& at(std::string_view label) const {
        if (const auto* s = find(label)) return *s;
        throw UnknownFinding(std::string(label));
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(subgraphs.size());
        for (const auto& s : subgraphs) out.push_back(s.label);
        return out;
    }

    bool operator==(const ThoughtGraph&) const = default;
};

inline void require_same_reading(const GazeSession& session, const Transcript& transcript) {
    if (session.case_id != transcript.case_id)
        throw ValidationError("case_id", "session case \"" + session.case_id +
                                             "\" does not match transcript case \"" +
                                             transcript.case_id + "\"");
    if (session.reader_role != transcript.reader_role)
        throw ValidationError("reader_role", "session role " + to_string(session.reader_role) +
                                                 " does not match transcript role " +
                                                 to_string(transcript.reader_role));
}

/// Assigns each fixation to the finding sentence whose window, widened by
/// `tolerance_ms` on both sides, contains the fixation midpoint. A midpoint in
/// several widened windows goes to the nearest window center, earlier
/// sentence on ties.
inline FixationMapping map_fixations(const GazeSession& session, const Transcript& transcript,
                                     std::int64_t tolerance_ms = 0) {
    require_same_reading(session, transcript);
    if (tolerance_ms < 0) throw std::invalid_argument("tolerance_ms must be nonnegative");

    struct Window {
        std::int64_t lo_x2, hi_x2, center_x2;
    };
    FixationMapping m;
    std::vector<Window> windows;
    for (const auto& s : transcript.sentences) {
        if (!s.finding_label) continue;
        m.findings.push_back({*s.finding_label, {}});
        windows.push_back({2 * (s.begin_ms - tolerance_ms), 2 * (s.end_ms + tolerance_ms),
                           s.begin_ms + s.end_ms});
    }

    for (std::size_t i = 0; i < session.fixations.size(); ++i) {
        const std::int64_t mid = session.fixations[i].midpoint_x2();
        std::optional<std::size_t> best;
        std::int64_t best_dist = 0;
        for (std::size_t w = 0; w < windows.size(); ++w) {
            if (mid < windows[w].lo_x2 || mid > windows[w].hi_x2) continue;
            std::int64_t dist = mid > windows[w].center_x2 ? mid - windows[w].center_x2
                                                           : windows[w].center_x2 - mid;
            if (!best || dist < best_dist) {
                best = w;
                best_dist = dist;
            }
        }
        if (best) m.findings[*best].nodes.push_back(i);
        else m.residual.push_back(i);
    }
    return m;
}

inline ThoughtGraph build_thought_graph(const GazeSession& session, const Transcript& transcript,
                                        std::int64_t tolerance_ms = 0) {
    FixationMapping m = map_fixations(session, transcript, tolerance_ms);
    ThoughtGraph g;
    g.case_id = session.case_id;
    g.reader_role = session.reader_role;
    g.nodes = session.fixations;
    g.subgraphs = std::move(m.findings);
    g.residual = std::move(m.residual);
    for (const auto& sg : g.subgraphs)
        for (std::size_t k = 1; k < sg.nodes.size(); ++k) g.edges.push_back({sg.nodes[k - 1], sg.nodes[k]});
    return g;
}

inline ThoughtGraph build_thought_graph(const Reading& r, std::int64_t tolerance_ms = 0) {
    return build_thought_graph(r.session, r.transcript, tolerance_ms);
}

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

struct BoundingBox {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

    bool contains(const Point& p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }

    bool operator==(const BoundingBox&) const = default;
};

struct SubgraphSummary {
    std::string finding_label;
    std::size_t fixation_count = 0;
    std::int64_t total_dwell_ms = 0;
    std::optional<Point> centroid;          // duration-weighted
    std::optional<BoundingBox> bounding_box;
};

inline SubgraphSummary summarize_subgraph(const ThoughtGraph& graph, std::string_view finding_label) {
    const FindingNodes& sg = graph.at(finding_label);
    SubgraphSummary s;
    s.finding_label = sg.label;
    s.fixation_count = sg.nodes.size();
    if (sg.nodes.empty()) return s;

    double wx = 0.0, wy = 0.0;
    BoundingBox box{1.0, 1.0, 0.0, 0.0};
    for (std::size_t i : sg.nodes) {
        const Fixation& f = graph.nodes[i];
        s.total_dwell_ms += f.duration_ms;
        wx += f.x * static_cast<double>(f.duration_ms);
        wy += f.y * static_cast<double>(f.duration_ms);
        box.min_x = std::min(box.min_x, f.x);
        box.min_y = std::min(box.min_y, f.y);
        box.max_x = std::max(box.max_x, f.x);
        box.max_y = std::max(box.max_y, f.y);
    }
    const auto w = static_cast<double>(s.total_dwell_ms);
    // Clamp guards against rounding drifting the mean a ulp outside the box.
    s.centroid = Point{std::clamp(wx / w, box.min_x, box.max_x), std::clamp(wy / w, box.min_y, box.max_y)};
    s.bounding_box = box;
    return s;
}

/// Label equivalence between teacher and student findings.
class FindingMatcher {
public:
    using Predicate = std::function<bool(const std::string& teacher, const std::string& student)>;

    static FindingMatcher exact() {
        return FindingMatcher([](const std::string& t, const std::string& s) { return t == s; });
    }

    /// `synonyms` maps a label to its canonical form; both sides are
    /// canonicalized before comparison.
    static FindingMatcher with_synonyms(std::map<std::string, std::string> synonyms) {
        if (synonyms.empty()) return exact();
        return FindingMatcher([table = std::move(synonyms)](const std::string& t, const std::string& s) {
            auto canon = [&](const std::string& l) -> const std::string& {
                auto it = table.find(l);
                return it == table.end() ? l : it->second;
            };
            return canon(t) == canon(s);
        });
    }

    /// Explicit (teacher, student) pairs; nothing else matches.
    static FindingMatcher from_pairs(std::set<std::pair<std::string, std::string>> pairs) {
        return FindingMatcher([p = std::move(pairs)](const std::string& t, const std::string& s) {
            return p.count({t, s}) > 0;
        });
    }

    bool operator()(const std::string& teacher, const std::string& student) const {
        return pred_(teacher, student);
    }

private:
    explicit FindingMatcher(Predicate p) : pred_(std::move(p)) {}
    Predicate pred_;
};

/// Synonym table JSON: {"alias": "canonical", ...}; keys and values normalized.
inline std::map<std::string, std::string> parse_synonym_table(std::string_view raw) {
    const json doc = detail::parse_document(raw);
    if (!doc.is_object()) throw ValidationError("", "synonym table must be a JSON object");
    std::map<std::string, std::string> table;
    for (const auto& [k, v] : doc.items()) {
        if (!v.is_string()) throw ValidationError(k, "expected string");
        table[normalize_label(k)] = normalize_label(v.get<std::string>());
    }
    return table;
}

struct FindingDiff {
    std::vector<std::string> missed; // teacher order
    std::vector<std::string> extra;  // student order

    bool operator==(const FindingDiff&) const = default;
};

inline FindingDiff diff_findings(const ThoughtGraph& teacher, const ThoughtGraph& student,
                                 const FindingMatcher& matcher) {
    FindingDiff d;
    for (const auto& t : teacher.subgraphs) {
        bool hit = false;
        for (const auto& s : student.subgraphs) hit = hit || matcher(t.label, s.label);
        if (!hit) d.missed.push_back(t.label);
    }
    for (const auto& s : student.subgraphs) {
        bool hit = false;
        for (const auto& t : teacher.subgraphs) hit = hit || matcher(t.label, s.label);
        if (!hit) d.extra.push_back(s.label);
    }
    return d;
}

inline ordered_json to_json(const ThoughtGraph& g) {
    ordered_json nodes = ordered_json::array();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& f = g.nodes[i];
        nodes.push_back({{"id", i}, {"x", f.x}, {"y", f.y}, {"onset_ms", f.onset_ms}, {"duration_ms", f.duration_ms}});
    }
    ordered_json edges = ordered_json::array();
    for (const auto& e : g.edges) edges.push_back({e.from, e.to});
    ordered_json subgraphs = ordered_json::object();
    for (const auto& s : g.subgraphs) subgraphs[s.label] = s.nodes;
    return {{"case_id", g.case_id},
            {"reader_role", to_string(g.reader_role)},
            {"n", g.n()},
            {"nodes", std::move(nodes)},
            {"edges", std::move(edges)},
            {"subgraphs", std::move(subgraphs)},
            {"residual", g.residual}};
}

inline ordered_json to_json(const SubgraphSummary& s) {
    ordered_json j = {{"finding_label", s.finding_label},
                      {"fixation_count", s.fixation_count},
                      {"total_dwell_ms", s.total_dwell_ms}};
    if (s.centroid) j["centroid"] = {s.centroid->x, s.centroid->y};
    if (s.bounding_box)
        j["bounding_box"] = {{"min_x", s.bounding_box->min_x}, {"min_y", s.bounding_box->min_y},
                             {"max_x", s.bounding_box->max_x}, {"max_y", s.bounding_box->max_y}};
    return j;
}

} // namespace gazecoach
