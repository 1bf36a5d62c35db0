// Randomized invariants. Each property runs a fixed number of seeded trials so
// failures are reproducible from the printed seed.

#include <gtest/gtest.h>

#include "support.hpp"

using namespace gazecoach;
using namespace gazecoach::testing;

namespace {

constexpr int kTrials = 200;

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return n == 0 ? 0 : rng() % n; }

std::vector<std::size_t> all_nodes(const ThoughtGraph& g) {
    std::vector<std::size_t> out = g.residual;
    for (const auto& s : g.subgraphs) out.insert(out.end(), s.nodes.begin(), s.nodes.end());
    std::sort(out.begin(), out.end());
    return out;
}

PetVerdict random_verdict(std::mt19937_64& rng, std::size_t id, const std::vector<std::string>& labels) {
    PetVerdict v;
    v.task_id = id;
    // the first labels.size() verdicts cover every missed finding once
    v.missed_finding_label = id < labels.size() ? labels[id] : labels[pick(rng, labels.size())];
    v.pool = pick(rng, 3) == 0 ? StudentPool::residual() : StudentPool::subgraph("s" + std::to_string(pick(rng, 4)));
    v.error_type = static_cast<ErrorType>(pick(rng, 4));
    const std::int64_t overlap = static_cast<std::int64_t>(pick(rng, 3));
    v.evidence = Evidence::of(overlap, overlap ? static_cast<std::int64_t>(pick(rng, 900)) : 0,
                              static_cast<std::int64_t>(1 + pick(rng, 1000)));
    v.rationale = "r" + std::to_string(id);
    return v;
}

} // namespace

TEST(Property, SessionRoundTrip) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const Reading r = random_reading(rng);
        const GazeSession s = parse_session(serialize(r.session));
        EXPECT_EQ(s, r.session) << "seed " << seed;
        EXPECT_EQ(serialize(s), serialize(r.session)) << "seed " << seed;
        EXPECT_EQ(parse_transcript(serialize(r.transcript)), r.transcript) << "seed " << seed;
    }
}

TEST(Property, ParsedSessionSortedStably) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        Reading r = random_reading(rng);
        // tag each fixation with its original position through the duration
        std::vector<Fixation> fx = r.session.fixations;
        for (std::size_t i = 0; i < fx.size(); ++i) fx[i].onset_ms = static_cast<std::int64_t>(pick(rng, 5)) * 100;
        for (std::size_t i = 0; i < fx.size(); ++i) fx[i].duration_ms = static_cast<std::int64_t>(i + 1);
        r.session.fixations = fx;
        const auto parsed = parse_session(serialize(r.session)).fixations;
        ASSERT_EQ(parsed.size(), fx.size());
        for (std::size_t i = 1; i < parsed.size(); ++i) {
            ASSERT_LE(parsed[i - 1].onset_ms, parsed[i].onset_ms) << "seed " << seed;
            if (parsed[i - 1].onset_ms == parsed[i].onset_ms) {
                EXPECT_LT(parsed[i - 1].duration_ms, parsed[i].duration_ms) << "seed " << seed;
            }
        }
    }
}

TEST(Property, MappingPartitionsFixations) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const Reading r = random_reading(rng);
        const std::int64_t tol = static_cast<std::int64_t>(pick(rng, 4)) * 100;
        const ThoughtGraph g = build_thought_graph(r, tol);
        std::vector<std::size_t> expect(r.session.fixations.size());
        std::iota(expect.begin(), expect.end(), 0);
        EXPECT_EQ(all_nodes(g), expect) << "seed " << seed;
        EXPECT_EQ(g.labels(), r.transcript.finding_labels()) << "seed " << seed;
        for (const auto& s : g.subgraphs) EXPECT_TRUE(std::is_sorted(s.nodes.begin(), s.nodes.end()));
    }
}

TEST(Property, PathEdgesPerSubgraph) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const ThoughtGraph g = build_thought_graph(random_reading(rng));
        std::set<std::pair<std::size_t, std::size_t>> expect, got;
        std::size_t count = 0;
        for (const auto& s : g.subgraphs) {
            for (std::size_t i = 1; i < s.nodes.size(); ++i) expect.insert({s.nodes[i - 1], s.nodes[i]});
            count += s.nodes.empty() ? 0 : s.nodes.size() - 1;
        }
        for (const auto& e : g.edges) got.insert({e.from, e.to});
        EXPECT_EQ(g.edges.size(), count) << "seed " << seed;
        EXPECT_EQ(got, expect) << "seed " << seed;
    }
}

TEST(Property, GraphIgnoresInputOrder) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const Reading r = random_reading(rng);
        Reading shuffled = r;
        // distinct onsets keep the sorted order unique
        for (std::size_t i = 0; i < shuffled.session.fixations.size(); ++i)
            shuffled.session.fixations[i].onset_ms = static_cast<std::int64_t>(i) * 37;
        Reading sorted = shuffled;
        std::shuffle(shuffled.session.fixations.begin(), shuffled.session.fixations.end(), rng);
        std::shuffle(shuffled.transcript.sentences.begin(), shuffled.transcript.sentences.end(), rng);
        const Reading reparsed{parse_session(serialize(shuffled.session)),
                               parse_transcript(serialize(shuffled.transcript))};
        EXPECT_EQ(build_thought_graph(reparsed), build_thought_graph(sorted)) << "seed " << seed;
    }
}

TEST(Property, SelfDiffIsEmpty) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const Reading r = random_reading(rng);
        const ThoughtGraph g = build_thought_graph(r);
        const ThoughtGraph s = build_thought_graph(as_student(r));
        const auto d = diff_findings(g, s, FindingMatcher::exact());
        EXPECT_TRUE(d.missed.empty() && d.extra.empty()) << "seed " << seed;
        const auto a = assess(g, s, FindingMatcher::exact());
        EXPECT_EQ(a.c_error, 0u);
        EXPECT_EQ(a.n_agents, 0u);
        EXPECT_EQ(run_case(r, as_student(r), nullptr, {}).consolidated_error_types, std::vector<ErrorType>{});
    }
}

TEST(Property, ComplexityMonotoneAndBounded) {
    for (std::size_t ns = 0; ns < 12; ++ns) {
        std::size_t prev = 0;
        for (std::size_t nt = ns; nt < ns + 12; ++nt) {
            const auto ec = error_complexity(nt, ns);
            EXPECT_GE(ec.c_error, prev);
            EXPECT_EQ(ec.c_error, (nt - ns) * ns);
            prev = ec.c_error;
            for (std::size_t missed = 0; missed <= nt; ++missed)
                for (std::optional<std::size_t> cap : {std::optional<std::size_t>{}, std::optional<std::size_t>{3}}) {
                    const auto c = agent_count(ec.c_error, missed, {AgentPolicyKind::by_complexity, cap});
                    const auto m = agent_count(ec.c_error, missed, {AgentPolicyKind::by_error_count, cap});
                    EXPECT_LE(c, ec.c_error);
                    EXPECT_LE(m, missed);
                    if (cap) {
                        EXPECT_LE(std::max(c, m), *cap);
                    }
                    if (ec.c_error == 0) {
                        EXPECT_EQ(c + m, 0u);
                    }
                }
        }
    }
}

TEST(Property, PlanDeterministicAndComplete) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const Reading t = random_expert(rng, "plan", 2 + pick(rng, 5));
        const auto labels = t.transcript.finding_labels();
        std::vector<std::string> drop;
        for (const auto& l : labels)
            if (pick(rng, 3) == 0) drop.push_back(l);
        if (drop.empty()) drop.push_back(labels.front());
        const SyntheticCase sc = synthesize(t, drop, static_cast<ErrorType>(pick(rng, 2)));
        const AgentPolicy policy{pick(rng, 2) ? AgentPolicyKind::by_complexity : AgentPolicyKind::by_error_count,
                                 pick(rng, 2) ? std::optional<std::size_t>{} : std::optional<std::size_t>{2}};
        const auto tg = build_thought_graph(t), sg = build_thought_graph(sc.student);
        const auto a = assess(tg, sg, FindingMatcher::exact(), policy);
        const auto p1 = plan_comparisons(a, tg, sg), p2 = plan_comparisons(a, tg, sg);
        EXPECT_EQ(to_json(p1).dump(), to_json(p2).dump()) << "seed " << seed;
        if (a.n_agents == 0) {
            EXPECT_TRUE(p1.tasks.empty());
            continue;
        }
        const std::size_t pools = sg.n() + (sg.residual.empty() ? 0 : 1);
        EXPECT_EQ(p1.tasks.size(), a.missed.size() * std::max<std::size_t>(pools, 1)) << "seed " << seed;
        for (std::size_t i = 0; i < p1.tasks.size(); ++i) {
            EXPECT_EQ(p1.tasks[i].task_id, i);
            EXPECT_LT(p1.tasks[i].agent_slot, a.n_agents);
        }
    }
}

TEST(Property, ConsolidateIgnoresVerdictOrder) {
    const std::vector<std::string> labels{"a", "b", "c"};
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<PetVerdict> vs;
        const std::size_t n = labels.size() + pick(rng, 9);
        for (std::size_t i = 0; i < n; ++i) vs.push_back(random_verdict(rng, i, labels));
        const auto a = assess_counts(5, 2, labels, {}, {});
        for (auto merge : {VerdictMerge::evidence, VerdictMerge::majority}) {
            const std::string base = serialize(consolidate(vs, a, merge));
            EXPECT_EQ(serialize(consolidate(vs, a, merge)), base);
            auto shuffled = vs;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            EXPECT_EQ(serialize(consolidate(shuffled, a, merge)), base) << "seed " << seed;
        }
    }
}

TEST(Property, ConsolidatedTypesAreUnionOfPerFinding) {
    const std::vector<std::string> labels{"a", "b", "c", "d"};
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<PetVerdict> vs;
        for (std::size_t i = 0; i < 8; ++i) vs.push_back(random_verdict(rng, i, labels));
        const auto r = consolidate(vs, assess_counts(6, 2, labels, {}, {}), VerdictMerge::majority);
        std::vector<ErrorType> expect;
        for (auto l : kErrorLabels)
            for (const auto& f : r.per_finding)
                if (f.error_type == l) {
                    expect.push_back(l);
                    break;
                }
        EXPECT_EQ(r.consolidated_error_types, expect) << "seed " << seed;
    }
}

TEST(Property, SynthesisTouchesOnlyTheTarget) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        const Reading e = random_expert(rng, "inv", 2 + pick(rng, 5));
        const auto tg = build_thought_graph(e);
        const auto type = static_cast<ErrorType>(pick(rng, 3));
        const auto eligible = eligible_findings(e, type, expert_synth());
        ASSERT_FALSE(eligible.empty());
        const std::string target = eligible[pick(rng, eligible.size())];
        const SyntheticCase sc = synthesize(e, {target}, type, expert_synth());
        const auto sg = build_thought_graph(sc.student);

        const auto d = diff_findings(tg, sg, FindingMatcher::exact());
        EXPECT_EQ(d.missed, std::vector<std::string>{target}) << "seed " << seed;
        for (const auto& sub : tg.subgraphs) {
            if (sub.label == target) continue;
            std::vector<Fixation> before, after;
            for (auto i : sub.nodes) before.push_back(tg.nodes[i]);
            for (auto i : sg.at(sub.label).nodes) after.push_back(sg.nodes[i]);
            EXPECT_EQ(before, after) << "seed " << seed << " " << sub.label;
        }
        const auto r = run_case(e, sc.student, nullptr, {});
        EXPECT_EQ(r.consolidated_error_types, std::vector<ErrorType>{type}) << "seed " << seed << " " << target;
    }
}

TEST(Property, MetricsMatchBruteForce) {
    for (int seed = 0; seed < kTrials; ++seed) {
        std::mt19937_64 rng(seed);
        LabelMatrix m;
        const std::size_t n = 1 + pick(rng, 12);
        for (std::size_t i = 0; i < n; ++i) {
            m.cases.push_back(std::to_string(i));
            std::vector<std::uint8_t> t(3), p(3);
            for (int k = 0; k < 3; ++k) {
                t[k] = rng() & 1;
                p[k] = rng() & 1;
            }
            m.y_true.push_back(t);
            m.y_pred.push_back(p);
        }
        double exact = 0, wrong = 0, prec = 0, rec = 0, f1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            exact += m.y_true[i] == m.y_pred[i];
            for (int k = 0; k < 3; ++k) wrong += m.y_true[i][k] != m.y_pred[i][k];
        }
        for (int k = 0; k < 3; ++k) {
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tp += m.y_true[i][k] && m.y_pred[i][k];
                fp += !m.y_true[i][k] && m.y_pred[i][k];
                fn += m.y_true[i][k] && !m.y_pred[i][k];
            }
            const double p = tp + fp ? tp / (tp + fp) : 0, r = tp + fn ? tp / (tp + fn) : 0;
            prec += p;
            rec += r;
            f1 += p + r ? 2 * p * r / (p + r) : 0;
        }
        const auto s = score(m);
        EXPECT_NEAR(s.subset_accuracy, exact / n, 1e-12) << "seed " << seed;
        EXPECT_NEAR(s.hamming_loss, wrong / (3.0 * n), 1e-12) << "seed " << seed;
        EXPECT_NEAR(s.macro_precision, prec / 3, 1e-12) << "seed " << seed;
        EXPECT_NEAR(s.macro_recall, rec / 3, 1e-12) << "seed " << seed;
        EXPECT_NEAR(s.macro_f1, f1 / 3, 1e-12) << "seed " << seed;
    }
}

// Exact fractions computed independently from this matrix and frozen.
TEST(Property, FrozenSixByThree) {
    LabelMatrix m;
    m.cases = {"0", "1", "2", "3", "4", "5"};
    m.y_true = {{1, 1, 0}, {0, 0, 1}, {0, 0, 1}, {1, 0, 0}, {1, 1, 0}, {0, 1, 1}};
    m.y_pred = {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}};
    const auto s = score(m);
    EXPECT_NEAR(s.subset_accuracy, 1.0 / 6, 1e-15);
    EXPECT_NEAR(s.hamming_loss, 1.0 / 2, 1e-15);
    EXPECT_NEAR(s.macro_precision, 1.0 / 2, 1e-15);
    EXPECT_NEAR(s.macro_recall, 4.0 / 9, 1e-15);
    EXPECT_NEAR(s.macro_f1, 7.0 / 15, 1e-15);
}
