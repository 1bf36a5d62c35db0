#include <gtest/gtest.h>

#include "support.hpp"

using namespace gazecoach;
using namespace gazecoach::testing;

namespace {

/// Finding "f" has four fixations (one of 400 ms, one of 1 ms); "g" has two.
Reading four_fixation_expert() {
    return make_reading("four", ReaderRole::teacher,
                        {{0.20, 0.20, 100, 400},
                         {0.21, 0.22, 600, 1},
                         {0.19, 0.21, 700, 301},
                         {0.22, 0.18, 1200, 250},
                         {0.50, 0.50, 2100, 200},
                         {0.80, 0.80, 3100, 300},
                         {0.81, 0.79, 3500, 200}},
                        {narration(0, 0, 50), finding(1, 50, 2000, "f"), finding(2, 3000, 4000, "g")});
}

Reading two_finding_expert() {
    return make_reading("pair", ReaderRole::teacher,
                        {{0.2, 0.2, 100, 301}, {0.8, 0.8, 1100, 351}},
                        {finding(0, 0, 1000, "cardiomegaly"), finding(1, 1000, 2000, "pleural effusion")});
}

} // namespace

TEST(SynthMissedFixation, RemovesFixationsAndSentence) {
    const Reading e = four_fixation_expert();
    const SyntheticCase c = synth_missed_fixation(e, "f");
    EXPECT_EQ(c.student.session.fixations.size(), e.session.fixations.size() - 4);
    EXPECT_EQ(c.student.transcript.finding_labels(), (std::vector<std::string>{"g"}));
    EXPECT_EQ(c.student.session.reader_role, ReaderRole::student);
    EXPECT_EQ(c.variant_id, "four__mf__f");
    EXPECT_EQ(c.ground_truth(), (std::vector<InjectedError>{{"f", ErrorType::missed_fixation}}));

    const auto d = diff_findings(build_thought_graph(e), build_thought_graph(c.student), FindingMatcher::exact());
    EXPECT_EQ(d.missed, (std::vector<std::string>{"f"}));
    EXPECT_TRUE(d.extra.empty());

    const std::vector<Fixation> rest(e.session.fixations.begin() + 4, e.session.fixations.end());
    EXPECT_EQ(c.student.session.fixations, rest);
}

TEST(SynthReducedFixation, HalvesWithFloorAndMinimum) {
    const Reading e = four_fixation_expert();
    const SyntheticCase c = synth_reduced_fixation(e, "f");
    const auto& fx = c.student.session.fixations;
    ASSERT_EQ(fx.size(), e.session.fixations.size());
    EXPECT_EQ(fx[0].duration_ms, 200);
    EXPECT_EQ(fx[1].duration_ms, 1);
    EXPECT_EQ(fx[2].duration_ms, 150);
    EXPECT_EQ(fx[3].duration_ms, 125);
    for (std::size_t i = 4; i < fx.size(); ++i) EXPECT_EQ(fx[i], e.session.fixations[i]);
    EXPECT_EQ(c.variant_id, "four__bf__f");

    const auto m = map_fixations(c.student.session, c.student.transcript);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_NE(std::find(m.residual.begin(), m.residual.end(), i), m.residual.end()) << i;
}

TEST(SynthReducedFixation, EvenDurationsSitOnTheDwellBoundary) {
    // 200+1+150+125 = 476 is exactly half of 952, and the ladder compares strictly
    const Reading e = four_fixation_expert();
    const SyntheticCase c = synth_reduced_fixation(e, "f");
    const auto r = run_case(e, c.student, nullptr, {});
    EXPECT_EQ(r.consolidated_error_types, (std::vector<ErrorType>{ErrorType::knowledge_gap}));
}

TEST(SynthReducedFixation, OddDurationsClassifiedBrief) {
    Reading e = four_fixation_expert();
    for (auto& f : e.session.fixations) f.duration_ms |= 1;
    const SyntheticCase c = synth_reduced_fixation(e, "f");
    const auto r = run_case(e, c.student, nullptr, {});
    EXPECT_EQ(r.consolidated_error_types, (std::vector<ErrorType>{ErrorType::brief_fixation}));
}

TEST(SynthIncompleteKnowledge, KeepsGazeSwapsLabel) {
    const Reading e = four_fixation_expert();
    const DistractorTable table{{"f", {"A benign calcified granuloma.", "granuloma"}}};
    const SyntheticCase c = synth_incomplete_knowledge(e, "f", {0, &table});
    EXPECT_EQ(serialize(c.student.session), serialize(GazeSession{e.session.case_id, ReaderRole::student,
                                                                  e.session.fixations}));
    const auto t = build_thought_graph(e);
    const auto s = build_thought_graph(c.student);
    const auto d = diff_findings(t, s, FindingMatcher::exact());
    EXPECT_EQ(d.missed, (std::vector<std::string>{"f"}));
    EXPECT_EQ(d.extra, (std::vector<std::string>{"granuloma"}));
    EXPECT_EQ(c.student.transcript.sentences[1].text, "A benign calcified granuloma.");
    EXPECT_EQ(reference_classify(summarize_subgraph(t, "f"),
                                 pool_fixations(s, StudentPool::subgraph("granuloma"))),
              ErrorType::knowledge_gap);
}

TEST(SynthIncompleteKnowledge, NarrationDistractorLowersStudentCount) {
    const Reading e = four_fixation_expert();
    const DistractorTable table{{"f", {"Unremarkable.", std::nullopt}}};
    const SyntheticCase c = synth_incomplete_knowledge(e, "f", {0, &table});
    const auto r = run_case(e, c.student, nullptr, {});
    EXPECT_EQ(r.assessment.c_error, 1u);
    EXPECT_EQ(r.consolidated_error_types, (std::vector<ErrorType>{ErrorType::knowledge_gap}));
}

TEST(Synthesize, Errors) {
    const Reading e = four_fixation_expert();
    EXPECT_THROW(synth_missed_fixation(e, "nope"), SynthesisError);
    EXPECT_THROW(synthesize(e, {}, ErrorType::missed_fixation), SynthesisError);
    EXPECT_THROW(synthesize(e, {"f"}, ErrorType::none), SynthesisError);
    EXPECT_THROW(synthesize(e, {"f", "F"}, ErrorType::missed_fixation), SynthesisError);
    EXPECT_THROW(synth_incomplete_knowledge(e, "f", {0, nullptr}), SynthesisError);
    const DistractorTable clash{{"f", {"Also g.", "g"}}};
    EXPECT_THROW(synth_incomplete_knowledge(e, "f", {0, &clash}), SynthesisError);

    Reading empty = e;
    empty.transcript.sentences.push_back(finding(3, 5000, 6000, "h"));
    EXPECT_THROW(synth_missed_fixation(empty, "h"), SynthesisError);
    EXPECT_EQ(eligible_findings(empty, ErrorType::missed_fixation), (std::vector<std::string>{"f", "g"}));
}

TEST(Synthesize, VariantIdSanitized) {
    const Reading e = two_finding_expert();
    EXPECT_EQ(synth_missed_fixation(e, "pleural effusion").variant_id, "pair__mf__pleural-effusion");
}

TEST(Synthesize, MultipleFindings) {
    const Reading e = four_fixation_expert();
    const SyntheticCase c = synthesize(e, {"g", "f"}, ErrorType::missed_fixation);
    EXPECT_EQ(c.student.session.fixations.size(), 1u);
    EXPECT_TRUE(c.student.transcript.finding_labels().empty());
    EXPECT_EQ(c.variant_id, "four__mf__f__g");
    EXPECT_EQ(c.injected.size(), 2u);
}

TEST(EligibleFindings, KnowledgeNeedsDistractor) {
    const Reading e = two_finding_expert();
    EXPECT_EQ(eligible_findings(e, ErrorType::knowledge_gap),
              (std::vector<std::string>{"cardiomegaly", "pleural effusion"}));
    const DistractorTable partial{{"cardiomegaly", {"Normal heart.", std::nullopt}}};
    EXPECT_EQ(eligible_findings(e, ErrorType::knowledge_gap, {0, &partial}),
              (std::vector<std::string>{"cardiomegaly"}));
    const DistractorTable clash{{"cardiomegaly", {"Effusion.", "pleural effusion"}}};
    EXPECT_TRUE(eligible_findings(e, ErrorType::knowledge_gap, {0, &clash}).empty());
}

TEST(DistractorTable, Parse) {
    const auto t = parse_distractor_table(R"({"Nodule": {"text": "Granuloma.", "label": "Granuloma"},
                                              "effusion": "Angles sharp."})");
    EXPECT_EQ(t.at("nodule").label, "granuloma");
    EXPECT_FALSE(t.at("effusion").label);
    EXPECT_THROW(parse_distractor_table(R"({"x": 1})"), ValidationError);
    EXPECT_THROW(parse_distractor_table(R"({"x": {"text": "t", "label": ""}})"), ValidationError);
    EXPECT_THROW(parse_distractor_table("[]"), ValidationError);
}

TEST(GenerateCorpus, BalancedCounts) {
    CorpusOptions o;
    o.seed = 3;
    o.per_type_count = 5;
    const Corpus c = generate_corpus({two_finding_expert(), four_fixation_expert()}, [&] {
        auto x = o;
        static const DistractorTable t{{"cardiomegaly", {"Normal heart.", std::nullopt}},
                                       {"pleural effusion", {"Sharp angles.", std::nullopt}},
                                       {"f", {"Normal.", std::nullopt}}};
        x.synth.distractors = &t;
        return x;
    }());
    EXPECT_EQ(c.cases.size(), 15u);
    const auto m = c.manifest();
    for (const char* k : {"missed_fixation", "brief_fixation", "knowledge_gap"}) EXPECT_EQ(m["counts"][k], 5) << k;
    std::set<std::string> ids;
    for (const auto& sc : c.cases) EXPECT_TRUE(ids.insert(sc.variant_id).second) << sc.variant_id;
}

TEST(GenerateCorpus, SameSeedSameManifest) {
    CorpusOptions o;
    o.seed = 1234;
    o.per_type_count = 6;
    const std::vector<Reading> experts{two_finding_expert()};
    const auto a = generate_corpus(experts, o), b = generate_corpus(experts, o);
    EXPECT_EQ(a.manifest().dump(), b.manifest().dump());
    for (std::size_t i = 0; i < a.cases.size(); ++i) EXPECT_EQ(a.cases[i].student, b.cases[i].student);
}

TEST(GenerateCorpus, InjectedFindingsComeFromBase) {
    CorpusOptions o;
    o.seed = 77;
    o.per_type_count = 4;
    const Reading base = two_finding_expert();
    const auto labels = base.transcript.finding_labels();
    const auto c = generate_corpus({base}, o);
    for (const auto& entry : c.manifest()["cases"]) {
        EXPECT_EQ(entry["base_case_id"], "pair");
        for (const auto& inj : entry["injected"])
            EXPECT_NE(std::find(labels.begin(), labels.end(), inj["finding_label"].get<std::string>()), labels.end());
    }
}

TEST(GenerateCorpus, ManifestSorted) {
    CorpusOptions o;
    o.seed = 8;
    o.per_type_count = 7;
    const auto c = generate_corpus({two_finding_expert()}, o);
    for (std::size_t i = 1; i < c.cases.size(); ++i) {
        const auto& a = c.cases[i - 1];
        const auto& b = c.cases[i];
        EXPECT_LE(std::tie(a.base_case_id, a.injected[0].error_type, a.injected[0].finding_label),
                  std::tie(b.base_case_id, b.injected[0].error_type, b.injected[0].finding_label));
    }
}

TEST(GenerateCorpus, Errors) {
    CorpusOptions o;
    o.errors_per_case = 0;
    EXPECT_THROW(generate_corpus({two_finding_expert()}, o), SynthesisError);
    o.errors_per_case = 3;
    EXPECT_THROW(generate_corpus({two_finding_expert()}, o), SynthesisError);
    o.per_type_count = 0;
    EXPECT_TRUE(generate_corpus({two_finding_expert()}, o).cases.empty());
}

TEST(WriteCorpus, Layout) {
    TempDir dir("gc-corpus");
    CorpusOptions o;
    o.seed = 5;
    o.per_type_count = 2;
    const auto c = generate_corpus({two_finding_expert()}, o);
    write_corpus(c, dir.path());
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    for (const auto& sc : c.cases) {
        const auto d = dir / sc.variant_id;
        const Reading back = load_reading(d, "student");
        EXPECT_EQ(back, sc.student);
        const auto truth = nlohmann::json::parse(read_file(d / "truth.json"));
        EXPECT_EQ(truth_types(truth), (std::vector<ErrorType>{sc.injected[0].error_type}));
    }
}
