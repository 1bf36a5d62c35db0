#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "gazecoach/gazecoach.hpp"

namespace gazecoach::testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return GAZECOACH_DATA_DIR; }
inline fs::path test_data_dir() { return GAZECOACH_TEST_DATA_DIR; }

inline Sentence finding(std::int64_t index, std::int64_t begin, std::int64_t end, std::string label) {
    return {index, "Sentence about " + label + ".", begin, end, std::move(label)};
}

inline Sentence narration(std::int64_t index, std::int64_t begin, std::int64_t end) {
    return {index, "Narration.", begin, end, std::nullopt};
}

inline Reading make_reading(std::string case_id, ReaderRole role, std::vector<Fixation> fx,
                            std::vector<Sentence> sentences) {
    Reading r;
    r.session = {case_id, role, std::move(fx)};
    r.transcript = {std::move(case_id), role, std::move(sentences)};
    return r;
}

/// Windows [0,1000] and [2000,3000]; midpoints 200, 1050, 1600, 2050, 3000, 3150.
inline Reading mapping_fixture() {
    return make_reading("fx-map", ReaderRole::teacher,
                        {{0.1, 0.1, 100, 200},
                         {0.2, 0.2, 900, 300},
                         {0.3, 0.3, 1500, 200},
                         {0.4, 0.4, 1950, 200},
                         {0.5, 0.5, 2600, 800},
                         {0.6, 0.6, 3100, 100}},
                        {finding(0, 0, 1000, "a"), finding(1, 2000, 3000, "b")});
}

/// One reading per call, readers with `labels.size()` findings, one fixation
/// each. Cheap stand-in when only the counts matter.
inline Reading count_reading(const std::string& case_id, ReaderRole role, const std::vector<std::string>& labels) {
    Reading r;
    r.session = {case_id, role, {}};
    r.transcript = {case_id, role, {}};
    for (std::size_t k = 0; k < labels.size(); ++k) {
        const auto t0 = static_cast<std::int64_t>(k) * 1000;
        r.session.fixations.push_back({0.1 + 0.8 * static_cast<double>(k % 5) / 5.0, 0.5, t0 + 100, 201});
        r.transcript.sentences.push_back(finding(static_cast<std::int64_t>(k), t0, t0 + 800, labels[k]));
    }
    return r;
}

inline std::vector<std::string> labels_range(const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

/// Expert reading with well separated findings: each finding's fixations
/// sit inside its sentence window and cluster tightly; a residual glance
/// follows every window.
inline Reading random_expert(std::mt19937_64& rng, const std::string& case_id, std::size_t n_findings) {
    std::uniform_real_distribution<double> jitter(-0.03, 0.03);
    std::uniform_int_distribution<int> fx_count(1, 5);
    std::uniform_int_distribution<int> half_dur(100, 190);
    static constexpr double grid[][2] = {{0.15, 0.15}, {0.5, 0.15}, {0.85, 0.15}, {0.15, 0.85},
                                         {0.5, 0.85},  {0.85, 0.85}, {0.15, 0.5}, {0.85, 0.5}};
    Reading r = make_reading(case_id, ReaderRole::teacher, {}, {});
    for (std::size_t k = 0; k < n_findings; ++k) {
        const auto t0 = static_cast<std::int64_t>(k) * 3000;
        const int m = fx_count(rng);
        for (int j = 0; j < m; ++j)
            r.session.fixations.push_back({grid[k % 8][0] + jitter(rng), grid[k % 8][1] + jitter(rng),
                                           t0 + 100 + 350 * j, 2 * half_dur(rng) + 1});
        r.session.fixations.push_back({0.5 + jitter(rng), 0.5 + jitter(rng), t0 + 2300, 151});
        r.transcript.sentences.push_back(finding(static_cast<std::int64_t>(k), t0, t0 + 2000,
                                                 "finding " + std::string(1, static_cast<char>('a' + k))));
    }
    r.transcript.sentences.push_back(narration(static_cast<std::int64_t>(n_findings),
                                               static_cast<std::int64_t>(n_findings) * 3000,
                                               static_cast<std::int64_t>(n_findings) * 3000 + 500));
    return r;
}

/// Narration distractors for the labels random_expert() produces.
inline const DistractorTable& expert_distractors() {
    static const DistractorTable table = [] {
        DistractorTable t;
        for (char c = 'a'; c <= 'h'; ++c) t["finding " + std::string(1, c)] = {"Region looks normal.", std::nullopt};
        return t;
    }();
    return table;
}

inline SynthOptions expert_synth() { return {0, &expert_distractors()}; }

/// Arbitrary, possibly messy reading: overlapping fixation onsets, windows
/// with gaps, some unlabeled sentences.
inline Reading random_reading(std::mt19937_64& rng, const std::string& case_id = "rand") {
    std::uniform_int_distribution<int> nfx(0, 25), nsent(0, 6), coin(0, 3);
    std::uniform_int_distribution<std::int64_t> onset(0, 20000), dur(1, 900), len(100, 3000), gap(0, 800);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    Reading r = make_reading(case_id, ReaderRole::teacher, {}, {});
    const int f = nfx(rng);
    for (int i = 0; i < f; ++i) r.session.fixations.push_back({coord(rng), coord(rng), onset(rng), dur(rng)});
    std::stable_sort(r.session.fixations.begin(), r.session.fixations.end(),
                     [](const Fixation& a, const Fixation& b) { return a.onset_ms < b.onset_ms; });
    std::int64_t t = gap(rng);
    const int s = nsent(rng);
    for (int i = 0; i < s; ++i) {
        const std::int64_t l = len(rng);
        if (coin(rng) == 0) r.transcript.sentences.push_back(narration(i, t, t + l));
        else r.transcript.sentences.push_back(finding(i, t, t + l, "f" + std::to_string(i)));
        t += l + gap(rng);
    }
    return r;
}

inline Reading as_student(Reading r) {
    r.session.reader_role = ReaderRole::student;
    r.transcript.reader_role = ReaderRole::student;
    return r;
}

/// Script that answers every PET prompt of a case with the type the local
/// evidence ladder gives for the whole finding, keyed by request digest.
/// Several replies come wrapped in prose or code fences.
inline std::vector<ScriptEntry> oracle_script(const Reading& teacher, const Reading& student, const AgentConfig& cfg,
                                              const std::string& case_key) {
    AgentConfig local = cfg;
    local.mode = PetMode::reference;
    const PrincipalResult p = run_principal(teacher, student, nullptr, local, case_key);
    std::map<std::string, std::vector<Evidence>> per;
    for (const auto& t : p.plan.tasks) {
        const auto v = run_pet(t, p.teacher, p.student, nullptr, local);
        per[t.missed_finding_label].push_back(v.evidence);
    }
    std::vector<ScriptEntry> out;
    for (const auto& t : p.plan.tasks) {
        const ErrorType type = classify_evidence(merge_evidence(per[t.missed_finding_label]), cfg.thresholds);
        const std::string reply_json = nlohmann::json{{"error_type", to_string(type)},
                                                      {"rationale", "Pool " + t.pool.name() + " reviewed."}}
                                           .dump();
        std::string reply;
        switch (t.task_id % 3) {
        case 0: reply = reply_json; break;
        case 1: reply = "Step by step: the pool was compared.\n```json\n" + reply_json + "\n```"; break;
        default: reply = "Answer: " + reply_json + " (final)"; break;
        }
        const std::string prompt = render_pet_prompt(t, p.teacher, p.student, {});
        out.push_back({ScriptEntry::Kind::digest, sha256_hex(prompt), reply});
    }
    return out;
}

inline nlohmann::json script_json(const std::vector<ScriptEntry>& entries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) {
        const char* kind = e.kind == ScriptEntry::Kind::digest ? "digest"
                           : e.kind == ScriptEntry::Kind::prefix ? "prefix"
                                                                 : "contains";
        arr.push_back({{"kind", kind}, {"match", e.match}, {"reply", e.reply}});
    }
    return arr;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) { return read_file(p); }

} // namespace gazecoach::testing
