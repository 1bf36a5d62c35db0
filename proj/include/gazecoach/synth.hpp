#pragma once

// Simulated trainee readings derived from expert readings by injecting one of
// three perceptual errors into chosen findings:
//   missed_fixation  the finding's fixations and its sentence are removed
//   brief_fixation   its fixation durations are halved (floor, min 1 ms) and
//                    its sentence is removed
//   knowledge_gap    gaze is untouched; its sentence is rewritten from a
//                    misinterpretation table
//
// Corpus sampling uses std::mt19937_64 seeded with the corpus seed. Draws
// happen in a fixed order (error type, then case ordinal) and are reduced to
// an index with `draw % n`, which is identical on every platform.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gazecoach/error_type.hpp"
#include "gazecoach/gaze.hpp"
#include "gazecoach/thought_graph.hpp"

namespace gazecoach {

struct InjectedError {
    std::string finding_label;
    ErrorType error_type = ErrorType::none;

    bool operator==(const InjectedError&) const = default;
};

struct SyntheticCase {
    std::string base_case_id;
    std::string variant_id;
    std::vector<InjectedError> injected; // also the multilabel ground truth
    Reading student;

    const std::vector<InjectedError>& ground_truth() const { return injected; }
};

/// Replacement for a misread finding. A null label turns the sentence into
/// narration, so the finding no longer counts as reported.
struct Distractor {
    std::string text;
    std::optional<std::string> label;

    bool operator==(const Distractor&) const = default;
};

using DistractorTable = std::map<std::string, Distractor>;

/// JSON: {"finding label": {"text": str, "label": str|null}, ...}; a bare
/// string value is shorthand for {"text": value, "label": null}.
inline DistractorTable parse_distractor_table(std::string_view raw) {
    const json doc = detail::parse_document(raw);
    if (!doc.is_object()) throw ValidationError("", "distractor table must be a JSON object");
    DistractorTable table;
    for (const auto& [key, v] : doc.items()) {
        Distractor d;
        if (v.is_string()) {
            d.text = v.get<std::string>();
        } else if (v.is_object()) {
            d.text = detail::get_string(v, key, "text");
            if (auto l = v.find("label"); l != v.end() && !l->is_null()) {
                if (!l->is_string()) throw ValidationError(key + ".label", "expected string or null");
                d.label = normalize_label(l->get<std::string>());
                if (d.label->empty()) throw ValidationError(key + ".label", "empty label");
            }
        } else {
            throw ValidationError(key, "expected string or object");
        }
        table[normalize_label(key)] = std::move(d);
    }
    return table;
}

/// Misreadings for common chest radiograph findings: each reports the region
/// as normal.
inline const DistractorTable& default_distractor_table() {
    static const DistractorTable table = {
        {"atelectasis", {"The lung bases are clear.", std::nullopt}},
        {"cardiomegaly", {"The heart size is within normal limits.", std::nullopt}},
        {"consolidation", {"No focal airspace opacity.", std::nullopt}},
        {"edema", {"The pulmonary vasculature is normal.", std::nullopt}},
        {"emphysema", {"Lung volumes are normal.", std::nullopt}},
        {"enlarged cardiomediastinum", {"The mediastinal contour is unremarkable.", std::nullopt}},
        {"fracture", {"The visualized osseous structures are intact.", std::nullopt}},
        {"hilar enlargement", {"The hila are normal in size.", std::nullopt}},
        {"lung nodule", {"No pulmonary nodules are seen.", std::nullopt}},
        {"lung opacity", {"The lungs are clear.", std::nullopt}},
        {"pleural effusion", {"The costophrenic angles are sharp.", std::nullopt}},
        {"pleural thickening", {"The pleural surfaces are smooth.", std::nullopt}},
        {"pneumonia", {"No focal consolidation to suggest infection.", std::nullopt}},
        {"pneumothorax", {"No pneumothorax.", std::nullopt}},
        {"support devices", {"No lines or tubes are present.", std::nullopt}},
    };
    return table;
}

class SynthesisError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SynthOptions {
    std::int64_t tolerance_ms = 0;
    const DistractorTable* distractors = &default_distractor_table();
};

namespace detail {

inline const FindingNodes* mapped_finding(const FixationMapping& m, const std::string& label) {
    for (const auto& f : m.findings)
        if (f.label == label) return &f;
    return nullptr;
}

inline std::string synth_code(ErrorType t) {
    switch (t) {
    case ErrorType::missed_fixation: return "mf";
    case ErrorType::brief_fixation: return "bf";
    case ErrorType::knowledge_gap: return "kg";
    case ErrorType::none: break;
    }
    throw SynthesisError("cannot synthesize error type none");
}

} // namespace detail

/// Applies `type` to every finding in `findings` at once.
inline SyntheticCase synthesize(const Reading& expert, const std::vector<std::string>& findings, ErrorType type,
                                const SynthOptions& opts = {}) {
    detail::synth_code(type);
    if (findings.empty()) throw SynthesisError("no findings to inject");
    const FixationMapping mapping = map_fixations(expert.session, expert.transcript, opts.tolerance_ms);

    std::set<std::size_t> target_fixations;
    std::set<std::string> targets;
    for (const auto& raw : findings) {
        const std::string label = normalize_label(raw);
        const FindingNodes* f = detail::mapped_finding(mapping, label);
        if (!f) throw SynthesisError("unknown finding \"" + label + "\" in case " + expert.session.case_id);
        if (f->nodes.empty())
            throw SynthesisError("finding \"" + label + "\" in case " + expert.session.case_id + " has no fixations");
        if (!targets.insert(label).second) throw SynthesisError("finding \"" + label + "\" listed twice");
        target_fixations.insert(f->nodes.begin(), f->nodes.end());
    }

    SyntheticCase out;
    out.base_case_id = expert.session.case_id;
    for (const auto& raw : findings) out.injected.push_back({normalize_label(raw), type});

    GazeSession& s = out.student.session;
    s.case_id = expert.session.case_id;
    s.reader_role = ReaderRole::student;
    for (std::size_t i = 0; i < expert.session.fixations.size(); ++i) {
        Fixation f = expert.session.fixations[i];
        if (target_fixations.count(i)) {
            if (type == ErrorType::missed_fixation) continue;
            if (type == ErrorType::brief_fixation) f.duration_ms = std::max<std::int64_t>(1, f.duration_ms / 2);
        }
        s.fixations.push_back(f);
    }

    Transcript& t = out.student.transcript;
    t.case_id = expert.transcript.case_id;
    t.reader_role = ReaderRole::student;
    std::set<std::string> remaining_labels;
    for (const auto& sen : expert.transcript.sentences)
        if (sen.finding_label && !targets.count(*sen.finding_label)) remaining_labels.insert(*sen.finding_label);
    for (const auto& sen : expert.transcript.sentences) {
        if (!sen.finding_label || !targets.count(*sen.finding_label)) {
            t.sentences.push_back(sen);
            continue;
        }
        if (type != ErrorType::knowledge_gap) continue;
        const Distractor* distractor = nullptr;
        if (opts.distractors)
            if (auto it = opts.distractors->find(*sen.finding_label); it != opts.distractors->end())
                distractor = &it->second;
        if (!distractor) throw SynthesisError("no distractor for finding \"" + *sen.finding_label + "\"");
        Sentence altered = sen;
        altered.text = distractor->text;
        altered.finding_label = distractor->label;
        if (altered.finding_label && !remaining_labels.insert(*altered.finding_label).second)
            throw SynthesisError("distractor label \"" + *altered.finding_label + "\" already present in case " +
                                 expert.session.case_id);
        t.sentences.push_back(std::move(altered));
    }

    std::string variant = out.base_case_id + "__" + detail::synth_code(type);
    for (const auto& l : targets) variant += "__" + l;
    for (char& ch : variant)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '-';
    out.variant_id = std::move(variant);
    return out;
}

inline SyntheticCase synth_missed_fixation(const Reading& expert, const std::string& finding,
                                           const SynthOptions& opts = {}) {
    return synthesize(expert, {finding}, ErrorType::missed_fixation, opts);
}

inline SyntheticCase synth_reduced_fixation(const Reading& expert, const std::string& finding,
                                            const SynthOptions& opts = {}) {
    return synthesize(expert, {finding}, ErrorType::brief_fixation, opts);
}

inline SyntheticCase synth_incomplete_knowledge(const Reading& expert, const std::string& finding,
                                                const SynthOptions& opts = {}) {
    return synthesize(expert, {finding}, ErrorType::knowledge_gap, opts);
}

/// Findings of `expert` that `type` can be injected into, in sentence order.
inline std::vector<std::string> eligible_findings(const Reading& expert, ErrorType type,
                                                  const SynthOptions& opts = {}) {
    const FixationMapping mapping = map_fixations(expert.session, expert.transcript, opts.tolerance_ms);
    std::vector<std::string> out;
    for (const auto& f : mapping.findings) {
        if (f.nodes.empty()) continue;
        if (type == ErrorType::knowledge_gap) {
            if (!opts.distractors) continue;
            auto it = opts.distractors->find(f.label);
            if (it == opts.distractors->end()) continue;
            if (it->second.label && mapping.findings.end() != std::find_if(mapping.findings.begin(),
                                                                           mapping.findings.end(),
                                                                           [&](const FindingNodes& o) {
                                                                               return o.label == *it->second.label;
                                                                           }))
                continue;
        }
        out.push_back(f.label);
    }
    return out;
}

struct CorpusOptions {
    std::uint64_t seed = 0;
    std::size_t per_type_count = 10;
    std::size_t errors_per_case = 1;
    SynthOptions synth;
};

struct Corpus {
    CorpusOptions options;
    std::vector<SyntheticCase> cases; // manifest order

    ordered_json manifest() const {
        ordered_json counts = ordered_json::object();
        for (auto t : kErrorLabels) {
            std::size_t n = 0;
            for (const auto& c : cases) n += c.injected.front().error_type == t;
            counts[to_string(t)] = n;
        }
        ordered_json entries = ordered_json::array();
        for (const auto& c : cases) {
            ordered_json inj = ordered_json::array();
            for (const auto& e : c.injected)
                inj.push_back({{"finding_label", e.finding_label}, {"error_type", to_string(e.error_type)}});
            entries.push_back(
                {{"variant_id", c.variant_id}, {"base_case_id", c.base_case_id}, {"injected", std::move(inj)}});
        }
        return {{"seed", options.seed},
                {"per_type_count", options.per_type_count},
                {"errors_per_case", options.errors_per_case},
                {"tolerance_ms", options.synth.tolerance_ms},
                {"counts", std::move(counts)},
                {"cases", std::move(entries)}};
    }
};

inline Corpus generate_corpus(const std::vector<Reading>& experts, const CorpusOptions& opts) {
    if (opts.errors_per_case == 0) throw SynthesisError("errors_per_case must be at least 1");
    std::mt19937_64 rng(opts.seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    struct Draw {
        std::size_t expert;
        ErrorType type;
        std::vector<std::string> findings;
        std::size_t ordinal;
    };
    std::vector<Draw> draws;
    for (ErrorType type : kErrorLabels) {
        std::vector<std::pair<std::size_t, std::vector<std::string>>> pool;
        for (std::size_t e = 0; e < experts.size(); ++e) {
            auto eligible = eligible_findings(experts[e], type, opts.synth);
            if (eligible.size() >= opts.errors_per_case) pool.emplace_back(e, std::move(eligible));
        }
        if (opts.per_type_count > 0 && pool.empty())
            throw SynthesisError("no expert case has " + std::to_string(opts.errors_per_case) +
                                 " eligible finding(s) for " + to_string(type));
        for (std::size_t k = 0; k < opts.per_type_count; ++k) {
            auto [expert, eligible] = pool[pick(pool.size())];
            // Partial Fisher-Yates: the first errors_per_case entries are the sample.
            for (std::size_t i = 0; i < opts.errors_per_case; ++i)
                std::swap(eligible[i], eligible[i + pick(eligible.size() - i)]);
            eligible.resize(opts.errors_per_case);
            draws.push_back({expert, type, std::move(eligible), k});
        }
    }

    Corpus corpus;
    corpus.options = opts;
    for (const auto& d : draws) corpus.cases.push_back(synthesize(experts[d.expert], d.findings, d.type, opts.synth));

    std::vector<std::size_t> order(draws.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto key = [&](std::size_t i) {
        return std::tie(corpus.cases[i].base_case_id, draws[i].type, corpus.cases[i].injected.front().finding_label,
                        draws[i].ordinal);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

    std::vector<SyntheticCase> sorted;
    sorted.reserve(order.size());
    std::map<std::string, std::size_t> repeats;
    for (std::size_t i : order) {
        SyntheticCase c = std::move(corpus.cases[i]);
        // The same draw can repeat; suffix keeps variant ids unique.
        const std::size_t n = repeats[c.variant_id]++;
        if (n > 0) c.variant_id += "__" + std::to_string(n + 1);
        sorted.push_back(std::move(c));
    }
    corpus.cases = std::move(sorted);
    return corpus;
}

// --- files ------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError(p.string(), "cannot read file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
}

/// Reads `<prefix>.session.json` and `<prefix>.transcript.json` from `dir`.
inline Reading load_reading(const std::filesystem::path& dir, const std::string& prefix,
                            const ParseOptions& opts = {}) {
    auto with_file = [&](const std::filesystem::path& p, auto&& parse) {
        try {
            return parse(read_file(p), opts);
        } catch (const ValidationError& e) {
            throw ValidationError(p.string() + (e.path().empty() ? "" : ":" + e.path()), e.what());
        }
    };
    Reading r;
    r.session = with_file(dir / (prefix + ".session.json"),
                          [](const std::string& raw, const ParseOptions& o) { return parse_session(raw, o); });
    r.transcript = with_file(dir / (prefix + ".transcript.json"),
                             [](const std::string& raw, const ParseOptions& o) { return parse_transcript(raw, o); });
    return r;
}

/// Every subdirectory holding teacher.session.json, sorted by name.
inline std::vector<Reading> load_expert_dir(const std::filesystem::path& dir, const ParseOptions& opts = {}) {
    if (!std::filesystem::is_directory(dir)) throw ValidationError(dir.string(), "not a directory");
    std::vector<std::filesystem::path> subdirs;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_directory() && std::filesystem::exists(e.path() / "teacher.session.json")) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    std::vector<Reading> out;
    for (const auto& d : subdirs) out.push_back(load_reading(d, "teacher", opts));
    return out;
}

inline ordered_json truth_json(const SyntheticCase& c) {
    ordered_json inj = ordered_json::array();
    for (const auto& e : c.injected)
        inj.push_back({{"finding_label", e.finding_label}, {"error_type", to_string(e.error_type)}});
    return {{"case_id", c.base_case_id}, {"variant_id", c.variant_id}, {"injected", std::move(inj)}};
}

/// One directory per case plus manifest.json.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& c : corpus.cases) {
        const auto d = out_dir / c.variant_id;
        write_file(d / "student.session.json", serialize(c.student.session));
        write_file(d / "student.transcript.json", serialize(c.student.transcript));
        write_file(d / "truth.json", truth_json(c).dump(2) + "\n");
    }
    write_file(out_dir / "manifest.json", corpus.manifest().dump(2) + "\n");
}

} // namespace gazecoach
