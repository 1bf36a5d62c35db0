#pragma once

// Implementations behind the command-line subcommands. Each returns the
// process exit code: 0 success, 1 internal or backend failure, 2 invalid input.

#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "gazecoach/agents.hpp"
#include "gazecoach/config.hpp"
#include "gazecoach/eval.hpp"
#include "gazecoach/remote_backend.hpp"
#include "gazecoach/scripted_backend.hpp"
#include "gazecoach/synth.hpp"

namespace gazecoach {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInvalidInput = 2 };

namespace fs = std::filesystem;

/// Maps the exception in flight to an exit code and prints it.
inline int report_failure(std::ostream& err, const std::string& context = {}) {
    const std::string prefix = context.empty() ? "error: " : "error: " + context + ": ";
    try {
        throw;
    } catch (const ValidationError& e) {
        err << prefix << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const ConfigError& e) {
        err << prefix << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const SynthesisError& e) {
        err << prefix << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const fs::filesystem_error& e) {
        err << prefix << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        err << prefix << e.what() << '\n';
        return kExitFailure;
    }
}

inline std::unique_ptr<ChatBackend> make_backend(const BackendConfig& b) {
    if (b.kind == BackendKind::scripted)
        return std::make_unique<ScriptedBackend>(parse_script(read_file(*b.script_path)), b.max_concurrent);
    RemoteConfig rc;
    rc.base_url = *b.base_url;
    rc.api_key_env = *b.api_key_env;
    rc.timeout = std::chrono::milliseconds(b.timeout_ms);
    rc.max_concurrent = b.max_concurrent;
    return std::make_unique<RemoteBackend>(std::move(rc));
}

inline ParseOptions parse_options(const RunConfig& cfg, std::vector<std::string>* warnings) {
    return {cfg.strict, warnings};
}

inline void flush_warnings(std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    warnings.clear();
}

struct BuildGraphArgs {
    fs::path session_path;
    fs::path transcript_path;
    std::optional<fs::path> out_path;
};

inline int cmd_build_graph(const BuildGraphArgs& args, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        std::vector<std::string> warnings;
        const ParseOptions po = parse_options(cfg, &warnings);
        Reading r;
        r.session = parse_session(read_file(args.session_path), po);
        r.transcript = parse_transcript(read_file(args.transcript_path), po);
        flush_warnings(warnings, err);
        const std::string doc = to_json(build_thought_graph(r, cfg.tolerance_ms)).dump(2) + "\n";
        if (args.out_path) write_file(*args.out_path, doc);
        else out << doc;
        return kExitOk;
    } catch (...) {
        return report_failure(err);
    }
}

struct SynthesizeArgs {
    fs::path expert_dir;
    fs::path out_dir;
    std::size_t per_type = 10;
    std::size_t errors_per_case = 1;
    std::optional<fs::path> distractor_table_path;
};

inline int cmd_synthesize(const SynthesizeArgs& args, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        std::vector<std::string> warnings;
        const auto experts = load_expert_dir(args.expert_dir, parse_options(cfg, &warnings));
        flush_warnings(warnings, err);
        if (experts.empty()) throw ValidationError(args.expert_dir.string(), "no expert cases found");

        DistractorTable table;
        CorpusOptions opts;
        opts.seed = cfg.seed;
        opts.per_type_count = args.per_type;
        opts.errors_per_case = args.errors_per_case;
        opts.synth.tolerance_ms = cfg.tolerance_ms;
        if (args.distractor_table_path) {
            table = parse_distractor_table(read_file(*args.distractor_table_path));
            opts.synth.distractors = &table;
        }
        const Corpus corpus = generate_corpus(experts, opts);
        write_corpus(corpus, args.out_dir);
        out << "wrote " << corpus.cases.size() << " case(s) from " << experts.size() << " expert case(s) to "
            << args.out_dir.string() << " (seed " << cfg.seed << ")\n";
        return kExitOk;
    } catch (...) {
        return report_failure(err);
    }
}

struct AnalyzeArgs {
    fs::path teacher_dir;
    fs::path student_path; // one case directory or a corpus directory
    fs::path out_dir;
    bool explain_plan = false;
};

struct StudentCase {
    std::string id;
    fs::path dir;
};

inline std::vector<StudentCase> find_student_cases(const fs::path& p) {
    if (fs::exists(p / "student.session.json")) return {{p.filename().string(), p}};
    if (!fs::is_directory(p)) throw ValidationError(p.string(), "not a student case or corpus directory");
    std::vector<StudentCase> out;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_directory() && fs::exists(e.path() / "student.session.json"))
            out.push_back({e.path().filename().string(), e.path()});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    if (out.empty()) throw ValidationError(p.string(), "no student cases found");
    return out;
}

inline fs::path teacher_dir_for(const fs::path& teacher_root, const std::string& case_id) {
    if (fs::exists(teacher_root / "teacher.session.json")) return teacher_root;
    return teacher_root / case_id;
}

inline int cmd_analyze(const AnalyzeArgs& args, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        cfg.validate();
        const AgentConfig agents = agent_config(cfg);
        const auto cases = find_student_cases(args.student_path);

        fs::create_directories(args.out_dir);
        const fs::path log_path = args.out_dir / "run_log.jsonl";
        fs::remove(log_path);
        auto log = std::make_shared<RunLog>(log_path);
        std::unique_ptr<ChatBackend> backend;
        if (cfg.needs_backend()) {
            backend = make_backend(*cfg.backend);
            backend->set_run_log(log);
        }

        struct Outcome {
            std::optional<FeedbackReport> report;
            ComparisonPlan plan;
            int code = kExitOk;
            std::string message;
        };
        std::vector<Outcome> outcomes(cases.size());
        std::mutex progress_mu;
        std::size_t done = 0;

        parallel_for(cases.size(), cfg.max_parallel_cases, [&](std::size_t i) {
            Outcome& o = outcomes[i];
            std::ostringstream diag;
            try {
                std::vector<std::string> warnings;
                const ParseOptions po = parse_options(cfg, &warnings);
                const Reading student = load_reading(cases[i].dir, "student", po);
                const Reading teacher =
                    load_reading(teacher_dir_for(args.teacher_dir, student.session.case_id), "teacher", po);
                flush_warnings(warnings, diag);
                CaseContext ctx;
                ctx.case_key = cases[i].id;
                ctx.variant_id = cases[i].id;
                ctx.log = log.get();
                ctx.plan_out = &o.plan;
                o.report = run_case(teacher, student, backend.get(), agents, ctx);
            } catch (...) {
                o.code = report_failure(diag, cases[i].id);
            }
            o.message = diag.str();
            std::lock_guard lock(progress_mu);
            ++done;
            err << o.message << "[" << done << "/" << cases.size() << "] " << cases[i].id << ": "
                << (o.code == kExitOk ? "ok" : "failed") << '\n';
        });

        int code = kExitOk;
        for (std::size_t i = 0; i < cases.size(); ++i) {
            const Outcome& o = outcomes[i];
            if (o.code != kExitOk) {
                code = std::max(code, o.code == kExitInvalidInput ? int{kExitInvalidInput} : int{kExitFailure});
                continue;
            }
            write_file(args.out_dir / (cases[i].id + ".report.json"), serialize(*o.report));
            if (args.explain_plan) {
                ordered_json plan = {{"case", cases[i].id},
                                     {"assessment", to_json(o.report->assessment)},
                                     {"plan", to_json(o.plan)}};
                out << plan.dump(2) << '\n';
            }
        }
        return code;
    } catch (...) {
        return report_failure(err);
    }
}

struct EvaluateArgs {
    fs::path reports_dir;
    fs::path truth_dir;
    std::optional<fs::path> run_log;
    bool text = false;
};

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (!fs::is_directory(args.reports_dir)) throw ValidationError(args.reports_dir.string(), "not a directory");
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(args.reports_dir)) {
            const std::string name = e.path().filename().string();
            if (e.is_regular_file() && name.size() > 12 && name.ends_with(".report.json")) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ValidationError(args.reports_dir.string(), "no *.report.json files");

        std::vector<LabeledCase> cases;
        for (const auto& f : files) {
            json report;
            try {
                report = json::parse(read_file(f));
            } catch (const json::parse_error& e) {
                throw ValidationError(f.string(), std::string("malformed report: ") + e.what());
            }
            const std::string id = report.contains("variant_id") ? report["variant_id"].get<std::string>()
                                                                 : report.at("case_id").get<std::string>();
            const fs::path truth_path = args.truth_dir / id / "truth.json";
            if (!fs::exists(truth_path)) throw ValidationError(truth_path.string(), "missing truth for " + id);
            json truth;
            try {
                truth = json::parse(read_file(truth_path));
            } catch (const json::parse_error& e) {
                throw ValidationError(truth_path.string(), std::string("malformed truth: ") + e.what());
            }
            cases.push_back({id, predicted_types(report), truth_types(truth)});
        }

        MetricsReport metrics = score(build_matrix(cases));
        std::optional<fs::path> log_path = args.run_log;
        if (!log_path && fs::exists(args.reports_dir / "run_log.jsonl")) log_path = args.reports_dir / "run_log.jsonl";
        if (log_path) metrics.latency = time_stats(read_run_log(*log_path));

        if (args.text) out << to_text_table(metrics);
        else out << to_json(metrics).dump(2) << '\n';
        return kExitOk;
    } catch (...) {
        return report_failure(err);
    }
}

} // namespace gazecoach
