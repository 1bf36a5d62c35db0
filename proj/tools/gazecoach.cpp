#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gazecoach/gazecoach.hpp"

namespace gc = gazecoach;

namespace {

// Flag values that override the config file when given.
struct Overrides {
    std::optional<std::int64_t> tolerance_ms;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> policy;
    std::optional<std::size_t> agent_cap;
    std::optional<std::string> mode;
    std::optional<std::string> matcher;
    std::optional<std::string> synonyms;
    std::optional<std::string> script;
    std::optional<std::size_t> max_parallel_agents;
    std::optional<std::size_t> max_parallel_cases;
    std::optional<double> temperature;
    bool communication = false;
    bool strict = false;
};

void apply(const Overrides& o, gc::RunConfig& c) {
    if (o.tolerance_ms) c.tolerance_ms = *o.tolerance_ms;
    if (o.seed) c.seed = *o.seed;
    if (o.policy) c.policy.kind = gc::parse_policy(*o.policy);
    if (o.agent_cap) c.policy.agent_cap = *o.agent_cap;
    if (o.mode) c.mode = gc::parse_pet_mode(*o.mode);
    if (o.matcher) c.matcher = gc::parse_matcher_mode(*o.matcher);
    if (o.synonyms) c.synonym_table_path = *o.synonyms;
    if (o.script) {
        gc::BackendConfig b;
        b.kind = gc::BackendKind::scripted;
        b.script_path = *o.script;
        c.backend = b;
    }
    if (o.max_parallel_agents) c.max_parallel_agents = *o.max_parallel_agents;
    if (o.max_parallel_cases) c.max_parallel_cases = *o.max_parallel_cases;
    if (o.temperature) c.temperature = *o.temperature;
    if (o.communication) c.communication = true;
    if (o.strict) c.strict = true;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perceptual-error feedback from paired teacher and student gaze readings"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    bool print_config = false;
    Overrides ov;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_flag("--print-config", print_config, "print the effective configuration to stderr");
    app.add_flag("--strict", ov.strict, "reject unknown fields and out-of-range coordinates");
    app.add_option("--tolerance-ms", ov.tolerance_ms, "widen sentence windows by this many ms");
    app.add_option("--seed", ov.seed, "corpus generator seed");
    app.add_option("--policy", ov.policy, "by_complexity | by_error_count");
    app.add_option("--agent-cap", ov.agent_cap, "upper bound on recruited agents");
    app.add_option("--mode", ov.mode, "reference | llm");
    app.add_option("--matcher", ov.matcher, "exact | llm_matcher");
    app.add_option("--synonyms", ov.synonyms, "finding synonym table (JSON)");
    app.add_option("--script", ov.script, "scripted backend fixture (JSON)");
    app.add_option("--max-parallel-agents", ov.max_parallel_agents, "0 means one worker per agent");
    app.add_option("--max-parallel-cases", ov.max_parallel_cases);
    app.add_option("--temperature", ov.temperature);
    app.add_flag("--communication", ov.communication, "share earlier verdicts with later agents");

    auto* bg = app.add_subcommand("build-graph", "build a thought graph from one reading");
    gc::BuildGraphArgs bg_args;
    std::string bg_out;
    bg->add_option("--session", bg_args.session_path)->required();
    bg->add_option("--transcript", bg_args.transcript_path)->required();
    bg->add_option("--out", bg_out, "write JSON here instead of stdout");

    auto* syn = app.add_subcommand("synthesize", "generate a labeled student corpus from expert readings");
    gc::SynthesizeArgs syn_args;
    std::string syn_distractors;
    syn->add_option("--expert-dir", syn_args.expert_dir)->required();
    syn->add_option("--out", syn_args.out_dir)->required();
    syn->add_option("--per-type", syn_args.per_type, "variants per error type");
    syn->add_option("--errors-per-case", syn_args.errors_per_case);
    syn->add_option("--distractors", syn_distractors, "distractor table (JSON)");

    auto* an = app.add_subcommand("analyze", "produce feedback reports for student readings");
    gc::AnalyzeArgs an_args;
    an->add_option("--teacher", an_args.teacher_dir, "teacher case dir or directory of them")->required();
    an->add_option("--student", an_args.student_path, "student case dir or corpus dir")->required();
    an->add_option("--out", an_args.out_dir)->required();
    an->add_flag("--explain-plan", an_args.explain_plan, "print the assessment and comparison plan");

    auto* ev = app.add_subcommand("evaluate", "score reports against ground truth");
    gc::EvaluateArgs ev_args;
    std::string ev_log, ev_format = "json";
    ev->add_option("--reports", ev_args.reports_dir)->required();
    ev->add_option("--truth", ev_args.truth_dir)->required();
    ev->add_option("--run-log", ev_log, "defaults to <reports>/run_log.jsonl when present");
    ev->add_option("--format", ev_format)->check(CLI::IsMember({"json", "text"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : gc::kExitInvalidInput;
    }

    gc::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = gc::load_run_config(config_path);
        apply(ov, cfg);
        cfg.validate();
    } catch (...) {
        return gc::report_failure(std::cerr, "config");
    }
    if (print_config) std::cerr << gc::to_json(cfg).dump(2) << '\n';

    if (*bg) {
        if (!bg_out.empty()) bg_args.out_path = bg_out;
        return gc::cmd_build_graph(bg_args, cfg, std::cout, std::cerr);
    }
    if (*syn) {
        if (!syn_distractors.empty()) syn_args.distractor_table_path = syn_distractors;
        return gc::cmd_synthesize(syn_args, cfg, std::cout, std::cerr);
    }
    if (*an) return gc::cmd_analyze(an_args, cfg, std::cout, std::cerr);
    if (!ev_log.empty()) ev_args.run_log = ev_log;
    ev_args.text = ev_format == "text";
    return gc::cmd_evaluate(ev_args, std::cout, std::cerr);
}
