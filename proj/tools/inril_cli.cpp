// inril: command-line front end.
//
//   inril gen-demos    [--config F] [--set k=v]... [--out FILE] [--force]
//   inril pretrain     --demos FILE [--out DIR] [--resume CKPT]
//   inril finetune     --demos FILE (--checkpoint CKPT | --from-scratch) [--out DIR]
//   inril sweep-m      --demos FILE (--checkpoint CKPT | --from-scratch) [--out DIR] [--jobs N] [--reduce-only]
//   inril theory-check [--seed N] [--inject-wrong-l] [--report FILE]
//   inril plot         LOG... [--out DIR] [--smooth-window W] [--smooth-order K]
//
// Relative output paths land under $INRIL_OUT_ROOT (default ./runs). Input
// paths are tried as given first, then under the output root.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "inril/commands.hpp"
#include "inril/errors.hpp"

namespace fs = std::filesystem;
using namespace inril;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string env;
    bool wall_time = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON config file");
        app->add_option("--set", sets, "Config override key=value (dotted keys for sections)")->allow_extra_args(false);
        app->add_option("--seed", seed, "Shorthand for --set seed=N");
        app->add_option("--env", env, "Shorthand for --set env=NAME");
        app->add_flag("--wall-time", wall_time, "Add wall-clock times to log records (breaks byte-identity)");
    }

    RunConfig resolve() const {
        std::vector<std::string> all = sets;
        if (!env.empty()) all.push_back("env=\"" + env + "\"");
        if (seed) all.push_back("seed=" + std::to_string(*seed));
        return load_run_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), all);
    }
};

fs::path input_path(const std::string& p) {
    if (fs::exists(p)) return p;
    const fs::path under = resolve_output(p);
    if (fs::exists(under)) return under;
    throw FileError("input file '" + p + "' not found (also looked in " + under.string() + ")");
}

std::optional<fs::path> checkpoint_choice(const std::string& ckpt, bool from_scratch) {
    if (from_scratch == !ckpt.empty()) throw UsageError("give exactly one of --checkpoint and --from-scratch");
    if (from_scratch) return std::nullopt;
    return input_path(ckpt);
}

std::string opt_str(const std::optional<double>& v) {
    if (!v) return "null";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", *v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interleaved imitation and reinforcement learning toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kCodeVersion));

    Common common;

    auto* gen = app.add_subcommand("gen-demos", "Roll the analytic expert and write a demo file");
    std::string gen_out;
    bool gen_force = false;
    common.attach(gen);
    gen->add_option("--out", gen_out, "Demo file (default demos/<env>_s<seed>.demos)");
    gen->add_flag("--force", gen_force, "Overwrite an existing file");

    auto* pre = app.add_subcommand("pretrain", "Behavior-clone a policy on a demo file");
    std::string pre_demos, pre_out, pre_resume;
    common.attach(pre);
    pre->add_option("--demos", pre_demos, "Demo file")->required();
    pre->add_option("--out", pre_out, "Output directory (default pretrain/<env>_s<seed>)");
    pre->add_option("--resume", pre_resume, "Checkpoint to continue from");

    auto* fin = app.add_subcommand("finetune", "Fine-tune with interleaved IL/RL updates");
    std::string fin_demos, fin_out, fin_ckpt;
    bool fin_scratch = false;
    common.attach(fin);
    fin->add_option("--demos", fin_demos, "Demo file")->required();
    fin->add_option("--checkpoint", fin_ckpt, "Pretrained checkpoint");
    fin->add_flag("--from-scratch", fin_scratch, "Start from a random policy instead");
    fin->add_option("--out", fin_out, "Output directory (default finetune/<env>_<mode>_s<seed>)");

    auto* sweep = app.add_subcommand("sweep-m", "Grid of finetune runs over modes, m and seeds");
    std::string sw_demos, sw_out, sw_ckpt;
    bool sw_scratch = false, sw_reduce = false;
    int sw_jobs = 1;
    common.attach(sweep);
    sweep->add_option("--demos", sw_demos, "Demo file");
    sweep->add_option("--checkpoint", sw_ckpt, "Pretrained checkpoint");
    sweep->add_flag("--from-scratch", sw_scratch, "Start every cell from a random policy");
    sweep->add_option("--out", sw_out, "Output directory (default sweep/<env>)");
    sweep->add_option("--jobs", sw_jobs, "Cells run in parallel")->check(CLI::PositiveNumber);
    sweep->add_flag("--reduce-only", sw_reduce, "Only rebuild summary.json/csv from the cell logs");

    auto* th = app.add_subcommand("theory-check", "Run the quadratic testbed checks");
    std::uint64_t th_seed = 0;
    bool th_wrong = false;
    std::string th_report = "theory/report.ndjson";
    int th_runs = 60;
    std::int64_t th_T = 200;
    th->add_option("--seed", th_seed, "Suite seed");
    th->add_flag("--inject-wrong-l", th_wrong, "Halve every smoothness constant (negative control)");
    th->add_option("--report", th_report, "JSON-lines report path");
    th->add_option("--bound-runs", th_runs, "Random instances for the bound checks")->check(CLI::PositiveNumber);
    th->add_option("--bound-T", th_T, "Cycles per bound-check run")->check(CLI::PositiveNumber);

    auto* plot = app.add_subcommand("plot", "CSV and SVG curves from run logs");
    std::vector<std::string> plot_logs;
    std::string plot_out = "plots";
    int plot_window = 1, plot_order = 2;
    plot->add_option("logs", plot_logs, "Run logs (log.ndjson)")->required();
    plot->add_option("--out", plot_out, "Output directory");
    plot->add_option("--smooth-window", plot_window, "Savitzky-Golay window (odd; 1 = no smoothing)");
    plot->add_option("--smooth-order", plot_order, "Savitzky-Golay polynomial order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
    }

    try {
        if (*gen) {
            const RunConfig cfg = common.resolve();
            const fs::path out = resolve_output(
                gen_out.empty() ? "demos/" + to_string(cfg.env.kind) + "_s" + std::to_string(cfg.seed) + ".demos" : gen_out);
            const DemoDataset d = cmd_gen_demos({cfg, out, gen_force});
            std::cout << "wrote " << out.string() << " (" << d.n_trajectories << " trajectories, " << d.size()
                      << " pairs)\n";
        } else if (*pre) {
            const RunConfig cfg = common.resolve();
            const fs::path out =
                resolve_output(pre_out.empty() ? "pretrain/" + to_string(cfg.env.kind) + "_s" + std::to_string(cfg.seed)
                                               : pre_out);
            PretrainOptions o{cfg, input_path(pre_demos), out,
                              pre_resume.empty() ? std::nullopt : std::optional<fs::path>(input_path(pre_resume)),
                              common.wall_time};
            const PretrainSummary s = cmd_pretrain(o);
            std::printf("pretrain steps %llu..%llu  full NLL %.6g -> %.6g  best eval return %.6g (step %llu)  "
                        "final eval return %.6g success %.3g\n",
                        static_cast<unsigned long long>(s.start_step), static_cast<unsigned long long>(s.final_step),
                        s.initial_full_loss, s.final_full_loss, s.best_eval_return,
                        static_cast<unsigned long long>(s.best_step), s.final_eval_return, s.final_eval_success);
            std::cout << "wrote " << out.string() << "\n";
        } else if (*fin) {
            const RunConfig cfg = common.resolve();
            const fs::path out = resolve_output(fin_out.empty() ? "finetune/" + to_string(cfg.env.kind) + "_" +
                                                                      to_string(cfg.interleave.mode) + "_s" +
                                                                      std::to_string(cfg.seed)
                                                                : fin_out);
            FinetuneOptions o{cfg, checkpoint_choice(fin_ckpt, fin_scratch), input_path(fin_demos), out,
                              common.wall_time};
            const FinetuneSummary s = cmd_finetune(o);
            std::printf("finetune cycles %zu  env steps %lld  final return %.6g  final IL loss %.6g  "
                        "final eval return %s success %s  best eval return %s success %s\n",
                        s.cycles, static_cast<long long>(s.env_steps), s.final_return, s.final_il_loss,
                        opt_str(s.final_eval_return).c_str(), opt_str(s.final_eval_success).c_str(),
                        opt_str(s.best_eval_return).c_str(), opt_str(s.best_eval_success).c_str());
            std::cout << "wrote " << out.string() << "\n";
        } else if (*sweep) {
            const RunConfig cfg = common.resolve();
            const fs::path out = resolve_output(sw_out.empty() ? "sweep/" + to_string(cfg.env.kind) : sw_out);
            std::vector<RunSummary> rows;
            if (sw_reduce) {
                rows = reduce_sweep(out);
            } else {
                if (sw_demos.empty()) throw UsageError("sweep-m needs --demos");
                SweepOptions o{cfg, checkpoint_choice(sw_ckpt, sw_scratch), input_path(sw_demos), out, sw_jobs,
                               common.wall_time};
                rows = cmd_sweep_m(o);
            }
            std::cout << summary_csv(rows);
            std::cout << "wrote " << (out / "summary.csv").string() << "\n";
            for (const auto& r : rows) {
                if (r.status != "ok") return static_cast<int>(ExitCode::kDivergence);
            }
        } else if (*th) {
            TheoryCheckOptions o;
            o.suite.seed = th_seed;
            o.suite.bound_runs = th_runs;
            o.suite.bound_T = th_T;
            o.suite.l_scale = th_wrong ? 0.5 : 1.0;
            o.report = resolve_output(th_report);
            const TheoryCheckResult r = cmd_theory_check(o);
            std::cout << r.table;
            std::cout << "report " << o.report->string() << "\n";
            if (!r.all_pass) {
                std::cerr << "theory-check: one or more checks failed\n";
                return static_cast<int>(ExitCode::kTheoryFailure);
            }
        } else if (*plot) {
            PlotOptions o;
            for (const auto& l : plot_logs) o.logs.push_back(input_path(l));
            o.out_dir = resolve_output(plot_out);
            o.smooth_window = plot_window;
            o.smooth_order = plot_order;
            const PlotResult r = cmd_plot(o);
            std::cout << "wrote " << o.out_dir.string() << " (" << r.csv_rows << " rows, " << r.curves << " curves)\n";
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kUsage);
    }
    return 0;
}
