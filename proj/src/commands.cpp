#include "inril/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "inril/checkpoint.hpp"
#include "inril/errors.hpp"
#include "inril/text_io.hpp"

namespace inril {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DemoDataset load_matching_demos(const fs::path& path, const RunConfig& cfg) {
    DemoDataset demos = load_demos(path);
    if (demos.kind != cfg.env.kind) {
        throw ConfigError("demo file " + path.string() + " is for env '" + to_string(demos.kind) +
                          "' but the config selects '" + to_string(cfg.env.kind) + "'");
    }
    return demos;
}

MlpSpec configured_policy_spec(const RunConfig& cfg) {
    return policy_spec(EnvConfig::obs_dim(), EnvConfig::act_dim(), cfg.policy_hidden, cfg.activation);
}

void check_policy_spec(const GaussianMlpPolicy& p, const RunConfig& cfg, const fs::path& from) {
    if (!(p.spec() == configured_policy_spec(cfg))) {
        throw ConfigError("checkpoint " + from.string() + " holds a policy whose architecture differs from the config");
    }
}

bool better_eval(double success, double ret, const std::optional<double>& best_success,
                 const std::optional<double>& best_return) {
    if (!best_success) return true;
    if (success != *best_success) return success > *best_success;
    return ret > *best_return;
}

Checkpoint policy_checkpoint(const RunConfig& cfg, std::uint64_t step, const json& meta, const GaussianMlpPolicy& policy,
                             const std::optional<GaussianMlpPolicy>& residual = std::nullopt,
                             const std::optional<ValueNet>& value = std::nullopt) {
    Checkpoint c;
    c.seed = cfg.seed;
    c.step = step;
    c.meta = meta.dump();
    c.networks.emplace_back("policy", policy);
    if (residual) c.networks.emplace_back("residual", *residual);
    if (value) c.networks.emplace_back("value", *value);
    return c;
}

std::string fixed(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

}  // namespace

fs::path output_root() {
    const char* root = std::getenv("INRIL_OUT_ROOT");
    if (root != nullptr && *root != '\0') return fs::path(root);
    return fs::path("runs");
}

fs::path resolve_output(const fs::path& p) {
    if (p.is_absolute()) return p;
    return output_root() / p;
}

RunConfig load_run_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    json j = file ? load_config_json(*file) : json::object();
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& o : overrides) apply_override(j, o);
    return resolve_config(j);
}

std::string file_digest(const fs::path& path) {
    const std::string bytes = read_text_file(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ------------------------------------------------------------ gen-demos

DemoDataset cmd_gen_demos(const GenDemosOptions& opts) {
    if (fs::exists(opts.out) && !opts.force) {
        throw FileError("refusing to overwrite " + opts.out.string() + " (pass --force)");
    }
    DemoDataset demos = generate_demos(opts.cfg.env, opts.cfg.demo_trajectories, opts.cfg.demo_noise, opts.cfg.seed);
    if (opts.out.has_parent_path()) fs::create_directories(opts.out.parent_path());
    save_demos(demos, opts.out);
    return demos;
}

// ------------------------------------------------------------ pretrain

GaussianMlpPolicy initial_policy(const RunConfig& cfg) {
    return Mlp::initialized(configured_policy_spec(cfg), derive_seed(cfg.seed, Stream::kInit, 0), cfg.init_log_std);
}

IlBatchConfig effective_il_config(const RunConfig& cfg, std::size_t dataset_size) {
    IlBatchConfig il = cfg.il;
    il.batch_size = std::min(il.batch_size, dataset_size);
    il.validate(dataset_size);
    return il;
}

PretrainSummary cmd_pretrain(const PretrainOptions& opts) {
    const RunConfig& cfg = opts.cfg;
    const DemoDataset demos = load_matching_demos(opts.demos, cfg);
    const IlBatchConfig il = effective_il_config(cfg, demos.size());

    GaussianMlpPolicy policy = initial_policy(cfg);
    std::uint64_t step = 0;
    json inputs{{"demos", file_digest(opts.demos)}};
    if (opts.resume) {
        const Checkpoint ck = load_checkpoint(*opts.resume);
        policy = ck.get("policy");
        check_policy_spec(policy, cfg, *opts.resume);
        step = ck.step;
        inputs["resume"] = file_digest(*opts.resume);
    }

    fs::create_directories(opts.out_dir);
    RunLogWriter log(opts.out_dir / "log.ndjson", "pretrain", cfg, inputs);
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t eval_seed = derive_seed(cfg.seed, Stream::kEval, 0);

    PretrainSummary sum;
    sum.start_step = step;
    sum.batch_size = il.batch_size;
    sum.initial_full_loss = il_full_loss(policy, demos);
    sum.best_full_loss = sum.initial_full_loss;

    std::optional<double> best_success, best_return;
    GaussianMlpPolicy best_policy = policy;
    auto evaluate_now = [&](double full_loss) {
        const EvalResult ev = evaluate_policy(policy, cfg.env, cfg.pretrain_eval_episodes, eval_seed);
        json r{{"type", "pretrain_eval"},
               {"step", step},
               {"full_loss", json_number(full_loss)},
               {"eval_return", json_number(ev.mean_return)},
               {"eval_success", json_number(ev.success_rate)}};
        if (opts.wall_time) r["wall_time"] = seconds_since(t0);
        log.write(r);
        sum.best_full_loss = std::min(sum.best_full_loss, full_loss);
        if (better_eval(ev.success_rate, ev.mean_return, best_success, best_return)) {
            best_success = ev.success_rate;
            best_return = ev.mean_return;
            best_policy = policy;
            sum.best_step = step;
        }
        sum.final_eval_return = ev.mean_return;
        sum.final_eval_success = ev.success_rate;
    };
    evaluate_now(sum.initial_full_loss);

    std::uint64_t remaining = cfg.pretrain_steps;
    double full_loss = sum.initial_full_loss;
    while (remaining > 0) {
        const std::uint64_t chunk = std::min<std::uint64_t>(remaining, static_cast<std::uint64_t>(cfg.pretrain_eval_every));
        std::optional<PretrainResult> r;
        try {
            r = pretrain(policy, demos, chunk, il, step);
        } catch (const DivergenceError& e) {
            save_checkpoint(policy_checkpoint(cfg, step, json{{"role", "last_good"}}, policy),
                            opts.out_dir / "last_good.ckpt");
            log.write(json{{"type", "divergence"}, {"step", step}, {"message", e.what()}});
            log.write(json{{"type", "end"}, {"status", "diverged"}});
            throw;
        }
        for (std::size_t i = 0; i < r->loss_curve.size(); ++i) {
            log.write(json{{"type", "pretrain_step"}, {"step", step + i}, {"loss", json_number(r->loss_curve[i])}});
        }
        policy = std::move(r->policy);
        step += chunk;
        remaining -= chunk;
        full_loss = r->final_full_loss;
        evaluate_now(full_loss);
    }

    sum.final_step = step;
    sum.final_full_loss = full_loss;
    sum.best_eval_return = *best_return;
    sum.best_eval_success = *best_success;
    log.write(json{{"type", "pretrain_summary"},
                   {"start_step", sum.start_step},
                   {"final_step", sum.final_step},
                   {"batch_size", sum.batch_size},
                   {"initial_full_loss", json_number(sum.initial_full_loss)},
                   {"final_full_loss", json_number(sum.final_full_loss)},
                   {"best_full_loss", json_number(sum.best_full_loss)},
                   {"eps_il_proxy", json_number(sum.final_full_loss - sum.best_full_loss)},
                   {"best_checkpoint_step", sum.best_step},
                   {"best_checkpoint_eval_return", json_number(sum.best_eval_return)},
                   {"best_checkpoint_eval_success", json_number(sum.best_eval_success)},
                   {"final_checkpoint_eval_return", json_number(sum.final_eval_return)},
                   {"final_checkpoint_eval_success", json_number(sum.final_eval_success)}});
    log.write(json{{"type", "end"}, {"status", "ok"}});

    save_checkpoint(policy_checkpoint(cfg, step,
                                      json{{"role", "final"},
                                           {"eval_return", sum.final_eval_return},
                                           {"eval_success", sum.final_eval_success}},
                                      policy),
                    opts.out_dir / "final.ckpt");
    // The best checkpoint keeps the final step count so resuming from either
    // continues the same mini-batch sequence.
    save_checkpoint(policy_checkpoint(cfg, step,
                                      json{{"role", "best"},
                                           {"selected_at_step", sum.best_step},
                                           {"eval_return", sum.best_eval_return},
                                           {"eval_success", sum.best_eval_success}},
                                      best_policy),
                    opts.out_dir / "best.ckpt");
    return sum;
}

// ------------------------------------------------------------ finetune

FinetuneSummary cmd_finetune(const FinetuneOptions& opts) {
    const RunConfig& cfg = opts.cfg;
    const DemoDataset demos = load_matching_demos(opts.demos, cfg);
    const IlBatchConfig il = effective_il_config(cfg, demos.size());

    GaussianMlpPolicy start = initial_policy(cfg);
    json inputs{{"demos", file_digest(opts.demos)}};
    if (opts.checkpoint) {
        const Checkpoint ck = load_checkpoint(*opts.checkpoint);
        start = ck.get("policy");
        check_policy_spec(start, cfg, *opts.checkpoint);
        inputs["checkpoint"] = file_digest(*opts.checkpoint);
    } else {
        inputs["checkpoint"] = "random-init";
    }

    fs::create_directories(opts.out_dir);
    RunLogWriter log(opts.out_dir / "log.ndjson", "finetune", cfg, inputs);
    const auto t0 = std::chrono::steady_clock::now();
    const bool separation = cfg.interleave.mode == Mode::kNetworkSeparation;

    ParamVector cur_policy = start.params();
    ParamVector cur_residual;
    std::optional<double> best_success, best_return;
    std::optional<Checkpoint> best;
    FinetuneSummary sum;

    RunHooks hooks;
    hooks.on_update = [&](const UpdateEvent& ev) {
        if (ev.base_params != nullptr) {
            cur_policy = *ev.base_params;
            cur_residual = *ev.residual_params;
        } else {
            cur_policy = ev.acting_params;
        }
    };
    hooks.on_cycle = [&](const CycleRecord& rec) {
        log.write_cycle(rec, opts.wall_time ? std::optional<double>(seconds_since(t0)) : std::nullopt);
        if (rec.eval_return && rec.eval_success &&
            better_eval(*rec.eval_success, *rec.eval_return, best_success, best_return)) {
            best_success = rec.eval_success;
            best_return = rec.eval_return;
            std::optional<GaussianMlpPolicy> residual;
            if (separation && !cur_residual.empty()) {
                // Architecture of the residual is rebuilt from the config.
                MlpSpec rs = policy_spec(EnvConfig::obs_dim(), EnvConfig::act_dim(), cfg.interleave.residual_hidden,
                                         cfg.activation);
                residual = Mlp(rs, cur_residual);
            }
            best = policy_checkpoint(cfg, static_cast<std::uint64_t>(rec.updates),
                                     json{{"role", "best"},
                                          {"cycle", rec.cycle},
                                          {"eval_return", *rec.eval_return},
                                          {"eval_success", *rec.eval_success},
                                          {"residual_scale", cfg.interleave.residual_scale}},
                                     Mlp(start.spec(), cur_policy), residual);
        }
    };
    hooks.on_divergence = [&](const GaussianMlpPolicy& p, const std::optional<ResidualPolicyPair>& pair) {
        std::optional<GaussianMlpPolicy> residual;
        if (pair) residual = pair->residual;
        save_checkpoint(policy_checkpoint(cfg, 0,
                                          json{{"role", "last_good"}, {"residual_scale", cfg.interleave.residual_scale}},
                                          p, residual),
                        opts.out_dir / "last_good.ckpt");
    };

    RlConfig rl = cfg.rl;
    rl.lr = cfg.interleave.alpha_rl;
    std::optional<InrilResult> run;
    try {
        run = run_inril(start, demos, cfg.env, cfg.interleave, rl, il, cfg.budget_env_steps, cfg.seed, hooks);
    } catch (const Error& e) {
        const bool diverged =
            dynamic_cast<const DivergenceError*>(&e) != nullptr || dynamic_cast<const NumericError*>(&e) != nullptr;
        log.write(json{{"type", diverged ? "divergence" : "error"}, {"message", e.what()}});
        log.write(json{{"type", "end"}, {"status", diverged ? "diverged" : "failed"}});
        if (best) save_checkpoint(*best, opts.out_dir / "best.ckpt");
        throw;
    }
    const InrilResult& res = *run;

    std::optional<GaussianMlpPolicy> residual;
    if (res.pair) residual = res.pair->residual;
    const GaussianMlpPolicy& final_policy = res.pair ? res.pair->base : res.policy;
    const CycleRecord& last = res.records.back();
    sum.cycles = res.records.size();
    sum.env_steps = last.env_steps;
    sum.final_return = last.mean_return;
    sum.final_il_loss = last.il_loss;
    sum.final_eval_return = last.eval_return;
    sum.final_eval_success = last.eval_success;
    sum.best_eval_return = best_return;
    sum.best_eval_success = best_success;

    json end{{"type", "end"}, {"status", "ok"}, {"cycles", sum.cycles}, {"env_steps", sum.env_steps}};
    if (best_return) {
        end["best_checkpoint_eval_return"] = json_number(*best_return);
        end["best_checkpoint_eval_success"] = json_number(*best_success);
    }
    if (last.eval_return) {
        end["final_checkpoint_eval_return"] = json_number(*last.eval_return);
        end["final_checkpoint_eval_success"] = json_number(*last.eval_success);
    }
    log.write(end);

    json meta{{"role", "final"}, {"cycle", last.cycle}, {"residual_scale", cfg.interleave.residual_scale}};
    if (last.eval_return) {
        meta["eval_return"] = *last.eval_return;
        meta["eval_success"] = *last.eval_success;
    }
    save_checkpoint(policy_checkpoint(cfg, static_cast<std::uint64_t>(last.updates), meta, final_policy, residual,
                                      res.value),
                    opts.out_dir / "final.ckpt");
    if (best) save_checkpoint(*best, opts.out_dir / "best.ckpt");
    return sum;
}

// ------------------------------------------------------------ sweep-m

std::vector<SweepCell> sweep_cells(const RunConfig& cfg) {
    cfg.sweep.validate();
    std::vector<SweepCell> cells;
    std::set<std::string> seen;
    auto add = [&](Mode mode, std::optional<int> m, std::uint64_t seed) {
        const bool rl_only = mode == Mode::kRlOnly || !m;
        const std::string name = (rl_only ? std::string("rl_only_minf") : to_string(mode) + "_m" + std::to_string(*m)) +
                                 "_s" + std::to_string(seed);
        if (!seen.insert(name).second) return;
        SweepCell c{name, cfg};
        c.cfg.seed = seed;
        c.cfg.interleave.mode = rl_only ? Mode::kRlOnly : mode;
        c.cfg.interleave.adaptive = false;
        if (m) c.cfg.interleave.m = *m;
        c.cfg.validate();
        cells.push_back(std::move(c));
    };
    for (Mode mode : cfg.sweep.modes) {
        for (const auto& m : cfg.sweep.m_values) {
            for (std::uint64_t seed : cfg.sweep.seeds) add(mode, m, seed);
        }
    }
    return cells;
}

std::vector<RunSummary> reduce_sweep(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw FileError("sweep directory " + dir.string() + " does not exist");
    std::vector<fs::path> cell_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "log.ndjson")) cell_dirs.push_back(entry.path());
    }
    std::sort(cell_dirs.begin(), cell_dirs.end());
    std::vector<RunSummary> rows;
    for (const auto& d : cell_dirs) {
        const std::string name = d.filename().string();
        try {
            rows.push_back(summarize_log(read_run_log(d / "log.ndjson"), name));
        } catch (const Error& e) {
            RunSummary s;
            s.name = name;
            s.status = std::string("failed: ") + e.what();
            s.final_return = s.final_il_loss = s.auc_return = std::nan("");
            rows.push_back(s);
        }
    }
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    write_text_file(dir / "summary.json", arr.dump(2) + "\n");
    write_text_file(dir / "summary.csv", summary_csv(rows));
    return rows;
}

std::vector<RunSummary> cmd_sweep_m(const SweepOptions& opts) {
    if (opts.jobs < 1) throw UsageError("--jobs must be >= 1");
    const std::vector<SweepCell> cells = sweep_cells(opts.cfg);
    fs::create_directories(opts.out_dir);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const SweepCell& cell = cells[i];
            FinetuneOptions fo{cell.cfg, opts.checkpoint, opts.demos, opts.out_dir / cell.name, opts.wall_time};
            try {
                cmd_finetune(fo);
            } catch (const std::exception& e) {
                // cmd_finetune already logged errors raised during training;
                // failures before the log existed are recorded here.
                const fs::path logp = fo.out_dir / "log.ndjson";
                if (!fs::exists(logp)) {
                    try {
                        fs::create_directories(fo.out_dir);
                        RunLogWriter w(logp, "finetune", cell.cfg);
                        w.write(json{{"type", "error"}, {"message", e.what()}});
                        w.write(json{{"type", "end"}, {"status", "failed"}});
                    } catch (const std::exception&) {
                    }
                }
            }
        }
    };
    const int n = std::min<int>(opts.jobs, static_cast<int>(cells.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return reduce_sweep(opts.out_dir);
}

// ------------------------------------------------------------ theory-check

json to_json(const theory::CheckRecord& r) {
    return json{{"name", r.name},
                {"lhs", json_number(r.lhs)},
                {"rhs", json_number(r.rhs)},
                {"margin", json_number(r.margin)},
                {"pass", r.pass},
                {"detail", r.detail}};
}

TheoryCheckResult cmd_theory_check(const TheoryCheckOptions& opts) {
    TheoryCheckResult out;
    out.records = theory::run_suite(opts.suite);
    out.all_pass = std::all_of(out.records.begin(), out.records.end(), [](const auto& r) { return r.pass; });
    std::size_t width = 5;
    for (const auto& r : out.records) width = std::max(width, r.name.size());
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-*s  %14s  %14s  %14s  %s\n", static_cast<int>(width), "check", "lhs", "rhs",
                  "margin", "result");
    out.table = buf;
    for (const auto& r : out.records) {
        std::snprintf(buf, sizeof buf, "%-*s  %14s  %14s  %14s  %s\n", static_cast<int>(width), r.name.c_str(),
                      fixed(r.lhs).c_str(), fixed(r.rhs).c_str(), fixed(r.margin).c_str(), r.pass ? "PASS" : "FAIL");
        out.table += buf;
    }
    if (opts.report) {
        std::string lines;
        for (const auto& r : out.records) lines += to_json(r).dump() + "\n";
        if (opts.report->has_parent_path()) fs::create_directories(opts.report->parent_path());
        write_text_file(*opts.report, lines);
    }
    return out;
}

// ------------------------------------------------------------ plot

std::string curves_csv(const std::vector<std::pair<std::string, RunLog>>& logs) {
    static const char* numeric[] = {"mean_return",  "success_rate", "il_loss",     "rho",
                                    "grad_norm_il", "grad_norm_rl", "eval_return", "eval_success"};
    std::string out = "log,cycle,env_steps,updates,m_used,pattern";
    for (const char* f : numeric) out += std::string(",") + f;
    out += "\n";
    for (const auto& [name, log] : logs) {
        for (const auto& r : log.cycles()) {
            out += name + "," + r["cycle"].dump() + "," + r["env_steps"].dump() + "," + r["updates"].dump() + "," +
                   r["m_used"].dump() + ",\"" + r.value("pattern", "") + "\"";
            for (const char* f : numeric) {
                out += ",";
                if (r.contains(f) && r[f].is_number()) out += format_double(r[f].get<double>());
            }
            out += "\n";
        }
    }
    return out;
}

PlotResult cmd_plot(const PlotOptions& opts) {
    if (opts.logs.empty()) throw UsageError("plot needs at least one log file");
    std::vector<std::pair<std::string, RunLog>> logs;
    std::map<std::string, int> used;
    for (const auto& p : opts.logs) {
        std::string label = p.filename() == "log.ndjson" && p.has_parent_path() ? p.parent_path().filename().string()
                                                                                : p.stem().string();
        if (label.empty()) label = "log";
        const int k = used[label]++;
        if (k > 0) label += "#" + std::to_string(k + 1);
        logs.emplace_back(label, read_run_log(p));
    }
    fs::create_directories(opts.out_dir);
    PlotResult res;
    const std::string csv = curves_csv(logs);
    write_text_file(opts.out_dir / "curves.csv", csv);
    res.csv_rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;

    std::vector<Curve> ret_curves, il_curves;
    for (const auto& [name, log] : logs) {
        const std::vector<double> x = log.cycle_series("env_steps");
        if (x.empty()) continue;
        auto smooth = [&](const std::vector<double>& y) {
            if (opts.smooth_window <= 1) return y;
            return savgol_filter(y, opts.smooth_window, opts.smooth_order);
        };
        ret_curves.push_back({name, x, smooth(log.cycle_series("mean_return"))});
        il_curves.push_back({name, x, smooth(log.cycle_series("il_loss"))});
    }
    std::string note = opts.smooth_window > 1 ? " (Savitzky-Golay window " + std::to_string(opts.smooth_window) +
                                                     ", order " + std::to_string(opts.smooth_order) + ")"
                                               : "";
    write_text_file(opts.out_dir / "return.svg",
                    render_svg(ret_curves, "Rollout return vs env steps" + note, "env steps", "mean return"));
    write_text_file(opts.out_dir / "il_loss.svg",
                    render_svg(il_curves, "IL loss vs env steps" + note, "env steps", "IL loss (NLL)"));
    res.curves = ret_curves.size();
    return res;
}

}  // namespace inril
