#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inril/config.hpp"
#include "inril/harness.hpp"
#include "inril/theory.hpp"

namespace inril {

/// $INRIL_OUT_ROOT, or "runs" when unset.
std::filesystem::path output_root();

/// Relative paths are taken under output_root().
std::filesystem::path resolve_output(const std::filesystem::path& p);

/// Config file (optional) plus "key=value" overrides, resolved and validated.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

/// FNV-1a of a file's bytes as 16 hex digits; identifies inputs in log headers.
std::string file_digest(const std::filesystem::path& path);

// ------------------------------------------------------------ gen-demos

struct GenDemosOptions {
    RunConfig cfg;
    std::filesystem::path out;  // demo file
    bool force = false;
};

/// FileError when `out` exists and force is off.
DemoDataset cmd_gen_demos(const GenDemosOptions& opts);

// ------------------------------------------------------------ pretrain

struct PretrainOptions {
    RunConfig cfg;
    std::filesystem::path demos;
    std::filesystem::path out_dir;     // log.ndjson, best.ckpt, final.ckpt
    std::optional<std::filesystem::path> resume;
    bool wall_time = false;
};

struct PretrainSummary {
    std::uint64_t start_step = 0;
    std::uint64_t final_step = 0;
    double initial_full_loss = 0.0;
    double final_full_loss = 0.0;
    double best_full_loss = 0.0;      // lowest full-batch NLL at an eval point
    std::uint64_t best_step = 0;      // eval point with the best greedy return
    double best_eval_return = 0.0;
    double best_eval_success = 0.0;
    double final_eval_return = 0.0;
    double final_eval_success = 0.0;
    std::size_t batch_size = 0;       // min(configured, dataset size)
};

/// Policy initialization used when not resuming.
GaussianMlpPolicy initial_policy(const RunConfig& cfg);

/// The IL batch config actually used: the batch is capped at the dataset size.
IlBatchConfig effective_il_config(const RunConfig& cfg, std::size_t dataset_size);

PretrainSummary cmd_pretrain(const PretrainOptions& opts);

// ------------------------------------------------------------ finetune

struct FinetuneOptions {
    RunConfig cfg;
    std::optional<std::filesystem::path> checkpoint;  // absent: random initialization
    std::filesystem::path demos;
    std::filesystem::path out_dir;  // log.ndjson, final.ckpt, best.ckpt (last_good.ckpt on divergence)
    bool wall_time = false;
};

struct FinetuneSummary {
    std::size_t cycles = 0;
    std::int64_t env_steps = 0;
    double final_return = 0.0;
    double final_il_loss = 0.0;
    std::optional<double> final_eval_return;
    std::optional<double> final_eval_success;
    std::optional<double> best_eval_return;
    std::optional<double> best_eval_success;
};

/// Throws DivergenceError (after writing last_good.ckpt and a divergence
/// record) when training blows up.
FinetuneSummary cmd_finetune(const FinetuneOptions& opts);

// ------------------------------------------------------------ sweep-m

struct SweepOptions {
    RunConfig cfg;
    std::optional<std::filesystem::path> checkpoint;
    std::filesystem::path demos;
    std::filesystem::path out_dir;  // <cell>/log.ndjson ..., summary.json, summary.csv
    int jobs = 1;
    bool wall_time = false;
};

struct SweepCell {
    std::string name;  // "<mode>_m<m|inf>_s<seed>"
    RunConfig cfg;
};

/// Cells of the grid modes x m_values x seeds; m = infinity becomes one
/// rl_only cell per seed regardless of the mode list.
std::vector<SweepCell> sweep_cells(const RunConfig& cfg);

/// Runs every cell (failures are recorded in the cell's log and the sweep
/// goes on), then writes the summary. Returns the summary rows.
std::vector<RunSummary> cmd_sweep_m(const SweepOptions& opts);

/// Rebuilds summary.json / summary.csv from the cell logs under `dir` alone.
std::vector<RunSummary> reduce_sweep(const std::filesystem::path& dir);

// ------------------------------------------------------------ theory-check

struct TheoryCheckOptions {
    theory::SuiteOptions suite;
    std::optional<std::filesystem::path> report;  // JSON lines, one per check
};

struct TheoryCheckResult {
    std::vector<theory::CheckRecord> records;
    bool all_pass = false;
    std::string table;
};

TheoryCheckResult cmd_theory_check(const TheoryCheckOptions& opts);

nlohmann::json to_json(const theory::CheckRecord& r);

// ------------------------------------------------------------ plot

struct PlotOptions {
    std::vector<std::filesystem::path> logs;
    std::filesystem::path out_dir;  // curves.csv, return.svg, il_loss.svg
    int smooth_window = 1;
    int smooth_order = 2;
};

struct PlotResult {
    std::size_t csv_rows = 0;
    std::size_t curves = 0;
};

/// CSV columns: log, cycle, env_steps, updates, m_used, pattern, mean_return,
/// success_rate, il_loss, rho, grad_norm_il, grad_norm_rl, eval_return,
/// eval_success. One row per cycle record, never smoothed.
PlotResult cmd_plot(const PlotOptions& opts);

std::string curves_csv(const std::vector<std::pair<std::string, RunLog>>& logs);

}  // namespace inril
