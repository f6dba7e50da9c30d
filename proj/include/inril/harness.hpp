#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inril/config.hpp"
#include "inril/interleave.hpp"

namespace inril {

// ------------------------------------------------------------ run log

/// Newline-delimited JSON log. The first line is a header
///   {"type": "header", "tool": "inril", "version", "command", "seed", "config", "inputs"}
/// and every later line is one self-describing record ("cycle", "pretrain_step",
/// "pretrain_eval", "pretrain_summary", "divergence", "end"). Each line is
/// flushed as soon as it is written.
class RunLogWriter {
public:
    RunLogWriter(const std::filesystem::path& path, const std::string& command, const RunConfig& cfg,
                 const nlohmann::json& inputs = nlohmann::json::object());
    void write(const nlohmann::json& record);
    /// Cycle record; env_steps and updates must not decrease (UsageError).
    void write_cycle(const CycleRecord& rec, std::optional<double> wall_time = std::nullopt);
    std::size_t records_written() const { return count_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::size_t count_ = 0;
    std::int64_t last_env_steps_ = -1;
    std::int64_t last_updates_ = -1;
};

/// NaN and infinities become null so every line stays valid JSON.
nlohmann::json json_number(double v);

nlohmann::json cycle_record_json(const CycleRecord& rec, std::optional<double> wall_time = std::nullopt);

struct RunLog {
    nlohmann::json header;
    std::vector<nlohmann::json> records;  // everything after the header, in order

    std::vector<nlohmann::json> cycles() const;
    /// Values of `field` over cycle records; null becomes NaN.
    std::vector<double> cycle_series(const std::string& field) const;
};

/// ParseError naming the file and line for malformed input, a missing header,
/// or cycle records lacking required fields.
RunLog read_run_log(const std::filesystem::path& path);
RunLog parse_run_log(const std::string& text, const std::string& name = "<log>");

// ------------------------------------------------------------ reductions

/// True when the series climbs above its first value and some later value
/// sits at least `drop` (relative to |running max|) below the running max.
bool double_descent_flag(const std::vector<double>& series, double drop = 0.2);

/// Largest relative drop below the running max after the series has risen
/// above its first value (0 when it never does).
double max_relative_drop(const std::vector<double>& series);

/// Trapezoidal area under y(x) divided by the x-range; y[0] for a single point.
double normalized_auc(const std::vector<double>& x, const std::vector<double>& y);

struct RunSummary {
    std::string name;
    std::string mode;
    std::string m;  // integer, "adaptive" or "infinity"
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::size_t cycles = 0;
    std::int64_t env_steps = 0;
    double final_return = 0.0;
    double final_il_loss = 0.0;
    double auc_return = 0.0;
    double max_il_drop = 0.0;
    bool double_descent = false;
    std::optional<double> final_eval_return;
    std::optional<double> final_eval_success;
};

/// Pure reduction of one finetune log.
RunSummary summarize_log(const RunLog& log, const std::string& name);

nlohmann::json to_json(const RunSummary& s);
std::string summary_csv(const std::vector<RunSummary>& rows);

// ------------------------------------------------------------ smoothing

/// Savitzky-Golay filter: least-squares polynomial of degree `order` over a
/// centered window of odd length `window`; near the ends the polynomial fitted
/// to the first/last full window is evaluated. window == 1 returns the input.
std::vector<double> savgol_filter(const std::vector<double>& y, int window, int order);

// ------------------------------------------------------------ plotting

struct Curve {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart with one polyline per curve and a legend. Points
/// with non-finite y are skipped.
std::string render_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& x_label,
                       const std::string& y_label);

}  // namespace inril
