#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inril/envs.hpp"
#include "inril/il.hpp"
#include "inril/mlp.hpp"
#include "inril/param_vector.hpp"
#include "inril/residual.hpp"
#include "inril/rl.hpp"
#include "inril/theory_constants.hpp"

namespace inril {

// ------------------------------------------------------------ gradient tools

/// rho = -cos(g_il, g_rl): +1 for opposing gradients, -1 for aligned ones.
/// Returns 0 when either norm is below 1e-12.
double measure_alignment(const ParamVector& g_il, const ParamVector& g_rl);

/// Conflict-free combination of two gradients. When they do not conflict the
/// plain sum is returned unchanged; otherwise each is projected onto the normal
/// plane of the *original* other one and the projections are summed. The result
/// has a nonnegative inner product with both inputs.
ParamVector dual_cone_combine(const ParamVector& g_il, const ParamVector& g_rl);

// ------------------------------------------------------------ schedule

enum class Mode { kFullNetSurgery, kFullNetNaive, kNetworkSeparation, kRlOnly, kIlOnly, kBcLossReg };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);  // ConfigError on unknown names

struct InterleaveConfig {
    Mode mode = Mode::kFullNetSurgery;
    int m = 5;                 // RL updates per IL update when fixed
    bool adaptive = false;     // m(t) from the square-root rule
    double alpha_il = 1e-3;
    double alpha_rl = 0.02;    // overrides RlConfig::lr inside run_inril
    double bc_reg_weight = 0.0;
    int adaptive_floor = 1;
    int adaptive_max = 50;
    int adaptive_initial_m = 5;  // used until gradient statistics exist
    int ema_window = 20;
    bool fresh_rl_grad_for_surgery = false;
    double residual_scale = 0.1;
    std::vector<std::size_t> residual_hidden{16, 16};
    std::vector<std::size_t> value_hidden{32, 32};
    int eval_every_cycles = 0;   // 0 = only after the final cycle
    int eval_episodes = 100;

    void validate() const;
};

/// Step-by-step bookkeeping of an interleaved run.
struct ScheduleState {
    std::int64_t cycle = 0;
    std::int64_t updates_done = 0;
    std::int64_t il_updates = 0;
    std::int64_t rl_updates = 0;
    std::int64_t env_steps = 0;
    std::vector<std::pair<std::int64_t, double>> rho_history;
    std::vector<std::pair<double, double>> grad_norms;  // (|grad IL|, |grad RL|)
    std::vector<int> m_history;

    // Exponential moving averages feeding the adaptive ratio.
    bool has_stats = false;
    double ema_grad_il = 0.0;
    double ema_grad_rl = 0.0;
    double ema_rho = 0.0;
    double ema_sigma2_il = 0.0;
    double ema_L_il = 0.0;
    double ema_L_rl = 0.0;

    /// Appends one cycle's measurements and updates the EMAs (window `window`).
    void record(double rho, double grad_il, double grad_rl, int window);
};

/// Square-root rule for m(t) evaluated on raw numbers:
///   max{1, sqrt(|gRL|^2 / (rho |gIL| |gRL| - c_IL L_RL sigma2_IL / (2 L_IL^2 N_IL)))},
/// returning `floor` when the denominator is not positive, rounded to the
/// nearest integer and clamped to [1, cap].
int adaptive_m_value(double grad_rl_norm, double grad_il_norm, double rho, const TheoryConstants& c, int floor = 1,
                     int cap = 50);

/// Unrounded square-root rule (0 when the denominator is not positive).
double sqrt_rule_raw(double grad_rl_norm, double grad_il_norm, double rho, const TheoryConstants& c);

/// Balance-equation candidate (RL progress of m steps equals the IL step's
/// damage), logged next to the square-root rule for comparison.
double balance_rule_raw(double grad_rl_norm, double grad_il_norm, double rho, const TheoryConstants& c);

/// The adaptive rule on the EMA-smoothed statistics of `state`.
int adaptive_m(const ScheduleState& state, const TheoryConstants& constants, int floor = 1, int cap = 50);

/// Constants estimated online from the EMAs (secant curvature estimates and
/// the per-sample IL gradient variance).
TheoryConstants estimated_constants(const ScheduleState& state, double alpha_il, double alpha_rl, std::int64_t N_il);

// ------------------------------------------------------------ run loop

struct CycleRecord {
    std::int64_t cycle = 0;
    std::string pattern;        // e.g. "IL,RL,RL,RL"
    int m_used = 0;
    std::int64_t env_steps = 0;  // cumulative
    std::int64_t updates = 0;    // cumulative parameter updates (IL + RL)
    std::int64_t il_updates = 0;
    std::int64_t rl_updates = 0;
    double mean_return = 0.0;    // rollouts collected during the cycle
    double success_rate = 0.0;
    double il_loss = 0.0;        // full-batch NLL of the acting policy at cycle end
    double rho = 0.0;            // NaN when not measured
    double grad_norm_il = 0.0;
    double grad_norm_rl = 0.0;
    double m_sqrt_rule = 0.0;    // adaptive diagnostics, 0 when unused
    double m_balance_rule = 0.0;
    std::optional<double> eval_return;   // greedy evaluation when scheduled
    std::optional<double> eval_success;
};

enum class UpdateKind { kIl, kRl };

struct UpdateEvent {
    UpdateKind kind;
    std::int64_t cycle;
    const ParamVector& acting_params;     // parameters touched by the update
    const ParamVector* base_params;       // network_separation only
    const ParamVector* residual_params;   // network_separation only
};

struct RunHooks {
    std::function<void(const UpdateEvent&)> on_update;
    std::function<void(const CycleRecord&)> on_cycle;
    /// Called with the last finite policy before a DivergenceError propagates.
    std::function<void(const GaussianMlpPolicy&, const std::optional<ResidualPolicyPair>&)> on_divergence;
};

struct InrilResult {
    GaussianMlpPolicy policy;                 // full-net modes: the trained policy; separation: the base
    std::optional<ResidualPolicyPair> pair;   // network_separation only
    ValueNet value;
    std::vector<CycleRecord> records;
    ScheduleState state;
};

/// Seed passed to rl_update_cycle for the k-th RL update of a run.
std::uint64_t rl_update_seed(std::uint64_t run_seed, std::uint64_t k);

/// The value network every run starts from.
ValueNet make_value_net(const InterleaveConfig& cfg, std::uint64_t run_seed);

/// Runs cycles of one IL step followed by m(t) RL updates (modes vary the
/// details) until the next cycle would exceed `budget_env_steps`.
InrilResult run_inril(const GaussianMlpPolicy& pretrained, const DemoDataset& demos, const EnvConfig& env,
                      const InterleaveConfig& cfg, const RlConfig& rl_cfg, const IlBatchConfig& il_cfg,
                      std::int64_t budget_env_steps, std::uint64_t seed, const RunHooks& hooks = {});

}  // namespace inril
