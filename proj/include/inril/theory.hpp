#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inril/theory_constants.hpp"

namespace inril::theory {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Two quadratic objectives L(θ) = ½(θ−b)ᵀA(θ−b) with additive Gaussian
/// gradient noise of std sigma/sqrt(N) per coordinate.
struct QuadraticPair {
    Mat A_rl, A_il;
    Vec b_rl, b_il;
    double sigma_il = 0.0;
    double sigma_rl = 0.0;
    std::int64_t N_il = 1;
    std::int64_t N_rl = 1;

    int dim() const { return static_cast<int>(b_rl.size()); }
    /// Throws ShapeError / ConfigError on inconsistent sizes, asymmetry or
    /// a matrix that is not positive definite.
    void validate() const;

    double loss_rl(const Vec& th) const;
    double loss_il(const Vec& th) const;
    Vec grad_rl(const Vec& th) const;
    Vec grad_il(const Vec& th) const;
    double L_rl() const;  // largest eigenvalue of A_rl
    double L_il() const;
    /// E|g_hat − g|^2 for a single sample: dim · sigma^2.
    double sigma2_rl() const;
    double sigma2_il() const;
};

/// Random SPD matrix Q diag(λ) Qᵀ with eigenvalues log-uniform in [lo, hi].
Mat random_spd(int dim, double lo, double hi, std::uint64_t seed);

/// Constants for `pair` with exact L and σ² and the given c's.
TheoryConstants constants_for(const QuadraticPair& pair, double c_il, double c_rl);

/// Throws ConfigError unless the L's match the eigenvalues (rel. 1e-9), the
/// σ²'s and N's match the pair, and c's lie in (0, 1).
void check_constants(const QuadraticPair& pair, const TheoryConstants& c);

struct Schedule {
    enum class Kind { kRlOnly, kInril, kAdaptive } kind = Kind::kRlOnly;
    int m = 1;             // fixed ratio for kInril
    int adaptive_cap = 50;  // upper clamp for kAdaptive

    static Schedule rl_only() { return {}; }
    static Schedule inril(int m) { return {Kind::kInril, m, 50}; }
    static Schedule adaptive(int cap = 50) { return {Kind::kAdaptive, 1, cap}; }
};

struct UpdateRecord {
    bool is_il = false;
    std::int64_t cycle = 0;
    Vec theta_after;
    double loss_rl = 0.0;  // exact, after the update
    double loss_il = 0.0;
    double grad_rl_norm = 0.0;
    double grad_il_norm = 0.0;
};

/// Measurements at the start θ_t of a cycle (exact gradients).
struct CycleSummary {
    std::int64_t cycle = 0;
    int m = 0;
    double loss_rl = 0.0;
    double loss_il = 0.0;
    double grad_rl_norm = 0.0;
    double grad_il_norm = 0.0;
    double rho = 0.0;
    /// min over the RL steps j of |∇L_RL(θ_{t+j})|² / |∇L_RL(θ_t)|².
    double min_intermediate_ratio = 1.0;
};

struct TraceLog {
    Schedule schedule;
    bool il_tracked = false;  // false for rl_only traces
    Vec theta0;
    std::vector<CycleSummary> cycles;
    std::vector<UpdateRecord> updates;  // empty unless requested
    Vec theta_final;
};

struct RunOptions {
    bool record_updates = true;
    bool track_il = true;  // also measure IL quantities in rl_only runs
};

/// Runs `T_cycles` cycles (one RL step per cycle for rl_only, 1 IL step and
/// m RL steps for interleaved schedules) from theta0.
TraceLog run_schedule(const QuadraticPair& pair, const Schedule& schedule, std::int64_t T_cycles,
                      const TheoryConstants& consts, std::uint64_t seed, const Vec& theta0,
                      const RunOptions& opts = {});

/// −Σ_t (c_IL ρ(t)/L_IL)|∇L_IL(θ_t)||∇L_RL(θ_t)| − c_IL² σ²_IL T/(2 L_IL N_IL)
/// over the first T cycles of the trace (all when T is absent).
double delta_il_rl(const TraceLog& trace, const TheoryConstants& consts, std::optional<std::int64_t> T = std::nullopt);

struct EfficiencyRatio {
    double ratio = 0.0;
    double beta = 0.0;
};

/// (m̄/(1+m̄)) · gap/(gap − Δ) where gap = L_RL(L_RL(θ₀) − L*). DomainError
/// unless Δ < gap.
EfficiencyRatio efficiency_ratio(const TheoryConstants& consts, double m_bar, double delta, double L_rl_gap);

/// β at which the efficiency ratio equals 1: 1/(1+m̄).
double break_even_beta(double m_bar);

struct ConditionCheck {
    bool holds = false;
    double lhs = 0.0;  // Δ
    double rhs = 0.0;  // L_RL(L_RL(θ₀) − L*)/(m+1)
    double margin = 0.0;
};

ConditionCheck check_theorem2_condition(const QuadraticPair& pair, const TraceLog& trace, const TheoryConstants& consts,
                                        int m);

struct BoundCheck {
    std::int64_t T = 0;
    double lhs = 0.0;  // empirical min |∇L_RL|² over cycle starts t < T
    double rhs = 0.0;
    bool holds = false;
};

/// RL-only bound 2 L (L(θ₀)−L*)/(c(1−c/2)T) + cσ²/((1−c/2)N) for every T in
/// 1..cycles. `delta` weakens the progress factor by (1−δ)².
std::vector<BoundCheck> check_rl_bound(const QuadraticPair& pair, const TraceLog& trace, const TheoryConstants& consts);

/// Interleaved bound 2(L(L(θ₀)−L*) − Δ)/(c(1−c/2) m̄ T) + cσ²/((1−c/2)N) with
/// Δ and m̄ taken over the first T cycles, for every T in 1..cycles.
std::vector<BoundCheck> check_inril_bound(const QuadraticPair& pair, const TraceLog& trace,
                                          const TheoryConstants& consts);

/// Smallest δ ≥ 0 with |∇L_RL(θ_{t+j})|² ≥ (1−δ)²|∇L_RL(θ_t)|² over the trace.
double implied_delta(const TraceLog& trace);

/// c_RL σ²_RL / ((1 − c_RL/2) N_RL).
double noise_floor(const TheoryConstants& consts);

struct UpdateCounts {
    std::int64_t T_rl_only = 0;
    std::int64_t T_inril_total = 0;
    std::int64_t inril_cycles = 0;
};

/// Total parameter updates until the first cycle start whose running minimum
/// of the exact |∇L_RL|² is ≤ epsilon. BudgetExceededError when epsilon is at
/// or below the noise floor or either run needs more than `max_updates`.
UpdateCounts empirical_update_counts(const QuadraticPair& pair, const TheoryConstants& consts, int m, double epsilon,
                                     std::uint64_t seed, const Vec& theta0, std::int64_t max_updates = 1000000);

/// θ* = (1−(1−α)^m)/(1−(1−α)^{m+1}) for targets b_IL = 0, b_RL = 1, unit curvature.
double affine_fixed_point(double alpha, int m);

/// Simulates the 1-D cycle map for `cycles` cycles from θ = 0.
double simulate_affine_cycles(double alpha, int m, int cycles);

/// ρ computed from the analytic gradients at θ.
double analytic_rho(const QuadraticPair& pair, const Vec& theta);

// ------------------------------------------------------------ double well

/// L_RL = (x²−1)² + 0.3x + y², L_IL = ½|θ − (−1, 0)|². Not a quadratic; used
/// only for the qualitative escape demo.
struct DoubleWellResult {
    double final_x_rl_only = 0.0;
    double final_x_inril = 0.0;
    double final_loss_rl_only = 0.0;
    double final_loss_inril = 0.0;
};

DoubleWellResult double_well_demo(int m, double alpha_rl, double alpha_il, int cycles);

// ------------------------------------------------------------ suite

struct CheckRecord {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool pass = false;
    double margin = 0.0;
    std::string detail;
};

struct SuiteOptions {
    std::uint64_t seed = 0;
    int bound_runs = 60;       // half noiseless, half noisy
    std::int64_t bound_T = 200;
    int paired_seeds = 10;
    double l_scale = 1.0;      // multiplies every supplied L (negative control)
};

/// Runs every check of the testbed. Records are in a fixed order.
std::vector<CheckRecord> run_suite(const SuiteOptions& opts);

/// Pieces of the suite, exposed for tests.
struct BoundFamilyResult {
    int runs = 0;
    int rl_violations = 0;
    int inril_violations = 0;
    double worst_rl_margin = 0.0;     // min over runs and T of rhs − lhs
    double worst_inril_margin = 0.0;
};

/// Generic random instance used by the bound checks.
struct RandomInstance {
    QuadraticPair pair;
    TheoryConstants consts;
    Vec theta0;
    int m = 1;
};

RandomInstance random_instance(std::uint64_t seed, bool noisy);

BoundFamilyResult check_bound_family(std::uint64_t seed, int runs, std::int64_t T, double l_scale = 1.0);

/// Aligned pair: ill-conditioned A_RL, isotropic A_IL, b_IL = b_RL.
RandomInstance aligned_instance(std::uint64_t seed, bool noisy);

/// IL gradient ≈ 0 throughout: A_IL is negligible on the block RL moves in
/// and b_IL = θ₀ on the block it is stiff in.
RandomInstance zero_benefit_instance(std::uint64_t seed);

}  // namespace inril::theory
