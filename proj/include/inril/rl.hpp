#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "inril/actor.hpp"
#include "inril/envs.hpp"
#include "inril/mlp.hpp"

namespace inril {

struct RlConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double lr = 0.02;                   // alpha_RL
    std::size_t steps_per_batch = 1024;  // N_RL
    double value_lr = 0.05;
    int value_epochs = 10;
    bool normalize_advantages = true;

    void validate() const;
};

/// Default batch sizes differ per env: 2048 steps on the gridworld, 1024 on the point mass.
RlConfig default_rl_config(EnvKind kind);

struct Trajectory {
    std::vector<Transition> steps;
    bool terminal = false;   // ended in the goal (no bootstrap)
    bool truncated = false;  // cut by the horizon or the batch end (bootstrap from V(next_obs))
    bool complete = false;   // the episode ended inside this batch
    double episode_return = 0.0;
};

/// Transitions grouped by trajectory. Per-transition arrays (advantages,
/// returns, values) follow trajectory-major order.
struct RolloutBatch {
    std::vector<Trajectory> trajectories;
    std::vector<double> values;
    std::vector<double> advantages;
    std::vector<double> returns;
    bool has_advantages = false;

    std::size_t num_steps() const;
    /// Mean undiscounted return of completed episodes (all episodes if none completed).
    double mean_return() const;
    double success_rate() const;
    std::size_t completed_episodes() const;

    template <class F>
    void for_each_transition(F&& f) const {
        std::size_t i = 0;
        for (const auto& tr : trajectories) {
            for (const auto& t : tr.steps) f(i++, t);
        }
    }
};

/// Exactly cfg.steps_per_batch environment steps, sampling actions from the
/// actor and recording their log-probabilities. Episode reset seeds and action
/// noise come from one generator seeded with `seed`.
RolloutBatch collect_rollouts(const Actor& actor, const EnvConfig& env, const RlConfig& cfg, std::uint64_t seed);
RolloutBatch collect_rollouts(const GaussianMlpPolicy& policy, const EnvConfig& env, const RlConfig& cfg,
                              std::uint64_t seed);

/// GAE(gamma, lambda) advantages and returns = advantages + V(s). Advantages
/// are normalized afterwards when cfg.normalize_advantages is set; returns keep
/// the raw scale.
void compute_gae(RolloutBatch& batch, const ValueNet& valuenet, const RlConfig& cfg);

struct SurrogateResult {
    double loss = 0.0;
    ParamVector grad;
    double clip_fraction = 0.0;
    double mean_ratio = 1.0;
};

/// loss = -mean(min(r A, clip(r, 1 - eps, 1 + eps) A)) with r = exp(logp - old_logp).
SurrogateResult rl_loss_and_grad(const Actor& actor, const RolloutBatch& batch, const RlConfig& cfg);
SurrogateResult rl_loss_and_grad(const GaussianMlpPolicy& policy, const RolloutBatch& batch, const RlConfig& cfg);

/// Mean 0.5 (V(s) - return)^2 over the batch, with its gradient.
LossGrad value_loss_and_grad(const ValueNet& valuenet, const RolloutBatch& batch);

struct RlCycleStats {
    double mean_return = 0.0;
    double success_rate = 0.0;
    std::size_t episodes = 0;
    std::size_t env_steps = 0;
    double policy_loss = 0.0;
    double grad_norm = 0.0;  // |grad L_RL| before any hook modifies it
    double clip_fraction = 0.0;
    double value_loss_before = 0.0;
    double value_loss_after = 0.0;
};

struct RlCycleResult {
    RlCycleStats stats;
    ParamVector policy_grad;  // the RL gradient at the pre-update parameters
    RolloutBatch batch;       // with advantages, for reuse by later gradient evaluations
};

/// Optional edit of the policy gradient right before the step (used to add a
/// behavior-cloning term).
using GradientHook = std::function<void(ParamVector& grad)>;

/// collect -> GAE -> one SGD step on the actor -> cfg.value_epochs full-batch
/// value steps.
RlCycleResult rl_update_cycle(Actor& actor, ValueNet& valuenet, const EnvConfig& env, const RlConfig& cfg,
                              std::uint64_t seed, const GradientHook& hook = {});

struct EvalResult {
    double mean_return = 0.0;
    double success_rate = 0.0;
};

/// Runs `episodes` seeded episodes with the mean (greedy) action.
EvalResult evaluate_policy(const Actor& actor, const EnvConfig& env, int episodes, std::uint64_t seed);
EvalResult evaluate_policy(const GaussianMlpPolicy& policy, const EnvConfig& env, int episodes, std::uint64_t seed);

}  // namespace inril
