#include "inril/rl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "inril/errors.hpp"
#include "inril/random.hpp"

namespace inril {

void RlConfig::validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("rl.gamma must lie in [0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("rl.gae_lambda must lie in [0, 1]");
    if (!(clip_eps > 0.0)) throw ConfigError("rl.clip_eps must be positive");
    if (!(lr >= 0.0)) throw ConfigError("alpha_rl must be nonnegative");
    if (steps_per_batch == 0) throw ConfigError("rl.steps_per_batch must be positive");
    if (!(value_lr >= 0.0)) throw ConfigError("rl.value_lr must be nonnegative");
    if (value_epochs < 0) throw ConfigError("rl.value_epochs must be nonnegative");
}

RlConfig default_rl_config(EnvKind kind) {
    RlConfig cfg;
    cfg.steps_per_batch = kind == EnvKind::kGridworld ? 2048 : 1024;
    return cfg;
}

std::size_t RolloutBatch::num_steps() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.steps.size();
    return n;
}

std::size_t RolloutBatch::completed_episodes() const {
    return static_cast<std::size_t>(
        std::count_if(trajectories.begin(), trajectories.end(), [](const Trajectory& t) { return t.complete; }));
}

double RolloutBatch::mean_return() const {
    const std::size_t done = completed_episodes();
    double total = 0.0;
    for (const auto& t : trajectories) {
        if (t.complete || done == 0) total += t.episode_return;
    }
    const std::size_t n = done == 0 ? trajectories.size() : done;
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double RolloutBatch::success_rate() const {
    const std::size_t done = completed_episodes();
    if (done == 0) return 0.0;
    std::size_t wins = 0;
    for (const auto& t : trajectories) {
        if (t.complete && t.terminal) ++wins;
    }
    return static_cast<double>(wins) / static_cast<double>(done);
}

RolloutBatch collect_rollouts(const Actor& actor, const EnvConfig& env_cfg, const RlConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (actor.obs_dim() != EnvConfig::obs_dim() || actor.act_dim() != EnvConfig::act_dim()) {
        throw ShapeError("collect_rollouts: policy dimensions do not match the environment");
    }
    Rng rng(seed);
    Env env(env_cfg);
    RolloutBatch batch;
    std::vector<double> mean, log_std, action(EnvConfig::act_dim());
    std::vector<double> obs;
    std::size_t collected = 0;
    bool need_reset = true;
    while (collected < cfg.steps_per_batch) {
        if (need_reset) {
            obs = env.reset(rng());
            batch.trajectories.emplace_back();
            need_reset = false;
        }
        Trajectory& traj = batch.trajectories.back();
        actor.distribution(obs, mean, log_std);
        for (std::size_t i = 0; i < action.size(); ++i) {
            action[i] = mean[i] + std::exp(log_std[i]) * standard_normal(rng);
        }
        const double logp = gaussian_log_prob(mean, log_std, action);
        Transition t = env.step(action);
        t.logp_behavior = logp;
        if (!std::isfinite(t.reward)) throw EnvError("collect_rollouts: non-finite reward");
        traj.episode_return += t.reward;
        obs = t.next_obs;
        const bool done = t.done;
        const bool success = t.success;
        traj.steps.push_back(std::move(t));
        ++collected;
        if (done) {
            traj.complete = true;
            traj.terminal = success;
            traj.truncated = !success;
            need_reset = true;
        }
    }
    if (!need_reset) batch.trajectories.back().truncated = true;
    return batch;
}

RolloutBatch collect_rollouts(const GaussianMlpPolicy& policy, const EnvConfig& env, const RlConfig& cfg,
                              std::uint64_t seed) {
    return collect_rollouts(MlpActor(policy), env, cfg, seed);
}

void compute_gae(RolloutBatch& batch, const ValueNet& valuenet, const RlConfig& cfg) {
    const std::size_t n = batch.num_steps();
    batch.values.assign(n, 0.0);
    batch.advantages.assign(n, 0.0);
    batch.returns.assign(n, 0.0);
    std::size_t base = 0;
    for (const auto& traj : batch.trajectories) {
        const std::size_t len = traj.steps.size();
        for (std::size_t k = 0; k < len; ++k) batch.values[base + k] = value_of(valuenet, traj.steps[k].obs);
        double next_value = 0.0;
        if (len > 0 && !traj.terminal) next_value = value_of(valuenet, traj.steps.back().next_obs);
        double gae = 0.0;
        for (std::size_t k = len; k-- > 0;) {
            const double v_next = (k + 1 < len) ? batch.values[base + k + 1] : next_value;
            const double delta = traj.steps[k].reward + cfg.gamma * v_next - batch.values[base + k];
            gae = delta + cfg.gamma * cfg.gae_lambda * gae;
            batch.advantages[base + k] = gae;
            batch.returns[base + k] = gae + batch.values[base + k];
        }
        base += len;
    }
    if (cfg.normalize_advantages && n > 0) {
        double mean = 0.0;
        for (double a : batch.advantages) mean += a;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double a : batch.advantages) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (double& a : batch.advantages) a = (a - mean) / (sd + 1e-8);
    }
    batch.has_advantages = true;
}

SurrogateResult rl_loss_and_grad(const Actor& actor, const RolloutBatch& batch, const RlConfig& cfg) {
    if (!batch.has_advantages) throw UsageError("rl_loss_and_grad: batch has no advantages (run compute_gae first)");
    const std::size_t n = batch.num_steps();
    if (n == 0) throw UsageError("rl_loss_and_grad: empty batch");
    SurrogateResult out;
    out.grad = ParamVector(actor.num_params(), 0.0);
    const double w = 1.0 / static_cast<double>(n);
    double total = 0.0;
    double ratio_sum = 0.0;
    std::size_t clipped = 0;
    batch.for_each_transition([&](std::size_t i, const Transition& t) {
        const double adv = batch.advantages[i];
        const double logp = actor.log_prob(t.obs, t.action);
        const double ratio = std::exp(logp - t.logp_behavior);
        if (!std::isfinite(ratio)) {
            throw NumericError("rl_loss_and_grad: non-finite probability ratio at transition " + std::to_string(i) +
                               " (logp " + std::to_string(logp) + ", behavior logp " +
                               std::to_string(t.logp_behavior) + ")");
        }
        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double unclipped_obj = ratio * adv;
        const double clipped_obj = clipped_ratio * adv;
        ratio_sum += ratio;
        if (unclipped_obj <= clipped_obj) {
            total += unclipped_obj;
            // d(r A)/dtheta = A r dlogp/dtheta; loss carries the minus sign and the 1/n.
            if (adv != 0.0) actor.accumulate_log_prob_grad(t.obs, t.action, -w * adv * ratio, out.grad);
        } else {
            total += clipped_obj;
            ++clipped;
        }
    });
    out.loss = -total * w;
    out.clip_fraction = static_cast<double>(clipped) * w;
    out.mean_ratio = ratio_sum * w;
    return out;
}

SurrogateResult rl_loss_and_grad(const GaussianMlpPolicy& policy, const RolloutBatch& batch, const RlConfig& cfg) {
    return rl_loss_and_grad(MlpActor(policy), batch, cfg);
}

LossGrad value_loss_and_grad(const ValueNet& valuenet, const RolloutBatch& batch) {
    if (batch.returns.size() != batch.num_steps()) throw UsageError("value_loss_and_grad: batch has no returns");
    LossGrad out;
    out.grad = ParamVector(valuenet.num_params(), 0.0);
    const std::size_t n = batch.num_steps();
    const double w = 1.0 / static_cast<double>(n);
    Mlp::Cache cache;
    double total = 0.0;
    batch.for_each_transition([&](std::size_t i, const Transition& t) {
        valuenet.forward(t.obs, cache);
        const double err = cache.activations.back()[0] - batch.returns[i];
        total += 0.5 * err * err;
        const double d[1] = {err};
        valuenet.backward(cache, d, w, out.grad);
    });
    out.loss = total * w;
    return out;
}

RlCycleResult rl_update_cycle(Actor& actor, ValueNet& valuenet, const EnvConfig& env, const RlConfig& cfg,
                              std::uint64_t seed, const GradientHook& hook) {
    RlCycleResult res;
    res.batch = collect_rollouts(actor, env, cfg, seed);
    compute_gae(res.batch, valuenet, cfg);
    SurrogateResult sr = rl_loss_and_grad(actor, res.batch, cfg);
    res.stats.mean_return = res.batch.mean_return();
    res.stats.success_rate = res.batch.success_rate();
    res.stats.episodes = res.batch.completed_episodes();
    res.stats.env_steps = res.batch.num_steps();
    res.stats.policy_loss = sr.loss;
    res.stats.grad_norm = norm(sr.grad);
    res.stats.clip_fraction = sr.clip_fraction;
    res.policy_grad = sr.grad;
    ParamVector step_grad = std::move(sr.grad);
    if (hook) hook(step_grad);
    if (!step_grad.all_finite()) throw NumericError("rl_update_cycle: non-finite policy gradient");
    if (cfg.lr != 0.0) actor.apply_step(step_grad, cfg.lr);

    for (int e = 0; e < cfg.value_epochs; ++e) {
        LossGrad vl = value_loss_and_grad(valuenet, res.batch);
        if (e == 0) res.stats.value_loss_before = vl.loss;
        valuenet.apply_step(vl.grad, cfg.value_lr);
    }
    res.stats.value_loss_after =
        cfg.value_epochs > 0 ? value_loss_and_grad(valuenet, res.batch).loss : res.stats.value_loss_before;
    return res;
}

EvalResult evaluate_policy(const Actor& actor, const EnvConfig& env_cfg, int episodes, std::uint64_t seed) {
    if (episodes < 1) throw UsageError("evaluate_policy: episodes must be >= 1");
    Env env(env_cfg);
    EvalResult out;
    int wins = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        std::vector<double> obs = env.reset(derive_seed(seed, Stream::kEval, static_cast<std::uint64_t>(ep)));
        double ret = 0.0;
        bool success = false;
        while (!env.terminal()) {
            Transition t = env.step(actor.mean_action(obs));
            ret += t.reward;
            success = t.success;
            obs = std::move(t.next_obs);
        }
        out.mean_return += ret;
        wins += success ? 1 : 0;
    }
    out.mean_return /= episodes;
    out.success_rate = static_cast<double>(wins) / episodes;
    return out;
}

EvalResult evaluate_policy(const GaussianMlpPolicy& policy, const EnvConfig& env, int episodes, std::uint64_t seed) {
    return evaluate_policy(MlpActor(policy), env, episodes, seed);
}

}  // namespace inril
