#include "inril/interleave.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "inril/errors.hpp"
#include "inril/random.hpp"

namespace inril {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void TheoryConstants::validate() const {
    if (!(c_il > 0.0 && c_il < 1.0) || !(c_rl > 0.0 && c_rl < 1.0)) throw ConfigError("c_IL and c_RL must lie in (0, 1)");
    if (!(L_il > 0.0) || !(L_rl > 0.0)) throw ConfigError("smoothness constants must be positive");
    if (sigma2_il < 0.0 || sigma2_rl < 0.0) throw ConfigError("variances must be nonnegative");
    if (N_il < 1 || N_rl < 1) throw ConfigError("batch sizes must be >= 1");
    if (eps_il < 0.0 || delta < 0.0) throw ConfigError("eps_IL and delta must be nonnegative");
}

double measure_alignment(const ParamVector& g_il, const ParamVector& g_rl) {
    const double d = dot(g_il, g_rl);
    const double n_il = squared_norm(g_il);
    const double n_rl = squared_norm(g_rl);
    if (std::sqrt(n_il) < 1e-12 || std::sqrt(n_rl) < 1e-12) return 0.0;
    const double cosine = d / (std::sqrt(n_il) * std::sqrt(n_rl));
    return std::clamp(-cosine, -1.0, 1.0);
}

ParamVector dual_cone_combine(const ParamVector& g_il, const ParamVector& g_rl) {
    const double d = dot(g_il, g_rl);
    if (d >= 0.0) return g_il + g_rl;
    // d < 0 implies both norms are nonzero.
    ParamVector il_proj = g_il;
    add_scaled(il_proj, g_rl, -d / squared_norm(g_rl));
    ParamVector rl_proj = g_rl;
    add_scaled(rl_proj, g_il, -d / squared_norm(g_il));
    return il_proj + rl_proj;
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::kFullNetSurgery: return "full_net_surgery";
        case Mode::kFullNetNaive: return "full_net_naive";
        case Mode::kNetworkSeparation: return "network_separation";
        case Mode::kRlOnly: return "rl_only";
        case Mode::kIlOnly: return "il_only";
        case Mode::kBcLossReg: return "bc_loss_reg";
    }
    return "?";
}

Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::kFullNetSurgery, Mode::kFullNetNaive, Mode::kNetworkSeparation, Mode::kRlOnly, Mode::kIlOnly,
                   Mode::kBcLossReg}) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown mode '" + s +
                      "' (valid: full_net_surgery, full_net_naive, network_separation, rl_only, il_only, bc_loss_reg)");
}

void InterleaveConfig::validate() const {
    if (!adaptive && m < 1) throw ConfigError("m must be >= 1");
    if (!(alpha_il >= 0.0) || !(alpha_rl >= 0.0)) throw ConfigError("learning rates must be nonnegative");
    if (bc_reg_weight < 0.0) throw ConfigError("bc_reg_weight must be nonnegative");
    if (bc_reg_weight > 0.0 && mode != Mode::kBcLossReg) throw ConfigError("bc_reg_weight > 0 requires mode bc_loss_reg");
    if (adaptive_floor < 1 || adaptive_max < adaptive_floor) throw ConfigError("adaptive bounds must satisfy 1 <= floor <= max");
    if (adaptive_initial_m < 1) throw ConfigError("adaptive_initial_m must be >= 1");
    if (ema_window < 1) throw ConfigError("ema_window must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (eval_every_cycles < 0) throw ConfigError("eval_every_cycles must be >= 0");
}

void ScheduleState::record(double rho, double grad_il, double grad_rl, int window) {
    rho_history.emplace_back(cycle, rho);
    grad_norms.emplace_back(grad_il, grad_rl);
    const double beta = 1.0 - 2.0 / (static_cast<double>(window) + 1.0);
    if (!has_stats) {
        ema_rho = rho;
        ema_grad_il = grad_il;
        ema_grad_rl = grad_rl;
        has_stats = true;
    } else {
        ema_rho = beta * ema_rho + (1.0 - beta) * rho;
        ema_grad_il = beta * ema_grad_il + (1.0 - beta) * grad_il;
        ema_grad_rl = beta * ema_grad_rl + (1.0 - beta) * grad_rl;
    }
}

double sqrt_rule_raw(double grad_rl_norm, double grad_il_norm, double rho, const TheoryConstants& c) {
    const double noise = c.c_il * c.L_rl * c.sigma2_il / (2.0 * c.L_il * c.L_il * static_cast<double>(c.N_il));
    const double denom = rho * grad_il_norm * grad_rl_norm - noise;
    if (!(denom > 0.0)) return 0.0;
    return std::sqrt(grad_rl_norm * grad_rl_norm / denom);
}

double balance_rule_raw(double grad_rl_norm, double grad_il_norm, double rho, const TheoryConstants& c) {
    const double progress = c.c_rl * (1.0 - c.c_rl / 2.0) / c.L_rl * grad_rl_norm * grad_rl_norm;
    if (!(progress > 0.0)) return 0.0;
    const double damage = c.c_il / c.L_il * rho * grad_il_norm * grad_rl_norm +
                          c.L_rl * c.c_il * c.c_il * c.sigma2_il / (2.0 * c.L_il * c.L_il * static_cast<double>(c.N_il));
    return damage / progress;
}

int adaptive_m_value(double grad_rl_norm, double grad_il_norm, double rho, const TheoryConstants& c, int floor,
                     int cap) {
    const double raw = sqrt_rule_raw(grad_rl_norm, grad_il_norm, rho, c);
    if (raw <= 0.0 || !std::isfinite(raw)) return std::clamp(floor, 1, cap);
    const double m = std::max(1.0, raw);
    if (m >= static_cast<double>(cap)) return cap;
    return std::clamp(static_cast<int>(std::lround(m)), 1, cap);
}

int adaptive_m(const ScheduleState& state, const TheoryConstants& constants, int floor, int cap) {
    if (!state.has_stats) return std::clamp(floor, 1, cap);
    return adaptive_m_value(state.ema_grad_rl, state.ema_grad_il, state.ema_rho, constants, floor, cap);
}

TheoryConstants estimated_constants(const ScheduleState& state, double alpha_il, double alpha_rl, std::int64_t N_il) {
    TheoryConstants c;
    c.L_il = std::max(state.ema_L_il, 1e-8);
    c.L_rl = std::max(state.ema_L_rl, 1e-8);
    c.c_il = alpha_il * c.L_il;
    c.c_rl = alpha_rl * c.L_rl;
    c.sigma2_il = state.ema_sigma2_il;
    c.N_il = std::max<std::int64_t>(N_il, 1);
    c.N_rl = 1;
    return c;
}

std::uint64_t rl_update_seed(std::uint64_t run_seed, std::uint64_t k) { return derive_seed(run_seed, Stream::kRollout, k); }

ValueNet make_value_net(const InterleaveConfig& cfg, std::uint64_t run_seed) {
    return Mlp::initialized(value_spec(EnvConfig::obs_dim(), cfg.value_hidden), derive_seed(run_seed, Stream::kInit, 1));
}

namespace {

void ema_update(double& ema, bool first, double value, int window) {
    const double beta = 1.0 - 2.0 / (static_cast<double>(window) + 1.0);
    ema = first ? value : beta * ema + (1.0 - beta) * value;
}

void require_finite_params(const Actor& actor, const char* where, std::int64_t cycle) {
    if (!actor.params().all_finite()) {
        throw DivergenceError(std::string("training diverged: non-finite parameters after ") + where + " in cycle " +
                              std::to_string(cycle));
    }
}

}  // namespace

InrilResult run_inril(const GaussianMlpPolicy& pretrained, const DemoDataset& demos, const EnvConfig& env,
                      const InterleaveConfig& cfg, const RlConfig& rl_cfg_in, const IlBatchConfig& il_cfg,
                      std::int64_t budget_env_steps, std::uint64_t seed, const RunHooks& hooks) {
    cfg.validate();
    demos.validate();
    il_cfg.validate(demos.size());
    RlConfig rl_cfg = rl_cfg_in;
    rl_cfg.lr = cfg.alpha_rl;
    rl_cfg.validate();
    if (pretrained.spec().input_dim() != EnvConfig::obs_dim() || pretrained.spec().output_dim() != EnvConfig::act_dim()) {
        throw ShapeError("run_inril: pretrained policy does not match the environment dimensions");
    }

    const bool separation = cfg.mode == Mode::kNetworkSeparation;
    InrilResult res{pretrained, std::nullopt, make_value_net(cfg, seed), {}, {}};
    if (separation) {
        res.pair = ResidualPolicyPair::from_base(pretrained, cfg.residual_hidden, derive_seed(seed, Stream::kInit, 2),
                                                 cfg.residual_scale);
    }
    std::unique_ptr<Actor> acting;
    std::unique_ptr<Actor> il_actor;
    if (separation) {
        acting = std::make_unique<ResidualActor>(*res.pair);
        il_actor = std::make_unique<MlpActor>(res.pair->base);
    } else {
        acting = std::make_unique<MlpActor>(res.policy);
        il_actor = std::make_unique<MlpActor>(res.policy);
    }

    const auto N = static_cast<std::int64_t>(rl_cfg.steps_per_batch);
    auto cycle_cost = [&](int m) -> std::int64_t {
        if (cfg.mode == Mode::kBcLossReg || cfg.mode == Mode::kRlOnly) return N;
        std::int64_t cost = static_cast<std::int64_t>(m) * N;
        if (cfg.mode == Mode::kFullNetSurgery && cfg.fresh_rl_grad_for_surgery) cost += N;
        return cost;
    };
    auto next_m = [&]() -> int {
        if (cfg.mode == Mode::kBcLossReg || cfg.mode == Mode::kRlOnly) return 1;
        if (!cfg.adaptive) return cfg.m;
        if (!res.state.has_stats) return cfg.adaptive_initial_m;
        const TheoryConstants c = estimated_constants(res.state, cfg.alpha_il, cfg.alpha_rl, static_cast<std::int64_t>(il_cfg.batch_size));
        return adaptive_m(res.state, c, cfg.adaptive_floor, cfg.adaptive_max);
    };
    // Largest m the remaining budget allows, or the planned m when it fits.
    auto affordable_m = [&](int planned) -> int {
        const std::int64_t remaining = budget_env_steps - res.state.env_steps;
        if (cycle_cost(planned) <= remaining) return planned;
        if (!cfg.adaptive || cfg.mode == Mode::kBcLossReg || cfg.mode == Mode::kRlOnly) return 0;
        int m = planned;
        while (m > 0 && cycle_cost(m) > remaining) --m;
        return m;
    };

    int m_t = next_m();
    if (cycle_cost(m_t) > budget_env_steps) {
        throw UsageError("run_inril: budget of " + std::to_string(budget_env_steps) +
                         " env steps is smaller than one cycle (" + std::to_string(cycle_cost(m_t)) + ")");
    }

    std::optional<RolloutBatch> last_batch;
    std::uint64_t rl_k = 0;
    std::uint64_t il_k = 0;
    std::uint64_t rollout_only_k = 0;
    ParamVector prev_il_grad;
    ParamVector prev_il_params;
    ParamVector prev_rl_grad;
    ParamVector prev_rl_params;
    bool first_L_il = true;
    bool first_L_rl = true;
    bool first_sigma = true;

    auto emit_update = [&](UpdateKind kind) {
        if (!hooks.on_update) return;
        UpdateEvent ev{kind, res.state.cycle, kind == UpdateKind::kIl ? il_actor->params() : acting->params(),
                       separation ? &res.pair->base.params() : nullptr,
                       separation ? &res.pair->residual.params() : nullptr};
        hooks.on_update(ev);
    };

    while (true) {
        m_t = affordable_m(m_t);
        if (m_t < 1) break;

        const GaussianMlpPolicy last_good_policy = res.policy;
        const std::optional<ResidualPolicyPair> last_good_pair = res.pair;
        try {
            CycleRecord rec;
            rec.cycle = res.state.cycle;
            rec.m_used = m_t;
            rec.rho = kNaN;
            std::vector<std::string> tokens;

            // ---- IL step
            const bool does_il_step = cfg.mode == Mode::kFullNetSurgery || cfg.mode == Mode::kFullNetNaive ||
                                      cfg.mode == Mode::kNetworkSeparation || cfg.mode == Mode::kIlOnly;
            if (does_il_step) {
                if (cfg.adaptive) {
                    const double s2 = il_gradient_variance(*il_actor, demos, il_cfg, il_k);
                    ema_update(res.state.ema_sigma2_il, first_sigma, s2, cfg.ema_window);
                    first_sigma = false;
                }
                LossGrad lg = il_loss_and_grad(*il_actor, demos, il_cfg, il_k);
                ParamVector step = lg.grad;
                if (cfg.mode == Mode::kFullNetSurgery) {
                    std::optional<ParamVector> g_rl;
                    if (cfg.fresh_rl_grad_for_surgery) {
                        RolloutBatch fresh = collect_rollouts(*acting, env, rl_cfg,
                                                              derive_seed(seed, Stream::kSurgeryRollout, il_k));
                        compute_gae(fresh, res.value, rl_cfg);
                        res.state.env_steps += static_cast<std::int64_t>(fresh.num_steps());
                        g_rl = rl_loss_and_grad(*acting, fresh, rl_cfg).grad;
                    } else if (last_batch) {
                        g_rl = rl_loss_and_grad(*acting, *last_batch, rl_cfg).grad;
                    }
                    if (g_rl) step = dual_cone_combine(lg.grad, *g_rl);
                }
                il_actor->apply_step(step, cfg.alpha_il);
                ++il_k;
                ++res.state.il_updates;
                ++res.state.updates_done;
                require_finite_params(*il_actor, "IL step", res.state.cycle);
                tokens.emplace_back("IL");
                emit_update(UpdateKind::kIl);
            }

            // ---- RL updates (or rollouts only, for il_only)
            double ret_sum = 0.0;
            double succ_sum = 0.0;
            int batches = 0;
            for (int j = 0; j < m_t; ++j) {
                if (cfg.mode == Mode::kIlOnly) {
                    RolloutBatch b = collect_rollouts(*acting, env, rl_cfg,
                                                      derive_seed(seed, Stream::kRollout, rollout_only_k++));
                    res.state.env_steps += static_cast<std::int64_t>(b.num_steps());
                    ret_sum += b.mean_return();
                    succ_sum += b.success_rate();
                    ++batches;
                    tokens.emplace_back("RO");
                    continue;
                }
                ParamVector g_il_full;
                if (j == 0) g_il_full = il_full_loss_and_grad(*acting, demos).grad;
                GradientHook hook;
                if (cfg.mode == Mode::kBcLossReg) {
                    hook = [&](ParamVector& g) {
                        LossGrad lg = il_loss_and_grad(*acting, demos, il_cfg, il_k);
                        add_scaled(g, lg.grad, cfg.bc_reg_weight);
                    };
                }
                const ParamVector params_before = acting->params();
                RlCycleResult r = rl_update_cycle(*acting, res.value, env, rl_cfg, rl_update_seed(seed, rl_k), hook);
                if (cfg.mode == Mode::kBcLossReg) ++il_k;
                ++rl_k;
                ++res.state.rl_updates;
                ++res.state.updates_done;
                res.state.env_steps += static_cast<std::int64_t>(r.stats.env_steps);
                require_finite_params(*acting, "RL update", res.state.cycle);
                ret_sum += r.stats.mean_return;
                succ_sum += r.stats.success_rate;
                ++batches;
                if (j == 0) {
                    rec.rho = measure_alignment(g_il_full, r.policy_grad);
                    rec.grad_norm_il = norm(g_il_full);
                    rec.grad_norm_rl = r.stats.grad_norm;
                    if (cfg.adaptive) {
                        if (!prev_il_grad.empty() && prev_il_params.size() == params_before.size()) {
                            const double dx = norm(params_before - prev_il_params);
                            if (dx > 0.0) {
                                ema_update(res.state.ema_L_il, first_L_il, norm(g_il_full - prev_il_grad) / dx, cfg.ema_window);
                                first_L_il = false;
                            }
                        }
                        prev_il_grad = g_il_full;
                        prev_il_params = params_before;
                    }
                }
                if (cfg.adaptive) {
                    if (!prev_rl_grad.empty()) {
                        const double dx = norm(params_before - prev_rl_params);
                        if (dx > 0.0) {
                            ema_update(res.state.ema_L_rl, first_L_rl, norm(r.policy_grad - prev_rl_grad) / dx, cfg.ema_window);
                            first_L_rl = false;
                        }
                    }
                    prev_rl_grad = r.policy_grad;
                    prev_rl_params = params_before;
                }
                last_batch = std::move(r.batch);
                tokens.emplace_back(cfg.mode == Mode::kBcLossReg ? "RL+BC" : "RL");
                emit_update(UpdateKind::kRl);
            }

            rec.il_loss = il_full_loss(*acting, demos);
            if (!std::isfinite(rec.il_loss) || rec.il_loss > kDivergenceLoss) {
                throw DivergenceError("training diverged: IL loss " + std::to_string(rec.il_loss) + " in cycle " +
                                      std::to_string(res.state.cycle));
            }
            rec.mean_return = batches > 0 ? ret_sum / batches : 0.0;
            rec.success_rate = batches > 0 ? succ_sum / batches : 0.0;
            if (!std::isnan(rec.rho)) res.state.record(rec.rho, rec.grad_norm_il, rec.grad_norm_rl, cfg.ema_window);
            res.state.m_history.push_back(m_t);
            if (cfg.adaptive && res.state.has_stats) {
                const TheoryConstants c = estimated_constants(res.state, cfg.alpha_il, cfg.alpha_rl,
                                                              static_cast<std::int64_t>(il_cfg.batch_size));
                rec.m_sqrt_rule = sqrt_rule_raw(res.state.ema_grad_rl, res.state.ema_grad_il, res.state.ema_rho, c);
                rec.m_balance_rule = balance_rule_raw(res.state.ema_grad_rl, res.state.ema_grad_il, res.state.ema_rho, c);
            }
            for (std::size_t i = 0; i < tokens.size(); ++i) rec.pattern += (i ? "," : "") + tokens[i];
            rec.env_steps = res.state.env_steps;
            rec.updates = res.state.updates_done;
            rec.il_updates = res.state.il_updates;
            rec.rl_updates = res.state.rl_updates;
            ++res.state.cycle;

            m_t = next_m();
            const bool last_cycle = affordable_m(m_t) < 1;
            const bool scheduled = cfg.eval_every_cycles > 0 && res.state.cycle % cfg.eval_every_cycles == 0;
            if (last_cycle || scheduled) {
                const EvalResult ev = evaluate_policy(*acting, env, cfg.eval_episodes, derive_seed(seed, Stream::kEval));
                rec.eval_return = ev.mean_return;
                rec.eval_success = ev.success_rate;
            }
            res.records.push_back(rec);
            if (hooks.on_cycle) hooks.on_cycle(rec);
            if (last_cycle) break;
        } catch (const Error& e) {
            if ((dynamic_cast<const DivergenceError*>(&e) || dynamic_cast<const NumericError*>(&e)) &&
                hooks.on_divergence) {
                hooks.on_divergence(last_good_policy, last_good_pair);
            }
            throw;
        }
    }
    if (separation) res.policy = res.pair->base;
    return res;
}

}  // namespace inril
