#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "inril/errors.hpp"
#include "inril/random.hpp"
#include "inril/rl.hpp"

using namespace inril;

namespace {

ValueNet constant_value(double c) {
    const MlpSpec spec = value_spec(2, {3});
    ParamVector p(spec.num_params(), 0.0);
    p[p.size() - 1] = c;
    return ValueNet(spec, p);
}

Transition step_with(double reward, std::vector<double> obs = {0.0, 0.0}, std::vector<double> next = {0.0, 0.0}) {
    Transition t;
    t.obs = std::move(obs);
    t.action = {0.0, 0.0};
    t.reward = reward;
    t.next_obs = std::move(next);
    return t;
}

RolloutBatch random_batch(Rng& rng, std::size_t n_traj) {
    RolloutBatch b;
    for (std::size_t i = 0; i < n_traj; ++i) {
        Trajectory tr;
        const std::size_t len = 1 + uniform_index(rng, 12);
        for (std::size_t k = 0; k < len; ++k) {
            tr.steps.push_back(step_with(standard_normal(rng), {standard_normal(rng), standard_normal(rng)},
                                         {standard_normal(rng), standard_normal(rng)}));
        }
        tr.terminal = uniform01(rng) < 0.5;
        tr.truncated = !tr.terminal;
        b.trajectories.push_back(tr);
    }
    return b;
}

}  // namespace

TEST_CASE("GAE with a zero critic") {
    RolloutBatch b;
    Trajectory tr;
    for (double r : {1.0, 0.0, 2.0}) tr.steps.push_back(step_with(r));
    tr.terminal = true;
    b.trajectories.push_back(tr);
    RlConfig cfg;
    cfg.normalize_advantages = false;
    cfg.gamma = 0.9;

    cfg.gae_lambda = 0.0;
    compute_gae(b, constant_value(0.0), cfg);
    CHECK(b.advantages == std::vector<double>{1.0, 0.0, 2.0});

    cfg.gae_lambda = 1.0;
    compute_gae(b, constant_value(0.0), cfg);
    CHECK(b.advantages[2] == doctest::Approx(2.0));
    CHECK(b.advantages[1] == doctest::Approx(0.9 * 2.0));
    CHECK(b.advantages[0] == doctest::Approx(1.0 + 0.81 * 2.0));
    CHECK(b.returns == b.advantages);
}

TEST_CASE("GAE bootstraps only truncated trajectories") {
    RlConfig cfg;
    cfg.normalize_advantages = false;
    cfg.gae_lambda = 0.0;
    cfg.gamma = 0.5;
    for (bool terminal : {true, false}) {
        RolloutBatch b;
        Trajectory tr;
        tr.steps.push_back(step_with(1.0));
        tr.terminal = terminal;
        tr.truncated = !terminal;
        b.trajectories.push_back(tr);
        compute_gae(b, constant_value(2.0), cfg);
        // delta = r + gamma V(next) - V(s)
        CHECK(b.advantages[0] == doctest::Approx(terminal ? 1.0 - 2.0 : 1.0 + 1.0 - 2.0));
        CHECK(b.returns[0] == doctest::Approx(b.advantages[0] + 2.0));
    }
}

TEST_CASE("GAE matches the explicit sum over TD errors") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        RolloutBatch b = random_batch(rng, 4);
        const ValueNet v = Mlp::initialized(value_spec(2, {6}), 50 + trial);
        RlConfig cfg;
        cfg.normalize_advantages = false;
        cfg.gamma = 0.8 + 0.19 * uniform01(rng);
        cfg.gae_lambda = uniform01(rng);
        compute_gae(b, v, cfg);
        std::size_t base = 0;
        for (const auto& tr : b.trajectories) {
            const std::size_t len = tr.steps.size();
            std::vector<double> delta(len);
            for (std::size_t k = 0; k < len; ++k) {
                double vn;
                if (k + 1 < len) vn = value_of(v, tr.steps[k + 1].obs);
                else vn = tr.terminal ? 0.0 : value_of(v, tr.steps[k].next_obs);
                delta[k] = tr.steps[k].reward + cfg.gamma * vn - value_of(v, tr.steps[k].obs);
            }
            for (std::size_t t = 0; t < len; ++t) {
                double a = 0.0, w = 1.0;
                for (std::size_t l = t; l < len; ++l) {
                    a += w * delta[l];
                    w *= cfg.gamma * cfg.gae_lambda;
                }
                CHECK(std::abs(b.advantages[base + t] - a) < 1e-12);
                CHECK(std::abs(b.returns[base + t] - (a + value_of(v, tr.steps[t].obs))) < 1e-12);
            }
            base += len;
        }
    }
}

TEST_CASE("advantage normalization") {
    Rng rng(22);
    RolloutBatch b = random_batch(rng, 6);
    RlConfig cfg;
    compute_gae(b, constant_value(0.3), cfg);
    double mean = 0.0, var = 0.0;
    for (double a : b.advantages) mean += a;
    mean /= static_cast<double>(b.advantages.size());
    for (double a : b.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(b.advantages.size());
    CHECK(std::abs(mean) < 1e-12);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("rollouts have exactly N steps and are reproducible") {
    for (EnvKind kind : {EnvKind::kGridworld, EnvKind::kPointmass}) {
        EnvConfig env;
        env.kind = kind;
        RlConfig cfg = default_rl_config(kind);
        cfg.steps_per_batch = 333;
        const Mlp pol = Mlp::initialized(policy_spec(2, 2, {8}), 3);
        const RolloutBatch a = collect_rollouts(pol, env, cfg, 9);
        const RolloutBatch b = collect_rollouts(pol, env, cfg, 9);
        CHECK(a.num_steps() == 333);
        REQUIRE(a.trajectories.size() == b.trajectories.size());
        for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
            REQUIRE(a.trajectories[i].steps.size() == b.trajectories[i].steps.size());
            for (std::size_t k = 0; k < a.trajectories[i].steps.size(); ++k) {
                CHECK(a.trajectories[i].steps[k].action == b.trajectories[i].steps[k].action);
                CHECK(a.trajectories[i].steps[k].logp_behavior == b.trajectories[i].steps[k].logp_behavior);
            }
        }
        const RolloutBatch c = collect_rollouts(pol, env, cfg, 10);
        CHECK(c.trajectories.front().steps.front().action != a.trajectories.front().steps.front().action);
        // Behavior log-probs are the policy's own.
        const Transition& t = a.trajectories.front().steps.front();
        CHECK(t.logp_behavior == doctest::Approx(MlpActor(pol).log_prob(t.obs, t.action)).epsilon(1e-14));
        CHECK(a.trajectories.back().truncated);
    }
}

TEST_CASE("surrogate at ratio 1") {
    EnvConfig env;
    env.kind = EnvKind::kPointmass;
    RlConfig cfg = default_rl_config(env.kind);
    cfg.steps_per_batch = 200;
    const Mlp pol = Mlp::initialized(policy_spec(2, 2, {8}), 4);
    RolloutBatch b = collect_rollouts(pol, env, cfg, 1);
    compute_gae(b, constant_value(0.0), cfg);
    const SurrogateResult sr = rl_loss_and_grad(pol, b, cfg);
    // Normalized advantages have mean zero, so the loss is -mean(A) = 0.
    CHECK(std::abs(sr.loss) < 1e-12);
    CHECK(sr.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sr.clip_fraction == 0.0);

    // Vanilla policy gradient: -(1/n) sum A grad log pi.
    ParamVector pg(pol.num_params(), 0.0);
    b.for_each_transition([&](std::size_t i, const Transition& t) {
        const LogProbGrad lg = log_prob_and_grad(pol, t.obs, t.action);
        add_scaled(pg, lg.grad, -b.advantages[i] / static_cast<double>(b.num_steps()));
    });
    CHECK(testutil::rel_error(sr.grad, pg) < 1e-10);

    std::fill(b.advantages.begin(), b.advantages.end(), 0.0);
    const SurrogateResult zero = rl_loss_and_grad(pol, b, cfg);
    CHECK(norm(zero.grad) == 0.0);
    CHECK(zero.loss == 0.0);
}

TEST_CASE("surrogate gradient matches finite differences off ratio 1") {
    EnvConfig env;
    env.kind = EnvKind::kPointmass;
    RlConfig cfg = default_rl_config(env.kind);
    cfg.steps_per_batch = 30;
    cfg.clip_eps = 10.0;  // keep every sample in the unclipped branch
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const MlpSpec spec = policy_spec(2, 2, {6});
        const Mlp behavior = Mlp::initialized(spec, seed, -0.3);
        RolloutBatch b = collect_rollouts(behavior, env, cfg, seed);
        compute_gae(b, constant_value(-1.0), cfg);
        Rng rng(seed);
        ParamVector p = behavior.params();
        for (auto& v : p) v += 0.02 * standard_normal(rng);
        const Mlp pol(spec, p);
        const SurrogateResult sr = rl_loss_and_grad(pol, b, cfg);
        CHECK(sr.clip_fraction == 0.0);
        const ParamVector fd =
            testutil::central_diff([&](const ParamVector& q) { return rl_loss_and_grad(Mlp(spec, q), b, cfg).loss; }, p);
        CHECK(testutil::rel_error(sr.grad, fd) < 1e-6);
    }
}

TEST_CASE("clipped samples carry no gradient") {
    EnvConfig env;
    env.kind = EnvKind::kPointmass;
    RlConfig cfg = default_rl_config(env.kind);
    cfg.steps_per_batch = 50;
    const MlpSpec spec = policy_spec(2, 2, {6});
    const Mlp behavior = Mlp::initialized(spec, 1, -0.3);
    RolloutBatch b = collect_rollouts(behavior, env, cfg, 2);
    compute_gae(b, constant_value(0.0), cfg);
    std::fill(b.advantages.begin(), b.advantages.end(), 1.0);
    // A narrow policy pushes most ratios far from 1; with A > 0 only the ones above 1 + eps clip.
    ParamVector p = behavior.params();
    Mlp shifted(spec, p);
    std::vector<double> ls(2, -3.0);
    shifted.set_log_std(ls);
    const SurrogateResult sr = rl_loss_and_grad(shifted, b, cfg);
    std::size_t above = 0;
    b.for_each_transition([&](std::size_t, const Transition& t) {
        if (std::exp(MlpActor(shifted).log_prob(t.obs, t.action) - t.logp_behavior) > 1.0 + cfg.clip_eps) ++above;
    });
    CHECK(sr.clip_fraction == doctest::Approx(static_cast<double>(above) / 50.0));
}

TEST_CASE("update cycle") {
    EnvConfig env;
    env.kind = EnvKind::kPointmass;
    RlConfig cfg = default_rl_config(env.kind);
    cfg.steps_per_batch = 256;
    Mlp pol = Mlp::initialized(policy_spec(2, 2, {8}), 5);
    ValueNet v = Mlp::initialized(value_spec(2, {8}), 6);

    cfg.lr = 0.0;
    const ParamVector before = pol.params();
    MlpActor actor(pol);
    const RlCycleResult r = rl_update_cycle(actor, v, env, cfg, 1);
    CHECK(pol.params() == before);
    CHECK(r.stats.env_steps == 256);
    CHECK(r.stats.value_loss_after < r.stats.value_loss_before);

    cfg.lr = 0.02;
    Mlp pol2 = Mlp::initialized(policy_spec(2, 2, {8}), 5);
    ValueNet v2 = Mlp::initialized(value_spec(2, {8}), 6);
    MlpActor a2(pol2);
    const RlCycleResult r2 = rl_update_cycle(a2, v2, env, cfg, 1);
    CHECK(pol2.params() == axpy_update(before, r2.policy_grad, 0.02));
    CHECK(r2.stats.grad_norm == doctest::Approx(norm(r2.policy_grad)));

    int hooked = 0;
    Mlp pol3 = Mlp::initialized(policy_spec(2, 2, {8}), 5);
    ValueNet v3 = Mlp::initialized(value_spec(2, {8}), 6);
    MlpActor a3(pol3);
    rl_update_cycle(a3, v3, env, cfg, 1, [&](ParamVector& g) {
        ++hooked;
        g.fill(0.0);
    });
    CHECK(hooked == 1);
    CHECK(pol3.params() == before);

    RlConfig bad = cfg;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("RL improves a point-mass policy") {
    EnvConfig env;
    env.kind = EnvKind::kPointmass;
    RlConfig cfg = default_rl_config(env.kind);
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Mlp pol = Mlp::initialized(policy_spec(2, 2, {32, 32}), seed, -0.5);
        ValueNet v = Mlp::initialized(value_spec(2, {32, 32}), seed + 100);
        const double before = evaluate_policy(pol, env, 20, 7).mean_return;
        MlpActor actor(pol);
        for (std::uint64_t k = 0; k < 25; ++k) rl_update_cycle(actor, v, env, cfg, derive_seed(seed, Stream::kRollout, k));
        const double after = evaluate_policy(pol, env, 20, 7).mean_return;
        MESSAGE("seed " << seed << " return " << before << " -> " << after);
        if (after > before) ++improved;
    }
    CHECK(improved >= 4);
}
