#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "inril/errors.hpp"
#include "inril/interleave.hpp"
#include "inril/random.hpp"

using namespace inril;

namespace {

struct Fixture {
    EnvConfig env;
    DemoDataset demos;
    Mlp policy;
    RlConfig rl;
    IlBatchConfig il;

    Fixture()
        : policy(Mlp::initialized(policy_spec(2, 2, {8}), 1, -0.5)) {
        env.kind = EnvKind::kPointmass;
        env.point.horizon = 40;
        demos = generate_demos(env, 3, 0.1, 2);
        rl = default_rl_config(env.kind);
        rl.steps_per_batch = 64;
        rl.value_epochs = 2;
        il.batch_size = 16;
        il.lr = 1e-2;
    }

    InterleaveConfig cfg(Mode mode, int m) const {
        InterleaveConfig c;
        c.mode = mode;
        c.m = m;
        c.alpha_il = 1e-2;
        c.alpha_rl = 1e-2;
        c.value_hidden = {8};
        c.residual_hidden = {4};
        c.eval_episodes = 2;
        return c;
    }
};

std::string expected_pattern(const std::string& first, const std::string& rest, int m) {
    std::string s = first;
    for (int i = 0; i < m; ++i) s += (s.empty() ? "" : ",") + rest;
    return s;
}

}  // namespace

TEST_CASE("alignment measure") {
    const ParamVector g{1.0, 2.0, -0.5};
    CHECK(measure_alignment(g, g) == doctest::Approx(-1.0));
    CHECK(measure_alignment(g, -1.0 * g) == doctest::Approx(1.0));
    CHECK(measure_alignment(ParamVector{1.0, 0.0}, ParamVector{0.0, 3.0}) == 0.0);
    CHECK(measure_alignment(ParamVector{0.0, 0.0}, g.size() == 3 ? ParamVector{1.0, 1.0} : g) == 0.0);
    CHECK(measure_alignment(ParamVector{1.0, 0.0}, ParamVector{-1.0, 1.0}) == doctest::Approx(std::sqrt(0.5)));

    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        ParamVector a(5), b(5);
        for (std::size_t i = 0; i < 5; ++i) {
            a[i] = standard_normal(rng);
            b[i] = standard_normal(rng);
        }
        const double r = measure_alignment(a, b);
        CHECK(r >= -1.0);
        CHECK(r <= 1.0);
        CHECK(measure_alignment(b, a) == doctest::Approx(r).epsilon(1e-14));
        CHECK(measure_alignment(3.0 * a, 0.1 * b) == doctest::Approx(r).epsilon(1e-12));
    }
}

TEST_CASE("dual cone combination") {
    CHECK(dual_cone_combine(ParamVector{1.0, 0.0}, ParamVector{0.0, 1.0}) == ParamVector{1.0, 1.0});
    CHECK(dual_cone_combine(ParamVector{1.0, 1.0}, ParamVector{2.0, 0.0}) == ParamVector{3.0, 1.0});
    const ParamVector c = dual_cone_combine(ParamVector{1.0, 0.0}, ParamVector{-1.0, 1.0});
    CHECK(c[0] == doctest::Approx(0.5));
    CHECK(c[1] == doctest::Approx(1.5));
    // Exactly opposite: both projections vanish.
    const ParamVector opp = dual_cone_combine(ParamVector{2.0, 0.0}, ParamVector{-1.0, 0.0});
    CHECK(std::abs(opp[0]) < 1e-15);
    CHECK(std::abs(opp[1]) < 1e-15);

    Rng rng(2);
    for (std::size_t dim : {2u, 64u, 1024u}) {
        for (int trial = 0; trial < 1000; ++trial) {
            ParamVector a(dim), b(dim);
            const double sa = std::exp(2.0 * standard_normal(rng)), sb = std::exp(2.0 * standard_normal(rng));
            for (std::size_t i = 0; i < dim; ++i) {
                a[i] = sa * standard_normal(rng);
                b[i] = sb * standard_normal(rng);
            }
            const ParamVector out = dual_cone_combine(a, b);
            const double tol = 1e-9 * norm(out) * (norm(a) + norm(b));
            CHECK(dot(out, a) >= -tol);
            CHECK(dot(out, b) >= -tol);
            if (dot(a, b) >= 0.0) CHECK(out == a + b);
        }
    }
}

TEST_CASE("adaptive ratio") {
    TheoryConstants c;
    CHECK(adaptive_m_value(4.0, 1.0, 1.0, c) == 2);
    CHECK(sqrt_rule_raw(4.0, 1.0, 1.0, c) == doctest::Approx(2.0));
    CHECK(adaptive_m_value(1.0, 1.0, 1.0, c) == 1);
    CHECK(adaptive_m_value(100.0, 1.0, 1.0, c) == 10);
    CHECK(adaptive_m_value(1000.0, 0.001, 1.0, c, 1, 50) == 50);
    // Aligned or orthogonal gradients: no damage term, fall back to the floor.
    CHECK(adaptive_m_value(4.0, 1.0, -0.5, c, 3) == 3);
    CHECK(adaptive_m_value(4.0, 1.0, 0.0, c) == 1);
    // Noise eats into the denominator: 16 / (4 - 2) -> sqrt(8).
    c.sigma2_il = 8.0;
    c.N_il = 1;
    c.c_il = 0.5;
    CHECK(sqrt_rule_raw(4.0, 1.0, 1.0, c) == doctest::Approx(std::sqrt(16.0 / (4.0 - 2.0))));
    CHECK(adaptive_m_value(4.0, 1.0, 1.0, c) == 3);
    // Growing in |g_RL| and shrinking in rho.
    TheoryConstants z;
    CHECK(sqrt_rule_raw(8.0, 1.0, 1.0, z) > sqrt_rule_raw(4.0, 1.0, 1.0, z));
    CHECK(sqrt_rule_raw(4.0, 1.0, 0.5, z) > sqrt_rule_raw(4.0, 1.0, 1.0, z));

    ScheduleState s;
    CHECK(adaptive_m(s, z, 2) == 2);
    s.record(1.0, 1.0, 4.0, 20);
    CHECK(adaptive_m(s, z) == 2);
}

TEST_CASE("mode names") {
    for (Mode m : {Mode::kFullNetSurgery, Mode::kFullNetNaive, Mode::kNetworkSeparation, Mode::kRlOnly, Mode::kIlOnly,
                   Mode::kBcLossReg}) {
        CHECK(parse_mode(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_mode("surgery_plus"), ConfigError);
}

TEST_CASE("schedule accounting") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    for (Mode mode : {Mode::kFullNetSurgery, Mode::kFullNetNaive, Mode::kNetworkSeparation}) {
        for (int m : {1, 3, 5, 15}) {
            const int T = 3;
            const InterleaveConfig c = f.cfg(mode, m);
            // A little slack that does not fit another cycle.
            const InrilResult r = run_inril(f.policy, f.demos, f.env, c, f.rl, f.il, T * m * N + N / 2, 7);
            INFO(to_string(mode) << " m=" << m);
            REQUIRE(r.records.size() == static_cast<std::size_t>(T));
            for (std::size_t k = 0; k < r.records.size(); ++k) {
                const CycleRecord& rec = r.records[k];
                const auto t = static_cast<std::int64_t>(k + 1);
                CHECK(rec.cycle == t - 1);
                CHECK(rec.m_used == m);
                CHECK(rec.pattern == expected_pattern("IL", "RL", m));
                CHECK(rec.updates == t * (1 + m));
                CHECK(rec.il_updates == t);
                CHECK(rec.rl_updates == t * m);
                CHECK(rec.env_steps == t * m * N);
                CHECK(std::isfinite(rec.rho));
                CHECK(rec.eval_return.has_value() == (k + 1 == r.records.size()));
            }
        }
    }
}

TEST_CASE("fresh RL gradient for surgery costs one extra batch") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    InterleaveConfig c = f.cfg(Mode::kFullNetSurgery, 3);
    c.fresh_rl_grad_for_surgery = true;
    const InrilResult r = run_inril(f.policy, f.demos, f.env, c, f.rl, f.il, 2 * 4 * N, 7);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[1].env_steps == 2 * 4 * N);
    CHECK(r.records[1].updates == 2 * 4);
}

TEST_CASE("baseline mode patterns") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    {
        const InrilResult r = run_inril(f.policy, f.demos, f.env, f.cfg(Mode::kRlOnly, 5), f.rl, f.il, 4 * N, 1);
        REQUIRE(r.records.size() == 4);
        CHECK(r.records.back().pattern == "RL");
        CHECK(r.records.back().updates == 4);
        CHECK(r.records.back().il_updates == 0);
    }
    {
        const InrilResult r = run_inril(f.policy, f.demos, f.env, f.cfg(Mode::kIlOnly, 2), f.rl, f.il, 4 * N, 1);
        REQUIRE(r.records.size() == 2);
        CHECK(r.records.back().pattern == "IL,RO,RO");
        CHECK(r.records.back().rl_updates == 0);
        CHECK(r.records.back().il_updates == 2);
        CHECK(r.records.back().env_steps == 4 * N);
    }
    {
        InterleaveConfig c = f.cfg(Mode::kBcLossReg, 5);
        c.bc_reg_weight = 0.5;
        const InrilResult r = run_inril(f.policy, f.demos, f.env, c, f.rl, f.il, 3 * N, 1);
        REQUIRE(r.records.size() == 3);
        CHECK(r.records.back().pattern == "RL+BC");
        CHECK(r.records.back().updates == 3);
    }
    InterleaveConfig bad = f.cfg(Mode::kFullNetNaive, 5);
    bad.bc_reg_weight = 0.5;
    CHECK_THROWS_AS(run_inril(f.policy, f.demos, f.env, bad, f.rl, f.il, 10 * N, 1), ConfigError);
}

TEST_CASE("budget smaller than one cycle") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    CHECK_THROWS_AS(run_inril(f.policy, f.demos, f.env, f.cfg(Mode::kFullNetSurgery, 5), f.rl, f.il, 5 * N - 1, 1),
                    UsageError);
    CHECK_NOTHROW(run_inril(f.policy, f.demos, f.env, f.cfg(Mode::kFullNetSurgery, 5), f.rl, f.il, 5 * N, 1));
}

TEST_CASE("rl_only equals a plain loop of RL update cycles") {
    Fixture f;
    const InterleaveConfig c = f.cfg(Mode::kRlOnly, 1);
    const int K = 6;
    const InrilResult r = run_inril(f.policy, f.demos, f.env, c, f.rl, f.il,
                                    K * static_cast<std::int64_t>(f.rl.steps_per_batch), 11);

    Mlp pol = f.policy;
    ValueNet v = make_value_net(c, 11);
    RlConfig rl = f.rl;
    rl.lr = c.alpha_rl;
    MlpActor actor(pol);
    for (std::uint64_t k = 0; k < K; ++k) rl_update_cycle(actor, v, f.env, rl, rl_update_seed(11, k));
    CHECK(r.policy.params() == pol.params());
    CHECK(r.value.params() == v.params());
}

TEST_CASE("surgery with a zero IL step follows rl_only exactly") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    InterleaveConfig s = f.cfg(Mode::kFullNetSurgery, 3);
    s.alpha_il = 0.0;
    const InrilResult a = run_inril(f.policy, f.demos, f.env, s, f.rl, f.il, 9 * N, 5);
    const InrilResult b = run_inril(f.policy, f.demos, f.env, f.cfg(Mode::kRlOnly, 1), f.rl, f.il, 9 * N, 5);
    CHECK(a.policy.params() == b.policy.params());
    CHECK(a.records.back().env_steps == b.records.back().env_steps);
}

TEST_CASE("network separation keeps IL and RL on disjoint parameters") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    const InterleaveConfig c = f.cfg(Mode::kNetworkSeparation, 3);
    std::uint64_t base_hash = hash_params(f.policy.params());
    std::uint64_t residual_hash = 0;
    bool first = true;
    int il_events = 0, rl_events = 0;
    RunHooks hooks;
    hooks.on_update = [&](const UpdateEvent& ev) {
        REQUIRE(ev.base_params != nullptr);
        REQUIRE(ev.residual_params != nullptr);
        const std::uint64_t bh = hash_params(*ev.base_params), rh = hash_params(*ev.residual_params);
        if (ev.kind == UpdateKind::kIl) {
            ++il_events;
            if (!first) CHECK(rh == residual_hash);
            CHECK(bh != base_hash);
        } else {
            ++rl_events;
            CHECK(bh == base_hash);
            if (!first) CHECK(rh != residual_hash);
        }
        base_hash = bh;
        residual_hash = rh;
        first = false;
    };
    const InrilResult r = run_inril(f.policy, f.demos, f.env, c, f.rl, f.il, 4 * 3 * N, 3, hooks);
    CHECK(il_events == 4);
    CHECK(rl_events == 12);
    REQUIRE(r.pair.has_value());
    CHECK(r.policy.params() == r.pair->base.params());

    // The base is exactly plain IL SGD, whatever RL did.
    Mlp replay = f.policy;
    for (std::uint64_t k = 0; k < 4; ++k) {
        const LossGrad lg = il_loss_and_grad(replay, f.demos, f.il, k);
        replay.apply_step(lg.grad, c.alpha_il);
    }
    CHECK(replay.params() == r.pair->base.params());
}

TEST_CASE("residual pair starts out acting like the base") {
    const Mlp base = Mlp::initialized(policy_spec(2, 2, {8}), 4, -0.7);
    ResidualPolicyPair pair = ResidualPolicyPair::from_base(base, {4}, 9, 0.1);
    ResidualActor actor(pair);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> obs{standard_normal(rng), standard_normal(rng)};
        const GaussianOutput o = forward(base, obs);
        const std::vector<double> mean = actor.mean_action(obs);
        CHECK(mean[0] == doctest::Approx(o.mean[0]).epsilon(1e-15));
        CHECK(mean[1] == doctest::Approx(o.mean[1]).epsilon(1e-15));
        const std::vector<double> a{standard_normal(rng), standard_normal(rng)};
        CHECK(actor.log_prob(obs, a) == doctest::Approx(MlpActor(base).log_prob(obs, a)).epsilon(1e-13));
    }
    // Residual log-prob gradient by finite differences.
    Rng prng(8);
    ParamVector p = pair.residual.params();
    for (auto& v : p) v += 0.1 * standard_normal(prng);
    pair.residual.set_params(p);
    const std::vector<double> obs{0.3, -0.2}, act{0.5, 0.1};
    ParamVector g(p.size(), 0.0);
    actor.accumulate_log_prob_grad(obs, act, 1.0, g);
    const ParamVector fd = testutil::central_diff(
        [&](const ParamVector& q) {
            ResidualPolicyPair tmp = pair;
            tmp.residual.set_params(q);
            return ResidualActor(tmp).log_prob(obs, act);
        },
        p);
    CHECK(testutil::rel_error(g, fd) < 1e-6);
}

TEST_CASE("adaptive schedule stays in range") {
    Fixture f;
    const auto N = static_cast<std::int64_t>(f.rl.steps_per_batch);
    InterleaveConfig c = f.cfg(Mode::kFullNetSurgery, 5);
    c.adaptive = true;
    c.adaptive_initial_m = 4;
    c.adaptive_floor = 2;
    c.adaptive_max = 6;
    const InrilResult r = run_inril(f.policy, f.demos, f.env, c, f.rl, f.il, 40 * N, 2);
    REQUIRE(!r.records.empty());
    CHECK(r.records.front().m_used == 4);
    std::int64_t steps = 0;
    for (const auto& rec : r.records) {
        CHECK(rec.m_used >= 1);
        CHECK(rec.m_used <= 6);
        steps += rec.m_used * N;
        CHECK(rec.env_steps == steps);
    }
    CHECK(r.records.back().env_steps <= 40 * N);
}

TEST_CASE("divergence is reported with the last good policy") {
    Fixture f;
    InterleaveConfig c = f.cfg(Mode::kFullNetNaive, 2);
    c.alpha_il = 1e8;
    bool called = false;
    ParamVector saved;
    RunHooks hooks;
    hooks.on_divergence = [&](const GaussianMlpPolicy& p, const std::optional<ResidualPolicyPair>&) {
        called = true;
        saved = p.params();
    };
    CHECK_THROWS_AS(run_inril(f.policy, f.demos, f.env, c, f.rl, f.il, 50 * 2 * 64, 1, hooks), DivergenceError);
    CHECK(called);
    CHECK(saved.all_finite());
}
