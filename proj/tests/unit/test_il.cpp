#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "helpers.hpp"
#include "inril/errors.hpp"
#include "inril/il.hpp"
#include "inril/random.hpp"
#include "inril/rl.hpp"

using namespace inril;

namespace {

DemoDataset random_dataset(Rng& rng, std::size_t n, std::size_t obs_dim = 2, std::size_t act_dim = 2) {
    DemoDataset d;
    d.obs_dim = obs_dim;
    d.act_dim = act_dim;
    d.n_trajectories = 1;
    for (std::size_t i = 0; i < n; ++i) {
        DemoPair p;
        for (std::size_t k = 0; k < obs_dim; ++k) p.obs.push_back(standard_normal(rng));
        for (std::size_t k = 0; k < act_dim; ++k) p.action.push_back(standard_normal(rng));
        d.pairs.push_back(p);
    }
    return d;
}

// Diagonal Gaussian NLL written out directly.
double nll(const std::vector<double>& mean, const std::vector<double>& std, const std::vector<double>& a) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double z = (a[k] - mean[k]) / std[k];
        s += 0.5 * z * z + std::log(std[k]) + 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return s;
}

}  // namespace

TEST_CASE("IL gradient vanishes on the mean when the policy reproduces the demos") {
    const MlpSpec spec = policy_spec(2, 2, {4});
    ParamVector params(spec.num_params(), 0.0);
    Mlp net(spec, params);
    const std::size_t bias = net.weight_offset(1) + 2 * 4;
    params[bias] = 0.3;
    params[bias + 1] = -0.6;
    net.set_params(params);

    Rng rng(1);
    DemoDataset d = random_dataset(rng, 12);
    for (auto& p : d.pairs) p.action = {0.3, -0.6};
    MlpActor actor(net);
    const LossGrad lg = il_full_loss_and_grad(actor, d);
    for (std::size_t i = 0; i < net.log_std_offset(); ++i) CHECK(std::abs(lg.grad[i]) < 1e-14);
    // d NLL / d log_std = 1 - z^2 = 1 at z = 0.
    CHECK(lg.grad[net.log_std_offset()] == doctest::Approx(1.0));
    CHECK(lg.loss == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("full IL loss is the mean per-pair NLL and is order invariant") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const Mlp net = Mlp::initialized(policy_spec(2, 2, {8, 8}), 100 + trial, -0.5);
        DemoDataset d = random_dataset(rng, 30);
        double expect = 0.0;
        for (const auto& p : d.pairs) {
            const GaussianOutput o = forward(net, p.obs);
            expect += nll(o.mean, o.std, p.action);
        }
        expect /= static_cast<double>(d.size());
        const double got = il_full_loss(net, d);
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
        std::reverse(d.pairs.begin(), d.pairs.end());
        CHECK(il_full_loss(net, d) == doctest::Approx(got).epsilon(1e-13));
    }
}

TEST_CASE("IL gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 1000);
        const MlpSpec spec = policy_spec(2, 2, {5, 4}, seed % 2 ? Activation::kRelu : Activation::kTanh);
        // Zero biases put ReLU pre-activations exactly on the kink when a whole
        // layer is off, so jitter every parameter.
        ParamVector p0 = Mlp::initialized(spec, seed, 0.1 * standard_normal(rng)).params();
        for (auto& v : p0) v += 0.05 * standard_normal(rng);
        const Mlp net(spec, p0);
        const DemoDataset d = random_dataset(rng, 7);
        const LossGrad lg = il_full_loss_and_grad(MlpActor(net), d);
        const ParamVector fd = testutil::central_diff(
            [&](const ParamVector& p) { return il_full_loss(Mlp(spec, p), d); }, net.params());
        INFO("seed " << seed);
        CHECK(testutil::rel_error(lg.grad, fd) < 1e-6);
    }
}

TEST_CASE("mini-batch indices") {
    IlBatchConfig cfg;
    cfg.batch_size = 3;
    cfg.shuffle_seed = 11;
    std::set<std::size_t> epoch0;
    for (std::uint64_t s = 0; s < 3; ++s) {
        const auto idx = il_batch_indices(10, cfg, s);
        CHECK(idx.size() == 3);
        epoch0.insert(idx.begin(), idx.end());
    }
    CHECK(epoch0.size() == 9);
    CHECK(il_batch_indices(10, cfg, 3) != il_batch_indices(10, cfg, 0));
    CHECK(il_batch_indices(10, cfg, 5) == il_batch_indices(10, cfg, 5));
    IlBatchConfig other = cfg;
    other.shuffle_seed = 12;
    CHECK(il_batch_indices(10, cfg, 0) != il_batch_indices(10, other, 0));

    Rng rng(3);
    const DemoDataset d = random_dataset(rng, 10);
    const Mlp net = Mlp::initialized(policy_spec(2, 2, {6}), 4);
    const LossGrad a = il_loss_and_grad(net, d, cfg, 4);
    const LossGrad b = il_loss_and_grad_on(MlpActor(net), d, il_batch_indices(10, cfg, 4));
    CHECK(a.loss == b.loss);
    CHECK(a.grad == b.grad);
}

TEST_CASE("IL config validation") {
    IlBatchConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
    cfg.batch_size = 11;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
    cfg.batch_size = 10;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
    cfg.lr = 0.1;
    CHECK_NOTHROW(cfg.validate(10));
}

TEST_CASE("gradient variance") {
    Rng rng(5);
    DemoDataset d = random_dataset(rng, 8);
    const Mlp net = Mlp::initialized(policy_spec(2, 2, {6}), 9);
    IlBatchConfig cfg;
    cfg.batch_size = 8;
    CHECK(il_gradient_variance(MlpActor(net), d, cfg, 0) > 0.0);
    for (auto& p : d.pairs) p = d.pairs.front();
    CHECK(il_gradient_variance(MlpActor(net), d, cfg, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-20));
}

TEST_CASE("pretrain bookkeeping") {
    Rng rng(6);
    const DemoDataset d = random_dataset(rng, 40);
    const Mlp init = Mlp::initialized(policy_spec(2, 2, {8}), 7);
    IlBatchConfig cfg;
    cfg.batch_size = 8;
    cfg.lr = 1e-2;

    const PretrainResult none = pretrain(init, d, 0, cfg, 5);
    CHECK(none.policy.params() == init.params());
    CHECK(none.steps_done == 5);
    CHECK(none.loss_curve.empty());

    const PretrainResult full = pretrain(init, d, 10, cfg);
    const PretrainResult first = pretrain(init, d, 4, cfg);
    const PretrainResult rest = pretrain(first.policy, d, 6, cfg, first.steps_done);
    CHECK(rest.policy.params() == full.policy.params());
    CHECK(rest.steps_done == 10);
    CHECK(full.loss_curve.size() == 10);
    CHECK(pretrain(init, d, 10, cfg).policy.params() == full.policy.params());

    // One manual SGD step.
    const LossGrad lg = il_loss_and_grad(init, d, cfg, 0);
    Mlp manual = init;
    manual.apply_step(lg.grad, cfg.lr);
    CHECK(pretrain(init, d, 1, cfg).policy.params() == manual.params());
    CHECK(full.loss_curve.front() == lg.loss);
}

TEST_CASE("pretrain diverges loudly with a huge step") {
    Rng rng(8);
    DemoDataset d = random_dataset(rng, 16);
    for (auto& p : d.pairs)
        for (auto& a : p.action) a *= 50.0;
    const Mlp init = Mlp::initialized(policy_spec(2, 2, {8}, Activation::kRelu), 1);
    IlBatchConfig cfg;
    cfg.batch_size = 16;
    cfg.lr = 1e4;
    CHECK_THROWS_AS(pretrain(init, d, 200, cfg), DivergenceError);
}

TEST_CASE("behavior cloning solves the gridworld") {
    EnvConfig env;
    const DemoDataset demos = generate_demos(env, 20, 0.0, 0);
    const Mlp init = Mlp::initialized(policy_spec(2, 2, {64, 64}), derive_seed(0, Stream::kInit, 0), 0.0);
    IlBatchConfig cfg;
    cfg.batch_size = std::min<std::size_t>(64, demos.size());
    const double before = evaluate_policy(init, env, 100, 1).success_rate;
    const PretrainResult r = pretrain(init, demos, 2000, cfg);
    CHECK(r.final_full_loss < r.initial_full_loss);
    CHECK_FALSE(r.loss_increased);
    const EvalResult after = evaluate_policy(r.policy, env, 100, 1);
    CHECK(after.success_rate >= 0.5);
    CHECK(after.success_rate > before);
}
