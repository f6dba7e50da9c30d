#include "inril/il.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "inril/errors.hpp"
#include "inril/random.hpp"

namespace inril {

void IlBatchConfig::validate(std::size_t dataset_size) const {
    if (batch_size == 0) throw ConfigError("il.batch_size must be positive");
    if (!(lr > 0.0)) throw ConfigError("il lr must be positive");
    if (batch_size > dataset_size) {
        throw ConfigError("il.batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                          std::to_string(dataset_size));
    }
}

std::vector<std::size_t> il_batch_indices(std::size_t dataset_size, const IlBatchConfig& cfg,
                                          std::uint64_t step_index) {
    cfg.validate(dataset_size);
    const std::uint64_t per_epoch = dataset_size / cfg.batch_size;
    const std::uint64_t epoch = step_index / per_epoch;
    const std::uint64_t k = step_index % per_epoch;
    std::vector<std::size_t> perm(dataset_size);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(cfg.shuffle_seed, Stream::kIlBatch, epoch);
    for (std::size_t i = dataset_size; i > 1; --i) {
        std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    }
    return {perm.begin() + static_cast<std::ptrdiff_t>(k * cfg.batch_size),
            perm.begin() + static_cast<std::ptrdiff_t>((k + 1) * cfg.batch_size)};
}

LossGrad il_loss_and_grad_on(const Actor& actor, const DemoDataset& demos, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw UsageError("il_loss_and_grad: empty batch");
    if (demos.obs_dim != actor.obs_dim() || demos.act_dim != actor.act_dim()) {
        throw ShapeError("il_loss_and_grad: policy and demo dimensions disagree");
    }
    LossGrad out;
    out.grad = ParamVector(actor.num_params(), 0.0);
    const double w = 1.0 / static_cast<double>(indices.size());
    double total = 0.0;
    for (std::size_t idx : indices) {
        const DemoPair& p = demos.pairs.at(idx);
        total += actor.accumulate_log_prob_grad(p.obs, p.action, -w, out.grad);
    }
    out.loss = -total * w;
    return out;
}

LossGrad il_loss_and_grad(const Actor& actor, const DemoDataset& demos, const IlBatchConfig& cfg,
                          std::uint64_t step_index) {
    return il_loss_and_grad_on(actor, demos, il_batch_indices(demos.size(), cfg, step_index));
}

LossGrad il_loss_and_grad(const GaussianMlpPolicy& policy, const DemoDataset& demos, const IlBatchConfig& cfg,
                          std::uint64_t step_index) {
    return il_loss_and_grad(MlpActor(policy), demos, cfg, step_index);
}

LossGrad il_full_loss_and_grad(const Actor& actor, const DemoDataset& demos) {
    std::vector<std::size_t> all(demos.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return il_loss_and_grad_on(actor, demos, all);
}

double il_full_loss(const Actor& actor, const DemoDataset& demos) {
    if (demos.pairs.empty()) throw UsageError("il_full_loss: empty dataset");
    double total = 0.0;
    for (const auto& p : demos.pairs) total += actor.log_prob(p.obs, p.action);
    return -total / static_cast<double>(demos.size());
}

double il_full_loss(const GaussianMlpPolicy& policy, const DemoDataset& demos) {
    return il_full_loss(MlpActor(policy), demos);
}

double il_gradient_variance(const Actor& actor, const DemoDataset& demos, const IlBatchConfig& cfg,
                            std::uint64_t step_index) {
    const auto indices = il_batch_indices(demos.size(), cfg, step_index);
    std::vector<ParamVector> grads;
    grads.reserve(indices.size());
    ParamVector mean(actor.num_params(), 0.0);
    for (std::size_t idx : indices) {
        ParamVector g(actor.num_params(), 0.0);
        actor.accumulate_log_prob_grad(demos.pairs[idx].obs, demos.pairs[idx].action, -1.0, g);
        add_scaled(mean, g, 1.0 / static_cast<double>(indices.size()));
        grads.push_back(std::move(g));
    }
    double var = 0.0;
    for (const auto& g : grads) var += squared_norm(g - mean);
    return var / static_cast<double>(grads.size());
}

PretrainResult pretrain(GaussianMlpPolicy policy, const DemoDataset& demos, std::uint64_t n_steps,
                        const IlBatchConfig& cfg, std::uint64_t start_step) {
    demos.validate();
    cfg.validate(demos.size());
    PretrainResult res{std::move(policy), {}, 0.0, 0.0, start_step, false};
    MlpActor actor(res.policy);
    res.initial_full_loss = il_full_loss(actor, demos);
    res.loss_curve.reserve(n_steps);
    for (std::uint64_t s = 0; s < n_steps; ++s) {
        const std::uint64_t step = start_step + s;
        LossGrad lg = il_loss_and_grad(actor, demos, cfg, step);
        if (!std::isfinite(lg.loss) || lg.loss > kDivergenceLoss || !lg.grad.all_finite()) {
            throw DivergenceError("pretrain diverged at step " + std::to_string(step) + " (loss " +
                                  std::to_string(lg.loss) + ")");
        }
        res.loss_curve.push_back(lg.loss);
        actor.apply_step(lg.grad, cfg.lr);
        if (!res.policy.params().all_finite()) {
            throw DivergenceError("pretrain produced non-finite parameters at step " + std::to_string(step));
        }
    }
    res.steps_done = start_step + n_steps;
    res.final_full_loss = il_full_loss(actor, demos);
    if (!std::isfinite(res.final_full_loss) || res.final_full_loss > kDivergenceLoss) {
        throw DivergenceError("pretrain diverged: final full-batch loss " + std::to_string(res.final_full_loss));
    }
    res.loss_increased = res.final_full_loss > res.initial_full_loss;
    return res;
}

}  // namespace inril
