#pragma once

#include <cstdint>
#include <vector>

#include "inril/actor.hpp"
#include "inril/envs.hpp"
#include "inril/mlp.hpp"

namespace inril {

struct IlBatchConfig {
    std::size_t batch_size = 64;
    double lr = 1e-2;
    std::uint64_t shuffle_seed = 0;

    /// Throws ConfigError for a zero batch, non-positive lr, or a batch larger
    /// than the dataset.
    void validate(std::size_t dataset_size) const;
};

/// Indices of the mini-batch used at `step_index`. Each epoch is a fresh
/// permutation of the dataset drawn from (shuffle_seed, epoch); the tail that
/// does not fill a whole batch is dropped.
std::vector<std::size_t> il_batch_indices(std::size_t dataset_size, const IlBatchConfig& cfg,
                                          std::uint64_t step_index);

/// Mean negative log-likelihood over `indices` and its gradient.
LossGrad il_loss_and_grad_on(const Actor& actor, const DemoDataset& demos, const std::vector<std::size_t>& indices);

/// Mini-batch IL loss for `step_index`.
LossGrad il_loss_and_grad(const Actor& actor, const DemoDataset& demos, const IlBatchConfig& cfg,
                          std::uint64_t step_index);
LossGrad il_loss_and_grad(const GaussianMlpPolicy& policy, const DemoDataset& demos, const IlBatchConfig& cfg,
                          std::uint64_t step_index);

/// Full-batch loss and gradient (deterministic, no randomness).
LossGrad il_full_loss_and_grad(const Actor& actor, const DemoDataset& demos);
double il_full_loss(const Actor& actor, const DemoDataset& demos);
double il_full_loss(const GaussianMlpPolicy& policy, const DemoDataset& demos);

/// Mean squared deviation of per-pair gradients from their mean over the
/// mini-batch at `step_index`: the empirical sigma^2 of a single-sample IL gradient.
double il_gradient_variance(const Actor& actor, const DemoDataset& demos, const IlBatchConfig& cfg,
                            std::uint64_t step_index);

struct PretrainResult {
    GaussianMlpPolicy policy;
    std::vector<double> loss_curve;   // mini-batch loss at each step
    double initial_full_loss = 0.0;
    double final_full_loss = 0.0;
    std::uint64_t steps_done = 0;     // start_step + n_steps
    bool loss_increased = false;      // final full-batch loss above initial
};

inline constexpr double kDivergenceLoss = 1e6;

/// Plain SGD on the IL objective. Step indices run from `start_step`, so a
/// resumed run continues the same mini-batch sequence. Throws DivergenceError
/// if a loss exceeds 1e6 or turns non-finite.
PretrainResult pretrain(GaussianMlpPolicy policy, const DemoDataset& demos, std::uint64_t n_steps,
                        const IlBatchConfig& cfg, std::uint64_t start_step = 0);

}  // namespace inril
