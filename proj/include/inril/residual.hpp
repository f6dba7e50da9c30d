#pragma once

#include <cstdint>
#include <vector>

#include "inril/actor.hpp"
#include "inril/mlp.hpp"

namespace inril {

/// Base policy plus a small additive correction network.
///
/// The acting distribution has mean base(s) + scale * residual(s) and the
/// residual network's log-std. IL trains `base` on its own; RL trains only
/// `residual`.
struct ResidualPolicyPair {
    GaussianMlpPolicy base;
    GaussianMlpPolicy residual;
    double residual_scale = 0.1;

    /// Residual with zeroed output layer and log-std copied from the base, so
    /// the composite initially acts exactly like the base.
    static ResidualPolicyPair from_base(GaussianMlpPolicy base, std::vector<std::size_t> residual_hidden,
                                        std::uint64_t seed, double residual_scale = 0.1);
};

/// Acting view of a residual pair; gradient steps touch only the residual.
class ResidualActor final : public Actor {
public:
    explicit ResidualActor(ResidualPolicyPair& pair) : pair_(&pair) {}

    std::size_t obs_dim() const override { return pair_->base.spec().input_dim(); }
    std::size_t act_dim() const override { return pair_->base.spec().output_dim(); }
    void distribution(std::span<const double> obs, std::vector<double>& mean,
                      std::vector<double>& log_std) const override;
    const ParamVector& params() const override { return pair_->residual.params(); }
    void apply_step(const ParamVector& grad, double step) override { pair_->residual.apply_step(grad, step); }
    double accumulate_log_prob_grad(std::span<const double> obs, std::span<const double> action, double scale,
                                    ParamVector& grad) const override;

private:
    ResidualPolicyPair* pair_;
};

}  // namespace inril
