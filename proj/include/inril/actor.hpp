#pragma once

#include <span>
#include <vector>

#include "inril/mlp.hpp"
#include "inril/param_vector.hpp"

namespace inril {

/// The acting Gaussian policy seen by the training code, together with the
/// parameter block that gradient steps are applied to.
///
/// For a plain policy the trainable block is the whole network. For a residual
/// pair it is only the residual network, which is how RL updates are kept away
/// from the base policy.
class Actor {
public:
    virtual ~Actor() = default;

    virtual std::size_t obs_dim() const = 0;
    virtual std::size_t act_dim() const = 0;

    /// Mean and log-std of the action distribution at `obs`.
    virtual void distribution(std::span<const double> obs, std::vector<double>& mean,
                              std::vector<double>& log_std) const = 0;

    virtual const ParamVector& params() const = 0;
    virtual std::size_t num_params() const { return params().size(); }

    /// params -= step * grad, followed by log-std clamping.
    virtual void apply_step(const ParamVector& grad, double step) = 0;

    /// grad += scale * d log pi(action|obs) / d params. Returns log pi(action|obs).
    virtual double accumulate_log_prob_grad(std::span<const double> obs, std::span<const double> action,
                                            double scale, ParamVector& grad) const = 0;

    double log_prob(std::span<const double> obs, std::span<const double> action) const;
    std::vector<double> mean_action(std::span<const double> obs) const;
};

/// Actor over a single Gaussian MLP. Holds a reference; the network must outlive it.
class MlpActor final : public Actor {
public:
    explicit MlpActor(GaussianMlpPolicy& net) : net_(&net), cnet_(&net) {}
    /// Read-only view; apply_step throws UsageError.
    explicit MlpActor(const GaussianMlpPolicy& net) : net_(nullptr), cnet_(&net) {}

    std::size_t obs_dim() const override { return cnet_->spec().input_dim(); }
    std::size_t act_dim() const override { return cnet_->spec().output_dim(); }
    void distribution(std::span<const double> obs, std::vector<double>& mean,
                      std::vector<double>& log_std) const override;
    const ParamVector& params() const override { return cnet_->params(); }
    void apply_step(const ParamVector& grad, double step) override;
    double accumulate_log_prob_grad(std::span<const double> obs, std::span<const double> action, double scale,
                                    ParamVector& grad) const override;

private:
    GaussianMlpPolicy* net_;
    const GaussianMlpPolicy* cnet_;
};

}  // namespace inril
