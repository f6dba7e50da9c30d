#include "inril/actor.hpp"

#include "inril/errors.hpp"

namespace inril {

double Actor::log_prob(std::span<const double> obs, std::span<const double> action) const {
    std::vector<double> mean, log_std;
    distribution(obs, mean, log_std);
    return gaussian_log_prob(mean, log_std, action);
}

std::vector<double> Actor::mean_action(std::span<const double> obs) const {
    std::vector<double> mean, log_std;
    distribution(obs, mean, log_std);
    return mean;
}

void MlpActor::distribution(std::span<const double> obs, std::vector<double>& mean,
                            std::vector<double>& log_std) const {
    mean = cnet_->output(obs);
    const auto ls = cnet_->log_std();
    log_std.assign(ls.begin(), ls.end());
}

void MlpActor::apply_step(const ParamVector& grad, double step) {
    if (net_ == nullptr) throw UsageError("MlpActor: apply_step on a read-only view");
    net_->apply_step(grad, step);
}

double MlpActor::accumulate_log_prob_grad(std::span<const double> obs, std::span<const double> action, double scale,
                                          ParamVector& grad) const {
    return inril::accumulate_log_prob_grad(*cnet_, obs, action, scale, grad);
}

}  // namespace inril
