#include "inril/residual.hpp"

#include <algorithm>

#include "inril/errors.hpp"

namespace inril {

ResidualPolicyPair ResidualPolicyPair::from_base(GaussianMlpPolicy base, std::vector<std::size_t> residual_hidden,
                                                 std::uint64_t seed, double residual_scale) {
    const MlpSpec& bs = base.spec();
    MlpSpec rs = policy_spec(bs.input_dim(), bs.output_dim(), std::move(residual_hidden), bs.activation);
    GaussianMlpPolicy residual = Mlp::initialized(rs, seed);
    ParamVector p = residual.params();
    const std::size_t last = rs.num_layers() - 1;
    const std::size_t start = residual.weight_offset(last);
    const std::size_t count = rs.layer_widths[last] * rs.layer_widths[last + 1] + rs.layer_widths[last + 1];
    std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(start), count, 0.0);
    residual.set_params(std::move(p));
    residual.set_log_std(base.log_std());
    return ResidualPolicyPair{std::move(base), std::move(residual), residual_scale};
}

void ResidualActor::distribution(std::span<const double> obs, std::vector<double>& mean,
                                 std::vector<double>& log_std) const {
    mean = pair_->base.output(obs);
    const std::vector<double> r = pair_->residual.output(obs);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += pair_->residual_scale * r[i];
    const auto ls = pair_->residual.log_std();
    log_std.assign(ls.begin(), ls.end());
}

double ResidualActor::accumulate_log_prob_grad(std::span<const double> obs, std::span<const double> action,
                                               double scale, ParamVector& grad) const {
    if (action.size() != act_dim()) throw ShapeError("residual log_prob: action dimension mismatch");
    Mlp::Cache cache;
    pair_->residual.forward(obs, cache);
    std::vector<double> mean = pair_->base.output(obs);
    const std::vector<double>& r = cache.activations.back();
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += pair_->residual_scale * r[i];
    const auto ls = pair_->residual.log_std();
    const double lp = gaussian_log_prob(mean, ls, action);
    std::vector<double> d_mean(act_dim()), d_ls(act_dim());
    gaussian_log_prob_grads(mean, ls, action, d_mean, d_ls);
    for (double& d : d_mean) d *= pair_->residual_scale;
    pair_->residual.backward(cache, d_mean, scale, grad);
    const std::size_t off = pair_->residual.log_std_offset();
    for (std::size_t i = 0; i < d_ls.size(); ++i) grad[off + i] += scale * d_ls[i];
    return lp;
}

}  // namespace inril
