#include "inril/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "inril/errors.hpp"
#include "inril/random.hpp"

namespace inril {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

double activate(Activation a, double x) { return a == Activation::kTanh ? std::tanh(x) : std::max(0.0, x); }

// Derivative expressed through the activation output y = f(x).
double activate_grad(Activation a, double y) {
    return a == Activation::kTanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0);
}

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite value");
    }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }
std::string to_string(Head h) { return h == Head::kGaussianPolicy ? "gaussian_policy" : "scalar_value"; }

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::kTanh;
    if (s == "relu") return Activation::kRelu;
    throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

Head parse_head(const std::string& s) {
    if (s == "gaussian_policy") return Head::kGaussianPolicy;
    if (s == "scalar_value") return Head::kScalarValue;
    throw ConfigError("unknown head '" + s + "' (expected gaussian_policy or scalar_value)");
}

std::size_t MlpSpec::num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
        n += layer_widths[l] * layer_widths[l + 1] + layer_widths[l + 1];
    }
    if (head == Head::kGaussianPolicy) n += output_dim();
    return n;
}

void MlpSpec::validate() const {
    if (layer_widths.size() < 3) throw ConfigError("MlpSpec needs at least one hidden layer");
    for (std::size_t w : layer_widths) {
        if (w == 0) throw ConfigError("MlpSpec layer widths must be positive");
    }
    if (head == Head::kScalarValue && output_dim() != 1) {
        throw ConfigError("scalar_value head requires output width 1");
    }
}

MlpSpec policy_spec(std::size_t obs_dim, std::size_t act_dim, std::vector<std::size_t> hidden, Activation act) {
    MlpSpec s;
    s.layer_widths.push_back(obs_dim);
    s.layer_widths.insert(s.layer_widths.end(), hidden.begin(), hidden.end());
    s.layer_widths.push_back(act_dim);
    s.activation = act;
    s.head = Head::kGaussianPolicy;
    s.validate();
    return s;
}

MlpSpec value_spec(std::size_t obs_dim, std::vector<std::size_t> hidden, Activation act) {
    MlpSpec s;
    s.layer_widths.push_back(obs_dim);
    s.layer_widths.insert(s.layer_widths.end(), hidden.begin(), hidden.end());
    s.layer_widths.push_back(1);
    s.activation = act;
    s.head = Head::kScalarValue;
    s.validate();
    return s;
}

Mlp::Mlp(MlpSpec spec, ParamVector params) : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    if (params_.size() != spec_.num_params()) {
        throw ShapeError("Mlp: expected " + std::to_string(spec_.num_params()) + " params, got " +
                         std::to_string(params_.size()));
    }
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
        offsets_.push_back(off);
        off += spec_.layer_widths[l] * spec_.layer_widths[l + 1] + spec_.layer_widths[l + 1];
    }
}

Mlp Mlp::initialized(MlpSpec spec, std::uint64_t seed, double init_log_std) {
    spec.validate();
    ParamVector p(spec.num_params(), 0.0);
    Rng rng = make_rng(seed, Stream::kInit);
    const double gain = spec.activation == Activation::kTanh ? 1.0 : std::numbers::sqrt2;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        const std::size_t in = spec.layer_widths[l];
        const std::size_t out = spec.layer_widths[l + 1];
        const double bound = gain / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < in * out; ++i) p[off + i] = uniform(rng, -bound, bound);
        off += in * out + out;
    }
    if (spec.head == Head::kGaussianPolicy) {
        for (std::size_t i = 0; i < spec.output_dim(); ++i) p[off + i] = init_log_std;
    }
    Mlp net(std::move(spec), std::move(p));
    net.clamp_log_std();
    return net;
}

void Mlp::set_params(ParamVector params) {
    if (params.size() != params_.size()) {
        throw ShapeError("Mlp::set_params: parameter length is fixed at " + std::to_string(params_.size()));
    }
    params_ = std::move(params);
}

void Mlp::apply_step(const ParamVector& grad, double step) {
    params_ = axpy_update(params_, grad, step);
    clamp_log_std();
}

std::size_t Mlp::log_std_offset() const {
    if (spec_.head != Head::kGaussianPolicy) throw ConfigError("log_std requested on a scalar_value head");
    return params_.size() - spec_.output_dim();
}

std::span<const double> Mlp::log_std() const { return params_.span().subspan(log_std_offset(), spec_.output_dim()); }

void Mlp::set_log_std(std::span<const double> values) {
    if (values.size() != spec_.output_dim()) throw ShapeError("set_log_std: wrong length");
    std::copy(values.begin(), values.end(), params_.begin() + static_cast<std::ptrdiff_t>(log_std_offset()));
    clamp_log_std();
}

void Mlp::clamp_log_std() {
    if (spec_.head != Head::kGaussianPolicy) return;
    const std::size_t off = log_std_offset();
    for (std::size_t i = off; i < params_.size(); ++i) params_[i] = std::clamp(params_[i], kLogStdMin, kLogStdMax);
}

void Mlp::check_input(std::span<const double> input) const {
    if (input.size() != spec_.input_dim()) {
        throw ShapeError("Mlp input has " + std::to_string(input.size()) + " entries, expected " +
                         std::to_string(spec_.input_dim()));
    }
}

void Mlp::forward(std::span<const double> input, Cache& cache) const {
    check_input(input);
    const std::size_t L = spec_.num_layers();
    cache.activations.resize(L + 1);
    cache.activations[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = spec_.layer_widths[l];
        const std::size_t out = spec_.layer_widths[l + 1];
        const double* W = params_.span().data() + offsets_[l];
        const double* b = W + in * out;
        const std::vector<double>& x = cache.activations[l];
        std::vector<double>& y = cache.activations[l + 1];
        y.resize(out);
        const bool hidden = l + 1 < L;
        for (std::size_t o = 0; o < out; ++o) {
            double z = b[o];
            const double* row = W + o * in;
            for (std::size_t i = 0; i < in; ++i) z += row[i] * x[i];
            y[o] = hidden ? activate(spec_.activation, z) : z;
        }
    }
}

std::vector<double> Mlp::output(std::span<const double> input) const {
    Cache cache;
    forward(input, cache);
    return std::move(cache.activations.back());
}

void Mlp::backward(const Cache& cache, std::span<const double> d_out, double scale, ParamVector& grad) const {
    if (grad.size() != params_.size()) throw ShapeError("Mlp::backward: gradient length mismatch");
    if (d_out.size() != spec_.output_dim()) throw ShapeError("Mlp::backward: d_out length mismatch");
    const std::size_t L = spec_.num_layers();
    std::vector<double> delta(d_out.begin(), d_out.end());
    std::vector<double> prev;
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t in = spec_.layer_widths[l];
        const std::size_t out = spec_.layer_widths[l + 1];
        const double* W = params_.span().data() + offsets_[l];
        double* gW = grad.span().data() + offsets_[l];
        double* gb = gW + in * out;
        const std::vector<double>& x = cache.activations[l];
        for (std::size_t o = 0; o < out; ++o) {
            const double d = scale * delta[o];
            gb[o] += d;
            double* grow = gW + o * in;
            for (std::size_t i = 0; i < in; ++i) grow[i] += d * x[i];
        }
        if (l == 0) break;
        prev.assign(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double* row = W + o * in;
            for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
        }
        for (std::size_t i = 0; i < in; ++i) prev[i] *= activate_grad(spec_.activation, x[i]);
        delta.swap(prev);
    }
}

GaussianOutput forward(const GaussianMlpPolicy& policy, std::span<const double> obs) {
    if (policy.spec().head != Head::kGaussianPolicy) throw ConfigError("forward: network is not a Gaussian policy");
    GaussianOutput out;
    out.mean = policy.output(obs);
    const auto ls = policy.log_std();
    out.std.resize(ls.size());
    for (std::size_t i = 0; i < ls.size(); ++i) out.std[i] = std::exp(ls[i]);
    return out;
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
    if (mean.size() != action.size() || log_std.size() != action.size()) {
        throw ShapeError("gaussian_log_prob: dimension mismatch");
    }
    double lp = 0.0;
    for (std::size_t i = 0; i < action.size(); ++i) {
        const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    }
    return lp;
}

void gaussian_log_prob_grads(std::span<const double> mean, std::span<const double> log_std,
                             std::span<const double> action, std::span<double> d_mean,
                             std::span<double> d_log_std) {
    for (std::size_t i = 0; i < action.size(); ++i) {
        const double inv_std = std::exp(-log_std[i]);
        const double z = (action[i] - mean[i]) * inv_std;
        d_mean[i] = z * inv_std;
        d_log_std[i] = z * z - 1.0;
    }
}

double accumulate_log_prob_grad(const GaussianMlpPolicy& policy, std::span<const double> obs,
                                std::span<const double> action, double scale, ParamVector& grad) {
    if (policy.spec().head != Head::kGaussianPolicy) throw ConfigError("log_prob: network is not a Gaussian policy");
    if (action.size() != policy.spec().output_dim()) throw ShapeError("log_prob: action dimension mismatch");
    require_finite(obs, "log_prob obs");
    require_finite(action, "log_prob action");
    Mlp::Cache cache;
    policy.forward(obs, cache);
    const std::vector<double>& mean = cache.activations.back();
    const auto ls = policy.log_std();
    const double lp = gaussian_log_prob(mean, ls, action);
    if (!std::isfinite(lp)) throw NumericError("log_prob: non-finite log density");
    std::vector<double> d_mean(action.size()), d_ls(action.size());
    gaussian_log_prob_grads(mean, ls, action, d_mean, d_ls);
    policy.backward(cache, d_mean, scale, grad);
    const std::size_t off = policy.log_std_offset();
    for (std::size_t i = 0; i < d_ls.size(); ++i) grad[off + i] += scale * d_ls[i];
    return lp;
}

LogProbGrad log_prob_and_grad(const GaussianMlpPolicy& policy, std::span<const double> obs,
                              std::span<const double> action) {
    LogProbGrad out;
    out.grad = ParamVector(policy.num_params(), 0.0);
    out.logp = accumulate_log_prob_grad(policy, obs, action, 1.0, out.grad);
    return out;
}

double value_of(const ValueNet& valuenet, std::span<const double> obs) {
    if (valuenet.spec().head != Head::kScalarValue) throw ConfigError("value: network is not a scalar_value head");
    return valuenet.output(obs)[0];
}

LossGrad value_forward_and_grad(const ValueNet& valuenet, std::span<const double> obs, double target) {
    if (valuenet.spec().head != Head::kScalarValue) throw ConfigError("value: network is not a scalar_value head");
    Mlp::Cache cache;
    valuenet.forward(obs, cache);
    const double err = cache.activations.back()[0] - target;
    LossGrad out;
    out.loss = 0.5 * err * err;
    out.grad = ParamVector(valuenet.num_params(), 0.0);
    const double d_out[1] = {err};
    valuenet.backward(cache, d_out, 1.0, out.grad);
    return out;
}

}  // namespace inril
