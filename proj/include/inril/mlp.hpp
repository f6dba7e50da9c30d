#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inril/param_vector.hpp"

namespace inril {

enum class Activation { kTanh, kRelu };
enum class Head { kGaussianPolicy, kScalarValue };

std::string to_string(Activation a);
std::string to_string(Head h);
Activation parse_activation(const std::string& s);
Head parse_head(const std::string& s);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Layer widths include the input and output layers, so a network with one
/// hidden layer has three widths. A Gaussian head appends one learned log-std
/// per output dimension after the last bias.
struct MlpSpec {
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::kTanh;
    Head head = Head::kGaussianPolicy;

    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t output_dim() const { return layer_widths.back(); }
    std::size_t num_layers() const { return layer_widths.size() - 1; }
    std::size_t num_params() const;

    /// Throws ConfigError unless there is at least one hidden layer, all
    /// widths are positive, and a value head has output width 1.
    void validate() const;

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

MlpSpec policy_spec(std::size_t obs_dim, std::size_t act_dim, std::vector<std::size_t> hidden,
                    Activation act = Activation::kTanh);
MlpSpec value_spec(std::size_t obs_dim, std::vector<std::size_t> hidden, Activation act = Activation::kTanh);

/// Dense feed-forward network with hand-written backprop.
///
/// Parameter layout: for each layer, weights (row-major, out x in) then
/// biases; for the Gaussian head the log-std vector comes last.
class Mlp {
public:
    /// Intermediate activations of one forward pass, reused by backward().
    struct Cache {
        std::vector<std::vector<double>> activations;  // [0] = input, [L] = output
    };

    Mlp(MlpSpec spec, ParamVector params);

    /// Fan-in scaled uniform init (gain 1 for tanh, sqrt(2) for relu), zero
    /// biases, log-std set to `init_log_std`.
    static Mlp initialized(MlpSpec spec, std::uint64_t seed, double init_log_std = 0.0);

    const MlpSpec& spec() const noexcept { return spec_; }
    const ParamVector& params() const noexcept { return params_; }

    /// Replaces the parameters. The length is fixed for the network's lifetime.
    void set_params(ParamVector params);

    /// params -= step * grad, then clamps log-std.
    void apply_step(const ParamVector& grad, double step);

    std::size_t num_params() const noexcept { return params_.size(); }
    std::size_t log_std_offset() const;
    std::span<const double> log_std() const;
    void set_log_std(std::span<const double> values);
    void clamp_log_std();

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

    /// Raw output of the last (linear) layer: the action mean or the value.
    std::vector<double> output(std::span<const double> input) const;
    void forward(std::span<const double> input, Cache& cache) const;

    /// grad += scale * d(out . d_out)/d(params), for the pass recorded in cache.
    void backward(const Cache& cache, std::span<const double> d_out, double scale, ParamVector& grad) const;

private:
    void check_input(std::span<const double> input) const;

    MlpSpec spec_;
    ParamVector params_;
    std::vector<std::size_t> offsets_;  // start of each layer's weights
};

using GaussianMlpPolicy = Mlp;
using ValueNet = Mlp;

struct GaussianOutput {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Mean and standard deviation of the policy at `obs`.
GaussianOutput forward(const GaussianMlpPolicy& policy, std::span<const double> obs);

/// Log density of a diagonal Gaussian.
double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);

/// d logp / d mean and d logp / d log_std for a diagonal Gaussian.
void gaussian_log_prob_grads(std::span<const double> mean, std::span<const double> log_std,
                             std::span<const double> action, std::span<double> d_mean,
                             std::span<double> d_log_std);

struct LogProbGrad {
    double logp = 0.0;
    ParamVector grad;
};

LogProbGrad log_prob_and_grad(const GaussianMlpPolicy& policy, std::span<const double> obs,
                              std::span<const double> action);

/// grad += scale * d logp / d params. Returns logp.
double accumulate_log_prob_grad(const GaussianMlpPolicy& policy, std::span<const double> obs,
                                std::span<const double> action, double scale, ParamVector& grad);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

/// loss = 0.5 * (V(obs) - target)^2 and its gradient.
LossGrad value_forward_and_grad(const ValueNet& valuenet, std::span<const double> obs, double target);

double value_of(const ValueNet& valuenet, std::span<const double> obs);

}  // namespace inril
