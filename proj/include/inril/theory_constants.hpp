#pragma once

#include <cstdint>

namespace inril {

/// Constants of the two smooth stochastic objectives. Step sizes follow
/// alpha = c / L.
struct TheoryConstants {
    double c_il = 0.5;
    double c_rl = 0.5;
    double L_il = 1.0;
    double L_rl = 1.0;
    double sigma2_il = 0.0;  // bound on E|g_hat - g|^2 for a single sample
    double sigma2_rl = 0.0;
    std::int64_t N_il = 1;
    std::int64_t N_rl = 1;
    double eps_il = 0.0;
    double delta = 0.0;  // intermediate-step gradient slack, (1 - delta)^2

    double alpha_il() const { return c_il / L_il; }
    double alpha_rl() const { return c_rl / L_rl; }

    /// Throws ConfigError unless c in (0,1), L > 0, sigma2 >= 0, N >= 1.
    void validate() const;
};

}  // namespace inril
