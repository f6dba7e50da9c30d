#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "inril/param_vector.hpp"

namespace testutil {

/// Central differences of f around p, one coordinate at a time.
inline inril::ParamVector central_diff(const std::function<double(const inril::ParamVector&)>& f,
                                       const inril::ParamVector& p, double h = 1e-5) {
    inril::ParamVector g(p.size());
    inril::ParamVector q = p;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = q[i];
        q[i] = orig + h;
        const double up = f(q);
        q[i] = orig - h;
        const double down = f(q);
        q[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// |a - b| / max(|a|, |b|) in the Euclidean norm; 0 when both vanish.
inline double rel_error(const inril::ParamVector& a, const inril::ParamVector& b) {
    const double scale = std::max(inril::norm(a), inril::norm(b));
    if (scale == 0.0) return 0.0;
    return inril::norm(a - b) / scale;
}

}  // namespace testutil
