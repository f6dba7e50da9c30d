#include "inril/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "inril/errors.hpp"

namespace inril {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
    }
}

}  // namespace

void ParamVector::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool ParamVector::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
    require_same_length(size(), other.size(), "ParamVector +=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
    require_same_length(size(), other.size(), "ParamVector -=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) noexcept {
    for (double& v : values_) v *= s;
    return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double s, ParamVector a) { return a *= s; }

double dot(const ParamVector& a, const ParamVector& b) {
    require_same_length(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double squared_norm(const ParamVector& a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return acc;
}

double norm(const ParamVector& a) { return std::sqrt(squared_norm(a)); }

ParamVector axpy_update(const ParamVector& params, const ParamVector& grad, double step) {
    require_same_length(params.size(), grad.size(), "axpy_update");
    ParamVector out = params;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= step * grad[i];
    return out;
}

void add_scaled(ParamVector& y, const ParamVector& x, double s) {
    require_same_length(y.size(), x.size(), "add_scaled");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

std::uint64_t hash_values(std::span<const double> values) noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : values) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace inril
