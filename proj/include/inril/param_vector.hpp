#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace inril {

/// Flat real-valued parameter or gradient vector.
///
/// Every network exposes its weights as one of these, and every gradient the
/// training code produces has the same layout as the parameters it refers to.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
    ParamVector(std::initializer_list<double> values) : values_(values) {}

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    std::span<double> span() noexcept { return values_; }
    std::span<const double> span() const noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    auto begin() noexcept { return values_.begin(); }
    auto end() noexcept { return values_.end(); }
    auto begin() const noexcept { return values_.begin(); }
    auto end() const noexcept { return values_.end(); }

    void fill(double v);
    bool all_finite() const noexcept;

    ParamVector& operator+=(const ParamVector& other);
    ParamVector& operator-=(const ParamVector& other);
    ParamVector& operator*=(double s) noexcept;

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    std::vector<double> values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double s, ParamVector a);

double dot(const ParamVector& a, const ParamVector& b);
double norm(const ParamVector& a);
double squared_norm(const ParamVector& a);

/// out = params - step * grad. Throws ShapeError on length mismatch.
ParamVector axpy_update(const ParamVector& params, const ParamVector& grad, double step);

/// In-place y += s * x.
void add_scaled(ParamVector& y, const ParamVector& x, double s);

/// FNV-1a over the raw bytes of a range of doubles; used for bit-exact
/// non-interference checks.
std::uint64_t hash_values(std::span<const double> values) noexcept;
inline std::uint64_t hash_params(const ParamVector& p) noexcept { return hash_values(p.span()); }

}  // namespace inril
