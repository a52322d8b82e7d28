#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hyperkernel {

/// A Monte Carlo (or exact, stderr == 0) value with its provenance.
struct Estimate {
    double value = 0.0;
    double stderr = 0.0;
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;
    bool exact = false;

    friend bool operator==(const Estimate&, const Estimate&) = default;
};

/// Estimate of a supremum over a finite grid plus the grid value attaining it.
struct MaximalEstimate {
    Estimate estimate;
    double argmax = 0.0;
};

struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdmissibilityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct CapExceeded : std::length_error {
    using std::length_error::length_error;
};

struct IncompatiblePoint : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Welford mean / variance.
class MeanAccumulator {
public:
    void add(double x) noexcept
    {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    std::uint64_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }

    /// Sample standard deviation over sqrt(n); zero for n < 2.
    double stderr() const noexcept
    {
        if (n_ < 2) {
            return 0.0;
        }
        const double n = static_cast<double>(n_);
        return std::sqrt(std::max(m2_, 0.0) / (n - 1.0) / n);
    }

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Ratio-of-means estimator mean(a)/mean(b) over paired samples, with the
/// delta-method standard error sqrt(sum (a - R b)^2 / (n (n-1))) / |mean(b)|.
class RatioAccumulator {
public:
    void add(double a, double b) noexcept
    {
        ++n_;
        const double n = static_cast<double>(n_);
        const double da = a - mean_a_;
        const double db = b - mean_b_;
        mean_a_ += da / n;
        mean_b_ += db / n;
        caa_ += da * (a - mean_a_);
        cbb_ += db * (b - mean_b_);
        cab_ += da * (b - mean_b_);
    }

    std::uint64_t count() const noexcept { return n_; }
    double numerator_mean() const noexcept { return mean_a_; }
    double denominator_mean() const noexcept { return mean_b_; }
    double ratio() const noexcept { return mean_a_ / mean_b_; }

    double stderr() const noexcept
    {
        if (n_ < 2 || mean_b_ == 0.0) {
            return 0.0;
        }
        const double r = ratio();
        const double ss = caa_ - 2.0 * r * cab_ + r * r * cbb_;
        const double n = static_cast<double>(n_);
        return std::sqrt(std::max(ss, 0.0) / (n * (n - 1.0))) / std::abs(mean_b_);
    }

private:
    std::uint64_t n_ = 0;
    double mean_a_ = 0.0;
    double mean_b_ = 0.0;
    double caa_ = 0.0;
    double cbb_ = 0.0;
    double cab_ = 0.0;
};

/// Pass/fail for "lhs <= rhs" where both sides may carry standard errors;
/// slack is `sigmas` times the combined standard error.
inline bool within_upper(double lhs, double rhs, double combined_stderr, double sigmas = 3.0) noexcept
{
    return lhs <= rhs + sigmas * combined_stderr;
}

inline double combine_stderr(double a, double b) noexcept { return std::hypot(a, b); }

} // namespace hyperkernel
