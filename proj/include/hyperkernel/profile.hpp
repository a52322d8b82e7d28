#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "estimate.hpp"

namespace hyperkernel {

enum class ProfileKind { indicator, exponential, power, gaussian };

inline const char* to_string(ProfileKind kind)
{
    switch (kind) {
    case ProfileKind::indicator: return "indicator";
    case ProfileKind::exponential: return "exponential";
    case ProfileKind::power: return "power";
    case ProfileKind::gaussian: return "gaussian";
    }
    return "unknown";
}

/// Nonincreasing kernel profile phi on [0, inf).
struct KernelProfile {
    ProfileKind kind = ProfileKind::indicator;
    double power_exponent = 3.0; ///< b in (1 + t)^-b

    /// Right end of the support (infinite unless compactly supported).
    double support_end() const noexcept
    {
        return kind == ProfileKind::indicator ? 1.0 : std::numeric_limits<double>::infinity();
    }

    friend bool operator==(const KernelProfile&, const KernelProfile&) = default;
};

inline double evaluate(const KernelProfile& p, double t)
{
    if (!(t >= 0.0)) {
        throw std::invalid_argument("kernel profile evaluated at negative t");
    }
    switch (p.kind) {
    case ProfileKind::indicator: return t < 1.0 ? 1.0 : 0.0;
    case ProfileKind::exponential: return std::exp(-t);
    case ProfileKind::power: return std::pow(1.0 + t, -p.power_exponent);
    case ProfileKind::gaussian: return std::exp(-t * t);
    }
    return 0.0;
}

inline void check_moment_order(const KernelProfile& p, int k, double alpha)
{
    if (k < 1 || !(alpha > 0.0)) {
        throw AdmissibilityError("moment needs k >= 1 and alpha > 0");
    }
    if (p.kind == ProfileKind::power && !(p.power_exponent > k * alpha)) {
        throw AdmissibilityError("power profile with b = " + std::to_string(p.power_exponent) +
                                 " <= k*alpha = " + std::to_string(k * alpha) + ": moment s(phi) diverges");
    }
}

/// Closed-form s(phi) = int_0^inf phi(t) t^(k alpha - 1) dt.
inline double s_phi(const KernelProfile& p, int k, double alpha)
{
    check_moment_order(p, k, alpha);
    const double a = k * alpha;
    switch (p.kind) {
    case ProfileKind::indicator: return 1.0 / a;
    case ProfileKind::exponential: return std::tgamma(a);
    case ProfileKind::power: return std::beta(a, p.power_exponent - a);
    case ProfileKind::gaussian: return 0.5 * std::tgamma(a / 2.0);
    }
    return 0.0;
}

/// The same moment by numerical quadrature: tanh-sinh on [0, 1] (handles the
/// t^(a-1) endpoint behaviour and the indicator jump at 1) plus exp-sinh on
/// [1, inf).
inline double s_phi_quadrature(const KernelProfile& p, int k, double alpha)
{
    check_moment_order(p, k, alpha);
    const double a = k * alpha;
    auto integrand = [&](double t) { return t <= 0.0 ? 0.0 : evaluate(p, t) * std::pow(t, a - 1.0); };
    boost::math::quadrature::tanh_sinh<double> inner;
    const double head = p.kind == ProfileKind::indicator
                            ? inner.integrate([&](double t) { return t <= 0.0 ? 0.0 : std::pow(t, a - 1.0); }, 0.0, 1.0)
                            : inner.integrate(integrand, 0.0, 1.0);
    if (p.kind == ProfileKind::indicator) {
        return head;
    }
    boost::math::quadrature::exp_sinh<double> outer;
    return head + outer.integrate(integrand, 1.0, std::numeric_limits<double>::infinity());
}

/// Checks monotonicity on a geometric grid over [1e-4, 1e4] and 0 < s(phi) < inf.
inline void validate_profile(const KernelProfile& p, int k, double alpha)
{
    if (p.kind == ProfileKind::power && !(p.power_exponent > 0.0)) {
        throw AdmissibilityError("power profile needs b > 0");
    }
    constexpr int kGrid = 1000;
    double previous = evaluate(p, 0.0);
    for (int i = 0; i < kGrid; ++i) {
        const double t = std::pow(10.0, -4.0 + 8.0 * i / (kGrid - 1));
        const double v = evaluate(p, t);
        if (v < 0.0 || v > previous) {
            throw AdmissibilityError(std::string("profile '") + to_string(p.kind) + "' is not nonincreasing");
        }
        previous = v;
    }
    const double s = s_phi(p, k, alpha);
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw AdmissibilityError("moment s(phi) must be finite and positive");
    }
}

} // namespace hyperkernel
