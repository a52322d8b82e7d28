#pragma once

// Catalog of real functions on a space. Catalog kinds are functions of the
// scalar position u = space.position(x) with period 1; `table` holds one value
// per carrier point of a finite space.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "space.hpp"

namespace hyperkernel {

enum class FunctionKind { constant, cosine, bump, step, abs_kink, table };

inline const char* to_string(FunctionKind kind)
{
    switch (kind) {
    case FunctionKind::constant: return "constant";
    case FunctionKind::cosine: return "cosine";
    case FunctionKind::bump: return "bump";
    case FunctionKind::step: return "step";
    case FunctionKind::abs_kink: return "abs-kink";
    case FunctionKind::table: return "table";
    }
    return "unknown";
}

struct FunctionField {
    FunctionKind kind = FunctionKind::constant;
    double amplitude = 1.0;
    double frequency = 1.0;
    double center = 0.0;
    double width = 0.25;
    double p = 2.0; ///< Lebesgue exponent in [1, inf]; p = 1 only makes sense for k = 1
    std::vector<double> values;

    static FunctionField constant(double c, double p = 2.0)
    {
        FunctionField f;
        f.amplitude = c;
        f.p = p;
        return f;
    }

    static FunctionField table(std::vector<double> v, double p = 2.0)
    {
        FunctionField f;
        f.kind = FunctionKind::table;
        f.values = std::move(v);
        f.p = p;
        return f;
    }

    /// Value at scalar position u for the catalog kinds.
    double at_position(double u) const
    {
        const double delta = circular_distance(wrap_periodic(u, 1.0), wrap_periodic(center, 1.0), 1.0);
        switch (kind) {
        case FunctionKind::constant: return amplitude;
        case FunctionKind::cosine: return amplitude * std::cos(2.0 * std::numbers::pi * frequency * (u - center));
        case FunctionKind::bump: {
            if (delta >= width) {
                return 0.0;
            }
            const double s = 1.0 - (delta / width) * (delta / width);
            return amplitude * s * s;
        }
        case FunctionKind::step: return delta < width ? amplitude : 0.0;
        case FunctionKind::abs_kink: return amplitude * delta;
        case FunctionKind::table: break;
        }
        throw std::invalid_argument("table functions need a finite space");
    }

    /// Points in [0, 1] where the catalog function is not smooth.
    std::vector<double> breakpoints() const
    {
        std::vector<double> b{0.0, 1.0};
        const double c = wrap_periodic(center, 1.0);
        switch (kind) {
        case FunctionKind::bump:
        case FunctionKind::step:
            b.push_back(wrap_periodic(c - width, 1.0));
            b.push_back(wrap_periodic(c + width, 1.0));
            b.push_back(c);
            b.push_back(wrap_periodic(c + 0.5, 1.0));
            break;
        case FunctionKind::abs_kink:
            b.push_back(c);
            b.push_back(wrap_periodic(c + 0.5, 1.0));
            break;
        default: break;
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    friend bool operator==(const FunctionField&, const FunctionField&) = default;
};

template <MeasureSpace S>
double evaluate(const FunctionField& f, const S& space, const PointOf<S>& x)
{
    if (f.kind == FunctionKind::table) {
        if constexpr (FiniteSpace<S>) {
            const auto i = space.index_of(x);
            if (i >= f.values.size()) {
                throw std::invalid_argument("table function has no value for this point");
            }
            return f.values[i];
        } else {
            throw std::invalid_argument("table functions need a finite space");
        }
    }
    return f.at_position(space.position(x));
}

template <MeasureSpace S>
void check_function(const FunctionField& f, const S& space)
{
    if (!(f.p >= 1.0)) {
        throw std::invalid_argument("Lebesgue exponent p must be in [1, inf]");
    }
    if (f.kind == FunctionKind::table) {
        if constexpr (FiniteSpace<S>) {
            if (f.values.size() != space.carrier_size()) {
                throw std::invalid_argument("table function needs one value per carrier point");
            }
        } else {
            throw std::invalid_argument("table functions need a finite space");
        }
    }
    if ((f.kind == FunctionKind::bump || f.kind == FunctionKind::step) && !(f.width > 0.0)) {
        throw std::invalid_argument("bump/step width must be positive");
    }
}

/// ||f||_{L^p(mu)}. Finite carriers are summed exactly; continuous spaces use
/// adaptive Gauss-Kronrod in the position variable (relative error ~1e-10);
/// p = inf is the supremum over a 10^4-point grid plus breakpoints.
template <MeasureSpace S>
double lp_norm(const FunctionField& f, const S& space, double p)
{
    const bool enumerable = [&] {
        if constexpr (FiniteSpace<S>) {
            if constexpr (std::is_same_v<S, Cantor>) {
                return space.depth() <= 20;
            }
            return true;
        }
        return false;
    }();
    if constexpr (FiniteSpace<S>) {
        if (enumerable) {
            double acc = 0.0;
            for (std::size_t i = 0; i < space.carrier_size(); ++i) {
                const double v = std::abs(evaluate(f, space, space.point_at(i)));
                acc = std::isinf(p) ? std::max(acc, v) : acc + space.weight_at(i) * std::pow(v, p);
            }
            return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
        }
    }
    if (f.kind == FunctionKind::table) {
        throw std::invalid_argument("table functions need a finite space");
    }
    const auto breaks = f.breakpoints();
    if (std::isinf(p)) {
        double sup = 0.0;
        constexpr int kGrid = 10000;
        for (int i = 0; i < kGrid; ++i) {
            sup = std::max(sup, std::abs(f.at_position(static_cast<double>(i) / kGrid)));
        }
        for (const double b : breaks) {
            sup = std::max(sup, std::abs(f.at_position(b)));
        }
        return sup;
    }
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        integral += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            [&](double u) { return std::pow(std::abs(f.at_position(u)), p); }, breaks[i], breaks[i + 1], 15, 1e-12);
    }
    return std::pow(space.total_mass() * integral, 1.0 / p);
}

template <MeasureSpace S>
double lp_norm(const FunctionField& f, const S& space)
{
    return lp_norm(f, space, f.p);
}

} // namespace hyperkernel
