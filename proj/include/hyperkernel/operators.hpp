#pragma once

// Normalizer J(x,eps), the k-linear means Phi_eps, the maximal operators
// Phi*, M (over sections) and the Hardy-Littlewood M, plus the explicit
// constants relating them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "estimate.hpp"
#include "function_field.hpp"
#include "profile.hpp"
#include "sampling.hpp"
#include "sections.hpp"

namespace hyperkernel {

// ---------------------------------------------------------------------------
// Constants.
// ---------------------------------------------------------------------------
struct TheoremConstants {
    double lambda0 = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double A_tilde = 0.0;
    double C_domination = 0.0;
    double prop33_bound = 0.0;
};

/// Closed-form constants of the J two-sided bound, the section doubling, the
/// Phi* <= C M domination and M <= (2 kappa)^(k log2 A) prod M f_i.
///
/// (c)^(k log2 A) is evaluated as A^(k log2 c), which is exact in floating
/// point for kappa = 1.
inline TheoremConstants theorem_constants(int k, double alpha, double kappa, double gamma, double Gamma, double A)
{
    if (k < 1 || !(alpha > 0.0) || !(kappa >= 1.0) || !(gamma > 0.0) || !(Gamma >= gamma) || !(A > 1.0)) {
        throw std::invalid_argument("theorem_constants: need k >= 1, alpha > 0, kappa >= 1, 0 < gamma <= Gamma, A > 1");
    }
    const double ka = k * alpha;
    TheoremConstants c;
    c.lambda0 = std::pow(1.0 + std::pow(Gamma, k) * std::pow(2.0 * kappa, ka), 1.0 / ka) / std::pow(gamma, 1.0 / alpha);
    const double lam2 = std::pow(c.lambda0, 2.0 * ka);
    const double log_lam = std::log(c.lambda0);
    c.C1 = 1.0 / (lam2 * log_lam);
    c.C2 = lam2 * std::pow(2.0 * kappa, ka) * std::pow(Gamma, k) / log_lam;
    c.A_tilde = std::pow(A, k * std::log2(8.0 * kappa));
    c.C_domination = std::pow(8.0 * kappa, ka) * std::pow(Gamma, k) / (c.C1 * std::numbers::ln2);
    c.prop33_bound = std::pow(A, k * std::log2(2.0 * kappa));
    return c;
}

template <class T>
struct ProductDifference {
    std::vector<T> terms;
    T total{};
};

/// prod a - prod b = sum_i (a_i - b_i) (prod_{j>i} a_j) (prod_{l<i} b_l).
template <class T>
ProductDifference<T> product_difference(std::span<const T> a, std::span<const T> b)
{
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("product_difference needs two sequences of equal length k >= 1");
    }
    const std::size_t k = a.size();
    std::vector<T> suffix_a(k + 1, T(1));
    for (std::size_t i = k; i-- > 0;) {
        suffix_a[i] = suffix_a[i + 1] * a[i];
    }
    ProductDifference<T> out;
    out.terms.reserve(k);
    T prefix_b(1);
    out.total = T(0);
    for (std::size_t i = 0; i < k; ++i) {
        T term = (a[i] - b[i]) * suffix_a[i + 1] * prefix_b;
        out.total += term;
        out.terms.push_back(std::move(term));
        prefix_b *= b[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kernel means.
// ---------------------------------------------------------------------------

/// Everything one sample set around (x, eps) yields.
struct KernelMeans {
    Estimate J;              ///< int phi(rho/eps) dmu^k
    Estimate mean;           ///< Phi_eps(f_1..f_k)(x), signed
    Estimate abs_mean;       ///< Phi_eps(|f_1|..|f_k|)(x)
    Estimate identity_error; ///< Phi_eps-average of |prod f(x_i) - prod f(x)|
};

template <MeasureSpace S>
void check_profile_for(const S& space, const KernelProfile& phi, int k)
{
    if (const auto& a = space.constants().ahlfors) {
        validate_profile(phi, k, a->alpha);
    }
}

template <MeasureSpace S>
void check_functions(const S& space, std::span<const FunctionField> fs, int k)
{
    if (fs.size() != static_cast<std::size_t>(k)) {
        throw std::invalid_argument("expected " + std::to_string(k) + " functions, got " + std::to_string(fs.size()));
    }
    for (const auto& f : fs) {
        check_function(f, space);
    }
}

namespace detail {

inline void check_resolution(const Estimate& j)
{
    if (!(j.value > 0.0) || j.value < 3.0 * j.stderr) {
        throw ResolutionError("J estimate indistinguishable from zero; raise the sample count or the scale");
    }
}

// J at the Cantor set from the law of max_i d(x, x_i): P(max <= 2^-l) = 2^-lk.
inline double cantor_normalizer(const Cantor& space, const KernelProfile& phi, double eps, int k)
{
    const int m = space.depth();
    double j = evaluate(phi, 0.0) * std::ldexp(1.0, -m * k);
    for (int l = 0; l < m; ++l) {
        const double p = std::ldexp(1.0, -l * k) - std::ldexp(1.0, -(l + 1) * k);
        j += evaluate(phi, std::ldexp(1.0, -l) / eps) * p;
    }
    return j;
}

} // namespace detail

template <MeasureSpace S>
KernelMeans kernel_means(const S& space, const KernelProfile& phi, std::span<const FunctionField> fs,
                         const PointOf<S>& x, double eps, std::uint64_t n, const RandomStream& rng,
                         Method method = Method::automatic, const EnumerationCaps& caps = {})
{
    const int k = static_cast<int>(fs.size());
    check_order(k);
    check_functions(space, fs, k);
    check_profile_for(space, phi, k);
    if (!(eps > 0.0)) {
        throw std::invalid_argument("scale eps must be positive");
    }
    const Method resolved = resolve_method(space, k, method, caps);

    double target = 1.0;
    for (const auto& f : fs) {
        target *= evaluate(f, space, x);
    }

    RatioAccumulator signed_acc;
    RatioAccumulator abs_acc;
    RatioAccumulator err_acc;
    MeanAccumulator j_acc;
    std::uint64_t terms = 0;
    auto visit = [&](double w, const auto& buf) {
        ++terms;
        double prod = 1.0;
        for (int i = 0; i < k; ++i) {
            prod *= evaluate(fs[static_cast<std::size_t>(i)], space, buf.data[static_cast<std::size_t>(i) + 1]);
        }
        j_acc.add(w);
        signed_acc.add(w * prod, w);
        abs_acc.add(w * std::abs(prod), w);
        err_acc.add(w * std::abs(prod - target), w);
    };

    KernelMeans out;
    if constexpr (FiniteSpace<S>) {
        if (resolved == Method::exact) {
            double den = 0.0, num = 0.0, num_abs = 0.0, num_err = 0.0;
            enumerate_tuples(space, x, k, caps, [&](double weight, const auto& buf) {
                ++terms;
                const double w = weight * evaluate(phi, rho(space, buf.full()) / eps);
                if (w == 0.0) {
                    return;
                }
                double prod = 1.0;
                for (int i = 0; i < k; ++i) {
                    prod *= evaluate(fs[static_cast<std::size_t>(i)], space, buf.data[static_cast<std::size_t>(i) + 1]);
                }
                den += w;
                num += w * prod;
                num_abs += w * std::abs(prod);
                num_err += w * std::abs(prod - target);
            });
            out.J = Estimate{den, 0.0, terms, rng.seed, true};
            detail::check_resolution(out.J);
            out.mean = Estimate{num / den, 0.0, terms, rng.seed, true};
            out.abs_mean = Estimate{num_abs / den, 0.0, terms, rng.seed, true};
            out.identity_error = Estimate{num_err / den, 0.0, terms, rng.seed, true};
            return out;
        }
    }
    sample_kernel_tuples(space, phi, x, eps, k, n, rng, resolved, visit);
    out.J = Estimate{j_acc.mean(), j_acc.stderr(), n, rng.seed, false};
    detail::check_resolution(out.J);
    out.mean = Estimate{signed_acc.ratio(), signed_acc.stderr(), n, rng.seed, false};
    out.abs_mean = Estimate{abs_acc.ratio(), abs_acc.stderr(), n, rng.seed, false};
    out.identity_error = Estimate{err_acc.ratio(), err_acc.stderr(), n, rng.seed, false};
    return out;
}

/// J(x, eps) = int_{X^k} phi(rho(x, x_1..x_k)/eps) dmu^k.
template <MeasureSpace S>
Estimate j_normalizer(const S& space, const KernelProfile& phi, const PointOf<S>& x, double eps, int k,
                      std::uint64_t n, const RandomStream& rng, Method method = Method::automatic,
                      const EnumerationCaps& caps = {})
{
    check_order(k);
    check_profile_for(space, phi, k);
    if (!(eps > 0.0)) {
        throw std::invalid_argument("scale eps must be positive");
    }
    if constexpr (std::is_same_v<S, Cantor>) {
        if (method == Method::automatic || method == Method::exact) {
            const Estimate j{detail::cantor_normalizer(space, phi, eps, k), 0.0, 0, rng.seed, true};
            detail::check_resolution(j);
            return j;
        }
    }
    const std::vector<FunctionField> ones(static_cast<std::size_t>(k), FunctionField::constant(1.0));
    return kernel_means(space, phi, std::span<const FunctionField>(ones), x, eps, n, rng, method, caps).J;
}

/// Phi_eps(f_1..f_k)(x) with numerator and denominator on one sample set.
template <MeasureSpace S>
Estimate phi_mean(const S& space, const KernelProfile& phi, std::span<const FunctionField> fs, const PointOf<S>& x,
                  double eps, std::uint64_t n, const RandomStream& rng, Method method = Method::automatic,
                  const EnumerationCaps& caps = {})
{
    return kernel_means(space, phi, fs, x, eps, n, rng, method, caps).mean;
}

inline void check_grid(std::span<const double> grid)
{
    if (grid.empty()) {
        throw std::invalid_argument("scale grid must be nonempty");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
            throw std::invalid_argument("scale grid must be positive and strictly increasing");
        }
    }
}

/// sup over the eps grid of Phi_eps(|f_1|..|f_k|)(x); grid entry i uses
/// substream {i}.
template <MeasureSpace S>
MaximalEstimate phi_star(const S& space, const KernelProfile& phi, std::span<const FunctionField> fs,
                         const PointOf<S>& x, std::span<const double> eps_grid, std::uint64_t n,
                         const RandomStream& rng, Method method = Method::automatic, const EnumerationCaps& caps = {})
{
    check_grid(eps_grid);
    MaximalEstimate best;
    best.estimate.value = -1.0;
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        const auto m = kernel_means(space, phi, fs, x, eps_grid[i], n, rng.substream({i}), method, caps);
        if (m.abs_mean.value > best.estimate.value) {
            best.estimate = m.abs_mean;
            best.argmax = eps_grid[i];
        }
    }
    return best;
}

/// sup over the radius grid of the mu^k-average of prod |f_i| over E(x,r).
template <MeasureSpace S>
MaximalEstimate multilinear_maximal(const S& space, std::span<const FunctionField> fs, const PointOf<S>& x,
                                    std::span<const double> r_grid, std::uint64_t n, const RandomStream& rng,
                                    Method method = Method::automatic, const EnumerationCaps& caps = {})
{
    check_grid(r_grid);
    const KernelProfile indicator{ProfileKind::indicator};
    MaximalEstimate best;
    best.estimate.value = -1.0;
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        Estimate avg;
        try {
            avg = kernel_means(space, indicator, fs, x, r_grid[i], n, rng.substream({i}), method, caps).abs_mean;
        } catch (const ResolutionError&) {
            throw ResolutionError("empty section at r = " + std::to_string(r_grid[i]) +
                                  "; raise the sample count or drop this radius");
        }
        if (avg.value > best.estimate.value) {
            best.estimate = avg;
            best.argmax = r_grid[i];
        }
    }
    return best;
}

/// sup over the radius grid of the mu-average of |f| over B(x,r).
template <MeasureSpace S>
MaximalEstimate hl_maximal(const S& space, const FunctionField& f, const PointOf<S>& x, std::span<const double> r_grid,
                           std::uint64_t n, const RandomStream& rng, Method method = Method::automatic,
                           const EnumerationCaps& caps = {})
{
    check_grid(r_grid);
    check_function(f, space);
    const Method resolved = resolve_method(space, 1, method, caps);
    MaximalEstimate best;
    best.estimate.value = -1.0;
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        const double r = r_grid[i];
        Estimate avg;
        bool done = false;
        if constexpr (FiniteSpace<S>) {
            if (resolved == Method::exact) {
                double num = 0.0, den = 0.0;
                for (std::size_t j = 0; j < space.carrier_size(); ++j) {
                    const auto y = space.point_at(j);
                    if (space.distance(x, y) < r) {
                        den += space.weight_at(j);
                        num += space.weight_at(j) * std::abs(evaluate(f, space, y));
                    }
                }
                avg = Estimate{num / den, 0.0, space.carrier_size(), rng.seed, true};
                done = true;
            }
        }
        if (!done) {
            auto g = rng.substream({i}).engine();
            MeanAccumulator acc;
            if (resolved == Method::ambient) {
                RatioAccumulator ratio;
                for (std::uint64_t s = 0; s < n; ++s) {
                    const auto y = space.sample(g);
                    const double inside = space.distance(x, y) < r ? 1.0 : 0.0;
                    ratio.add(inside * std::abs(evaluate(f, space, y)), inside);
                }
                if (ratio.denominator_mean() == 0.0) {
                    throw ResolutionError("no samples in ball at r = " + std::to_string(r));
                }
                avg = Estimate{ratio.ratio(), ratio.stderr(), n, rng.seed, false};
            } else {
                const auto sampler = space.ball_sampler(x, r);
                for (std::uint64_t s = 0; s < n; ++s) {
                    acc.add(std::abs(evaluate(f, space, sampler(g))));
                }
                avg = Estimate{acc.mean(), acc.stderr(), n, rng.seed, false};
            }
        }
        if (avg.value > best.estimate.value) {
            best.estimate = avg;
            best.argmax = r;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Grids.
// ---------------------------------------------------------------------------

/// count points geometrically spaced from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, int count)
{
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
        throw std::invalid_argument("geometric grid needs 0 < lo <= hi and count >= 1");
    }
    std::vector<double> g;
    g.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        g.push_back(hi);
        return g;
    }
    // Ratio-2^m grids are generated exactly.
    const double steps = std::log2(hi / lo) / (count - 1);
    const double octaves = std::round(steps);
    const bool dyadic = octaves >= 1.0 && std::abs(steps - octaves) < 1e-12;
    const double ratio = std::log(hi / lo) / (count - 1);
    for (int i = 0; i < count; ++i) {
        if (i == count - 1) {
            g.push_back(hi);
        } else {
            g.push_back(dyadic ? std::ldexp(lo, i * static_cast<int>(octaves)) : lo * std::exp(ratio * i));
        }
    }
    return g;
}

/// Geometric grid with ratio at most 2 covering [lo, hi].
inline std::vector<double> dyadic_cover(double lo, double hi)
{
    const int count = std::max(2, static_cast<int>(std::ceil(std::log2(hi / lo))) + 1);
    return geometric_grid(lo, hi, count);
}

/// Radii that realise every distinct set {t : value(t) <= p} for the sorted
/// distinct values p: midpoints between consecutive values, plus one radius
/// above the largest.
inline std::vector<double> threshold_radii(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> radii;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        radii.push_back(0.5 * (values[i] + values[i + 1]));
    }
    const double top = values.empty() ? 0.0 : values.back();
    radii.push_back(top > 0.0 ? 2.0 * top : 1.0);
    return radii;
}

/// Every distinct section E(x,r) of a finite space, as a radius grid.
template <FiniteSpace S>
std::vector<double> exhaustive_section_radii(const S& space, const PointOf<S>& x, int k, const EnumerationCaps& caps = {})
{
    std::vector<double> values;
    enumerate_tuples(space, x, k, caps, [&](double, const auto& buf) { values.push_back(rho(space, buf.full())); });
    return threshold_radii(std::move(values));
}

/// Every distinct ball B(x,r) of a finite space, as a radius grid.
template <FiniteSpace S>
std::vector<double> exhaustive_ball_radii(const S& space, const PointOf<S>& x)
{
    std::vector<double> values;
    for (std::size_t i = 0; i < space.carrier_size(); ++i) {
        values.push_back(space.distance(x, space.point_at(i)));
    }
    return threshold_radii(std::move(values));
}

} // namespace hyperkernel
