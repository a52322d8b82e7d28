#pragma once

// Hypermetric rho(x_0,...,x_k) = inf_u max_i d(x_i, u): the sup-product
// distance from (x_0,...,x_k) to the diagonal, i.e. the value of the minimax
// 1-center problem over the space's own carrier.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "space.hpp"

namespace hyperkernel {

/// Largest supported tuple length k + 1.
inline constexpr std::size_t kMaxTupleLength = 16;

template <MeasureSpace S>
void check_tuple(std::span<const PointOf<S>> tuple)
{
    if (tuple.size() < 2) {
        throw std::invalid_argument("a hypermetric tuple needs at least two points");
    }
}

template <MeasureSpace S>
double tuple_diameter(const S& space, std::span<const PointOf<S>> tuple)
{
    double d = 0.0;
    for (std::size_t i = 0; i < tuple.size(); ++i) {
        for (std::size_t j = i + 1; j < tuple.size(); ++j) {
            d = std::max(d, space.distance(tuple[i], tuple[j]));
        }
    }
    return d;
}

/// Half the shortest arc covering `values` on a circle of length `period`.
inline double circle_one_center(std::span<const double> values, double period)
{
    std::array<double, kMaxTupleLength> sorted{};
    const std::size_t n = values.size();
    std::copy(values.begin(), values.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
    // Covering arc that skips the largest gap; the unwrapped arc is formed
    // without the period so two points give exactly d/2.
    double arc = sorted[n - 1] - sorted[0];
    for (std::size_t i = 1; i < n; ++i) {
        arc = std::min(arc, period - (sorted[i] - sorted[i - 1]));
    }
    return std::max(0.0, arc / 2.0);
}

/// Closed form: the l-infinity product separates, and on each circle factor
/// the optimal center is the midpoint of the smallest covering arc.
inline double rho(const Torus& space, std::span<const TorusPoint> tuple)
{
    check_tuple<Torus>(tuple);
    if (tuple.size() > kMaxTupleLength) {
        throw std::invalid_argument("tuple too long");
    }
    std::array<double, kMaxTupleLength> coords{};
    double value = 0.0;
    for (int c = 0; c < space.dimension(); ++c) {
        for (std::size_t i = 0; i < tuple.size(); ++i) {
            coords[i] = tuple[i].x[static_cast<std::size_t>(c)];
        }
        value = std::max(value, circle_one_center(std::span(coords.data(), tuple.size()), space.circumference()));
    }
    return value;
}

/// t -> t^beta is increasing, so the minimax problem transfers from the circle.
inline double rho(const PowerCircle& space, std::span<const TorusPoint> tuple)
{
    return std::pow(rho(space.base_circle(), tuple), space.beta());
}

/// Ultrametric identity: rho equals the tuple diameter, 2^-(common prefix).
inline double rho(const Cantor& space, std::span<const CantorWord> tuple)
{
    check_tuple<Cantor>(tuple);
    std::uint64_t differ = 0;
    for (const auto& w : tuple) {
        differ |= w.bits ^ tuple.front().bits;
    }
    if (differ == 0) {
        return 0.0;
    }
    return std::ldexp(1.0, -(space.depth() - std::bit_width(differ)));
}

/// Enumeration over the carrier with early exit once a candidate cannot beat
/// the incumbent.
inline double rho(const FiniteCloud& space, std::span<const CloudIndex> tuple)
{
    check_tuple<FiniteCloud>(tuple);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < space.size(); ++u) {
        const CloudIndex cu{static_cast<std::uint32_t>(u)};
        double worst = 0.0;
        for (const auto& p : tuple) {
            worst = std::max(worst, space.distance(p, cu));
            if (worst >= best) {
                break;
            }
        }
        best = std::min(best, worst);
    }
    return best;
}

/// min over `candidates` of max_i d(x_i, u); an upper bound on rho, exact when
/// the candidates are the whole carrier.
template <MeasureSpace S>
double rho_bruteforce(const S& space, std::span<const PointOf<S>> tuple, std::span<const PointOf<S>> candidates)
{
    check_tuple<S>(tuple);
    if (candidates.empty()) {
        throw std::invalid_argument("rho_bruteforce needs at least one candidate");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& u : candidates) {
        double worst = 0.0;
        for (const auto& p : tuple) {
            worst = std::max(worst, space.distance(p, u));
        }
        best = std::min(best, worst);
    }
    return best;
}

struct RhoBound {
    double value = 0.0;
    double error_bound = 0.0;
};

/// Multiscale grid search for the circle factors of a torus. The returned
/// value is attained by a grid center, so it is an upper bound on rho; the
/// reported error bound is the final grid spacing.
inline RhoBound rho_grid_refine(const Torus& space, std::span<const TorusPoint> tuple, int coarse_points = 256,
                                int levels = 8)
{
    check_tuple<Torus>(tuple);
    const double period = space.circumference();
    double value = 0.0;
    double spacing = period / coarse_points;
    for (int c = 0; c < space.dimension(); ++c) {
        auto worst_at = [&](double u) {
            double w = 0.0;
            for (const auto& p : tuple) {
                w = std::max(w, circular_distance(p.x[static_cast<std::size_t>(c)], wrap_periodic(u, period), period));
            }
            return w;
        };
        double best_u = 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < coarse_points; ++i) {
            const double u = period * i / coarse_points;
            if (const double w = worst_at(u); w < best) {
                best = w;
                best_u = u;
            }
        }
        spacing = period / coarse_points;
        for (int level = 0; level < levels; ++level) {
            const double lo = best_u - spacing;
            const double step = 2.0 * spacing / 16.0;
            for (int i = 0; i <= 16; ++i) {
                const double u = lo + step * i;
                if (const double w = worst_at(u); w < best) {
                    best = w;
                    best_u = u;
                }
            }
            spacing = step;
        }
        value = std::max(value, best);
    }
    return RhoBound{value, spacing};
}

/// Euclidean distance from (x_1,...,x_m) to the line {(z,...,z)} in R^m.
inline double euclidean_diagonal_distance(std::span<const double> coordinates)
{
    if (coordinates.size() < 2) {
        throw std::invalid_argument("euclidean_diagonal_distance needs m >= 2");
    }
    double mean = 0.0;
    for (const double v : coordinates) {
        mean += v;
    }
    mean /= static_cast<double>(coordinates.size());
    double s = 0.0;
    for (const double v : coordinates) {
        s += (v - mean) * (v - mean);
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Smallest enclosing ball in ambient R^N (Welzl, move-to-front).
// ---------------------------------------------------------------------------
template <std::size_t N>
struct Ball {
    std::array<double, N> center{};
    double radius = 0.0;
};

namespace detail {

template <std::size_t N>
double squared_distance(const std::array<double, N>& a, const std::array<double, N>& b)
{
    double s = 0.0;
    for (std::size_t c = 0; c < N; ++c) {
        s += (a[c] - b[c]) * (a[c] - b[c]);
    }
    return s;
}

// Ball with all `support` points on its boundary, centered in their affine hull.
template <std::size_t N>
std::optional<Ball<N>> circumball(std::span<const std::array<double, N>> support)
{
    Ball<N> ball;
    if (support.empty()) {
        ball.radius = -1.0;
        return ball;
    }
    const auto& p0 = support[0];
    const std::size_t s = support.size() - 1;
    if (s == 0) {
        ball.center = p0;
        return ball;
    }
    if (s > N) {
        return std::nullopt;
    }
    // Gram system 2 (v_j . v_i) lambda_i = |v_j|^2, v_j = p_j - p0.
    std::array<std::array<double, N + 1>, N> m{};
    std::array<std::array<double, N>, N> v{};
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t c = 0; c < N; ++c) {
            v[j][c] = support[j + 1][c] - p0[c];
        }
    }
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t i = 0; i < s; ++i) {
            double dot = 0.0;
            for (std::size_t c = 0; c < N; ++c) {
                dot += v[j][c] * v[i][c];
            }
            m[j][i] = 2.0 * dot;
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < N; ++c) {
            norm += v[j][c] * v[j][c];
        }
        m[j][N] = norm;
    }
    for (std::size_t col = 0; col < s; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < s; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
                pivot = r;
            }
        }
        if (std::abs(m[pivot][col]) < 1e-14) {
            return std::nullopt;
        }
        std::swap(m[col], m[pivot]);
        for (std::size_t r = 0; r < s; ++r) {
            if (r == col) {
                continue;
            }
            const double f = m[r][col] / m[col][col];
            for (std::size_t c = col; c < s; ++c) {
                m[r][c] -= f * m[col][c];
            }
            m[r][N] -= f * m[col][N];
        }
    }
    ball.center = p0;
    for (std::size_t i = 0; i < s; ++i) {
        const double lambda = m[i][N] / m[i][i];
        for (std::size_t c = 0; c < N; ++c) {
            ball.center[c] += lambda * v[i][c];
        }
    }
    ball.radius = std::sqrt(squared_distance(ball.center, p0));
    return ball;
}

template <std::size_t N>
bool inside(const Ball<N>& ball, const std::array<double, N>& p)
{
    if (ball.radius < 0.0) {
        return false;
    }
    const double r = ball.radius * (1.0 + 1e-12) + 1e-15;
    return squared_distance(ball.center, p) <= r * r;
}

template <std::size_t N>
Ball<N> welzl(std::vector<std::array<double, N>>& points, std::size_t end, std::vector<std::array<double, N>>& support)
{
    auto trivial = circumball<N>(support);
    Ball<N> ball = trivial ? *trivial : Ball<N>{{}, std::numeric_limits<double>::infinity()};
    if (support.size() == N + 1) {
        return ball;
    }
    for (std::size_t i = 0; i < end; ++i) {
        if (!inside(ball, points[i])) {
            support.push_back(points[i]);
            ball = welzl<N>(points, i, support);
            support.pop_back();
            // move-to-front
            std::rotate(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(i),
                        points.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        }
    }
    return ball;
}

} // namespace detail

template <std::size_t N>
Ball<N> smallest_enclosing_ball(std::span<const std::array<double, N>> points)
{
    if (points.empty()) {
        throw std::invalid_argument("smallest_enclosing_ball needs at least one point");
    }
    std::vector<std::array<double, N>> work(points.begin(), points.end());
    std::vector<std::array<double, N>> support;
    support.reserve(N + 1);
    return detail::welzl<N>(work, work.size(), support);
}

// ---------------------------------------------------------------------------
// Runtime dispatch.
// ---------------------------------------------------------------------------
template <MeasureSpace S>
std::vector<PointOf<S>> points_for(const S& space, std::span<const AnyPoint> tuple)
{
    std::vector<PointOf<S>> out;
    out.reserve(tuple.size());
    for (const auto& p : tuple) {
        out.push_back(point_for(space, p));
    }
    return out;
}

inline double rho(const AnySpace& space, std::span<const AnyPoint> tuple)
{
    return std::visit(
        [&](const auto& s) {
            const auto pts = points_for(s, tuple);
            return rho(s, std::span<const PointOf<std::decay_t<decltype(s)>>>(pts));
        },
        space);
}

} // namespace hyperkernel
