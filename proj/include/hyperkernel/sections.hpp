#pragma once

// Sections E(x,r) = {(x_1,...,x_k) : rho(x, x_1, ..., x_k) < r} of the tube
// around the diagonal, and their mu^k measure.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "estimate.hpp"
#include "hypermetric.hpp"
#include "sampling.hpp"

namespace hyperkernel {

template <class P>
struct Section {
    P center{};
    double radius = 1.0;
    int order = 1;
};

template <MeasureSpace S>
void check_section(const Section<PointOf<S>>& s)
{
    if (!(s.radius > 0.0)) {
        throw std::invalid_argument("section radius must be positive");
    }
    check_order(s.order);
}

template <MeasureSpace S>
bool in_section(const S& space, const Section<PointOf<S>>& s, std::span<const PointOf<S>> ys)
{
    check_section<S>(s);
    if (ys.size() != static_cast<std::size_t>(s.order)) {
        throw std::invalid_argument("in_section: expected " + std::to_string(s.order) + " points, got " +
                                    std::to_string(ys.size()));
    }
    TupleBuffer<PointOf<S>> buf;
    buf.k = s.order;
    buf.data[0] = s.center;
    std::copy(ys.begin(), ys.end(), buf.data.begin() + 1);
    return rho(space, buf.full()) < s.radius;
}

/// mu^k(E(x,r)). On the Cantor set E(x,r) = B(x,r)^k (ultrametric), so the
/// exact value is mu(B(x,r))^k at any depth.
template <MeasureSpace S>
Estimate measure_section(const S& space, const Section<PointOf<S>>& s, std::uint64_t n, const RandomStream& rng,
                         Method method = Method::automatic, const EnumerationCaps& caps = {})
{
    check_section<S>(s);
    if (n < 1) {
        throw std::invalid_argument("measure_section needs n >= 1");
    }
    if constexpr (std::is_same_v<S, Cantor>) {
        if (method == Method::automatic || method == Method::exact) {
            return Estimate{std::pow(space.measure_ball(s.center, s.radius), s.order), 0.0, 0, rng.seed, true};
        }
    }
    const Method resolved = resolve_method(space, s.order, method, caps);
    const KernelProfile indicator{ProfileKind::indicator};
    if constexpr (FiniteSpace<S>) {
        if (resolved == Method::exact) {
            double total = 0.0;
            std::uint64_t terms = 0;
            enumerate_tuples(space, s.center, s.order, caps, [&](double w, const auto& buf) {
                ++terms;
                if (rho(space, buf.full()) < s.radius) {
                    total += w;
                }
            });
            return Estimate{total, 0.0, terms, rng.seed, true};
        }
    }
    MeanAccumulator acc;
    sample_kernel_tuples(space, indicator, s.center, s.radius, s.order, n, rng, resolved,
                         [&](double w, const auto&) { acc.add(w); });
    return Estimate{acc.mean(), acc.stderr(), n, rng.seed, false};
}

} // namespace hyperkernel
