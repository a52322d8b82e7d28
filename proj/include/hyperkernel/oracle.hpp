#pragma once

// Brute-force ground truth on finite spaces. Nothing here samples, and nothing
// here reuses the sampling or closed-form paths of the estimators: rho is a
// minimum over the whole carrier, sups are scans over sorted thresholds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "estimate.hpp"
#include "function_field.hpp"
#include "profile.hpp"
#include "space.hpp"

namespace hyperkernel {

struct ExactValue {
    double value = 0.0;
    std::uint64_t enumeration_size = 0;
};

struct OracleCaps {
    std::size_t carrier = 4096;
    std::uint64_t terms = 1'000'000;
};

namespace detail {

template <FiniteSpace S>
std::size_t checked_carrier(const S& space, const OracleCaps& caps)
{
    if constexpr (std::is_same_v<S, Cantor>) {
        if (space.depth() > 30) {
            throw CapExceeded("carrier exceeds the oracle cap");
        }
    }
    const std::size_t n = space.carrier_size();
    if (n > caps.carrier) {
        throw CapExceeded("carrier of " + std::to_string(n) + " points exceeds the oracle cap of " +
                          std::to_string(caps.carrier));
    }
    return n;
}

template <FiniteSpace S>
std::uint64_t checked_terms(const S& space, int k, const OracleCaps& caps)
{
    const std::uint64_t n = checked_carrier(space, caps);
    std::uint64_t total = 1;
    for (int i = 0; i < k; ++i) {
        if (total > caps.terms / n) {
            throw CapExceeded("carrier^k exceeds the oracle cap of " + std::to_string(caps.terms) + " terms");
        }
        total *= n;
    }
    return total;
}

template <FiniteSpace S>
double carrier_minimax(const S& space, std::span<const PointOf<S>> t)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < space.carrier_size(); ++u) {
        const auto c = space.point_at(u);
        double worst = 0.0;
        for (const auto& p : t) {
            worst = std::max(worst, space.distance(p, c));
        }
        best = std::min(best, worst);
    }
    return best;
}

/// One enumerated tuple: rho(x, tuple), mu^k weight and prod f_i.
struct TupleRecord {
    double rho = 0.0;
    double weight = 0.0;
    double product = 1.0;
};

template <FiniteSpace S>
std::vector<TupleRecord> enumerate_records(const S& space, const PointOf<S>& x, std::span<const FunctionField> fs,
                                           int k, const OracleCaps& caps)
{
    const std::uint64_t total = checked_terms(space, k, caps);
    const std::size_t n = space.carrier_size();
    std::vector<TupleRecord> out;
    out.reserve(total);
    std::vector<PointOf<S>> tuple(static_cast<std::size_t>(k) + 1);
    tuple[0] = x;
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t rest = code;
        TupleRecord rec;
        rec.weight = 1.0;
        for (int i = k; i >= 1; --i) {
            const std::size_t idx = rest % n;
            rest /= n;
            tuple[static_cast<std::size_t>(i)] = space.point_at(idx);
            rec.weight *= space.weight_at(idx);
        }
        for (int i = 1; i <= k; ++i) {
            rec.product *= fs.empty() ? 1.0 : evaluate(fs[static_cast<std::size_t>(i) - 1], space, tuple[static_cast<std::size_t>(i)]);
        }
        rec.rho = carrier_minimax(space, std::span<const PointOf<S>>(tuple));
        out.push_back(rec);
    }
    return out;
}

// Largest average of `value` over the sets {key < t}, scanning every distinct
// threshold of the sorted keys.
inline double best_prefix_average(std::vector<std::pair<double, std::pair<double, double>>> items)
{
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double num = 0.0;
    double den = 0.0;
    double best = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        num += items[i].second.first;
        den += items[i].second.second;
        if (i + 1 == items.size() || items[i + 1].first != items[i].first) {
            best = std::max(best, num / den);
        }
    }
    return best;
}

} // namespace detail

/// min over the full carrier of max_i d(x_i, u).
template <FiniteSpace S>
ExactValue exact_rho(const S& space, std::span<const PointOf<S>> t, const OracleCaps& caps = {})
{
    if (t.empty()) {
        throw std::invalid_argument("exact_rho needs a nonempty tuple");
    }
    const std::size_t n = detail::checked_carrier(space, caps);
    return ExactValue{detail::carrier_minimax(space, t), n};
}

template <FiniteSpace S>
ExactValue exact_normalizer(const S& space, const KernelProfile& phi, const PointOf<S>& x, double eps, int k,
                            const OracleCaps& caps = {})
{
    const auto records = detail::enumerate_records(space, x, {}, k, caps);
    double j = 0.0;
    for (const auto& r : records) {
        j += r.weight * evaluate(phi, r.rho / eps);
    }
    return ExactValue{j, records.size()};
}

template <FiniteSpace S>
ExactValue exact_phi_mean(const S& space, const KernelProfile& phi, std::span<const FunctionField> fs,
                          const PointOf<S>& x, double eps, const OracleCaps& caps = {}, bool absolute = false)
{
    const int k = static_cast<int>(fs.size());
    const auto records = detail::enumerate_records(space, x, fs, k, caps);
    double num = 0.0, den = 0.0;
    for (const auto& r : records) {
        const double w = r.weight * evaluate(phi, r.rho / eps);
        num += w * (absolute ? std::abs(r.product) : r.product);
        den += w;
    }
    if (!(den > 0.0)) {
        throw ResolutionError("J vanishes at this scale");
    }
    return ExactValue{num / den, records.size()};
}

/// Phi* over an explicit eps grid; an empty grid with the indicator profile
/// means the sup over every eps > 0.
template <FiniteSpace S>
ExactValue exact_phi_star(const S& space, const KernelProfile& phi, std::span<const FunctionField> fs,
                          const PointOf<S>& x, std::span<const double> eps_grid, const OracleCaps& caps = {})
{
    const int k = static_cast<int>(fs.size());
    const auto records = detail::enumerate_records(space, x, fs, k, caps);
    if (eps_grid.empty()) {
        if (phi.kind != ProfileKind::indicator) {
            throw std::invalid_argument("exact Phi* over all eps needs the indicator profile or an explicit grid");
        }
        std::vector<std::pair<double, std::pair<double, double>>> items;
        for (const auto& r : records) {
            items.push_back({r.rho, {r.weight * std::abs(r.product), r.weight}});
        }
        return ExactValue{detail::best_prefix_average(std::move(items)), records.size()};
    }
    double best = 0.0;
    for (const double eps : eps_grid) {
        double num = 0.0, den = 0.0;
        for (const auto& r : records) {
            const double w = r.weight * evaluate(phi, r.rho / eps);
            num += w * std::abs(r.product);
            den += w;
        }
        if (den > 0.0) {
            best = std::max(best, num / den);
        }
    }
    return ExactValue{best, records.size()};
}

/// Multilinear maximal function: sup over every section E(x,r).
template <FiniteSpace S>
ExactValue exact_multilinear_maximal(const S& space, std::span<const FunctionField> fs, const PointOf<S>& x,
                                     const OracleCaps& caps = {})
{
    const int k = static_cast<int>(fs.size());
    const auto records = detail::enumerate_records(space, x, fs, k, caps);
    std::vector<std::pair<double, std::pair<double, double>>> items;
    items.reserve(records.size());
    for (const auto& r : records) {
        items.push_back({r.rho, {r.weight * std::abs(r.product), r.weight}});
    }
    return ExactValue{detail::best_prefix_average(std::move(items)), records.size()};
}

/// Hardy-Littlewood maximal function: sup over every ball B(x,r).
template <FiniteSpace S>
ExactValue exact_hl_maximal(const S& space, const FunctionField& f, const PointOf<S>& x, const OracleCaps& caps = {})
{
    const std::size_t n = detail::checked_carrier(space, caps);
    std::vector<std::pair<double, std::pair<double, double>>> items;
    items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = space.point_at(i);
        items.push_back({space.distance(x, y), {space.weight_at(i) * std::abs(evaluate(f, space, y)), space.weight_at(i)}});
    }
    return ExactValue{detail::best_prefix_average(std::move(items)), n};
}

enum class OracleOperator { J, phi_mean, phi_star, M, HL };

template <class P>
struct OracleArgs {
    P x{};
    int k = 1;
    KernelProfile profile{};
    std::vector<FunctionField> functions;
    double eps = 1.0;
    std::vector<double> eps_grid;
};

template <FiniteSpace S>
ExactValue exact_operator(const S& space, OracleOperator which, const OracleArgs<PointOf<S>>& a,
                          const OracleCaps& caps = {})
{
    switch (which) {
    case OracleOperator::J: return exact_normalizer(space, a.profile, a.x, a.eps, a.k, caps);
    case OracleOperator::phi_mean: return exact_phi_mean(space, a.profile, std::span<const FunctionField>(a.functions), a.x, a.eps, caps);
    case OracleOperator::phi_star:
        return exact_phi_star(space, a.profile, std::span<const FunctionField>(a.functions), a.x,
                              std::span<const double>(a.eps_grid), caps);
    case OracleOperator::M: return exact_multilinear_maximal(space, std::span<const FunctionField>(a.functions), a.x, caps);
    case OracleOperator::HL:
        if (a.functions.size() != 1) {
            throw std::invalid_argument("HL oracle takes exactly one function");
        }
        return exact_hl_maximal(space, a.functions.front(), a.x, caps);
    }
    throw std::invalid_argument("unknown oracle operator");
}

} // namespace hyperkernel
