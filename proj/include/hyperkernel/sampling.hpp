#pragma once

// Tuple sources for kernel integrals over X^k.
//
// Localized Monte Carlo draws (x_1,...,x_k) from a mixture of product balls
// B(x, R_j)^k, R_j = 2 kappa eps 2^j. Because E(x,r) lies inside
// B(x, 2 kappa r)^k, every tuple outside B(x, R_{j-1})^k has
// rho >= eps 2^(j-1); level j therefore gets weight proportional to
// phi(2^(j-1)) mu(B(x,R_j))^k, which bounds every importance weight by the
// sum of the level weights. Levels stop once phi vanishes on the shell or the
// ball covers the whole space, so the estimator stays unbiased.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "hypermetric.hpp"
#include "profile.hpp"
#include "random.hpp"
#include "space.hpp"

namespace hyperkernel {

enum class Method {
    automatic,   ///< exact when the space is finite and within caps, else monte_carlo
    monte_carlo, ///< localized (ball-mixture) importance sampling
    ambient,     ///< plain mu^k sampling over the whole space
    exact,       ///< enumeration / closed form; throws when unavailable
};

inline const char* to_string(Method m)
{
    switch (m) {
    case Method::automatic: return "automatic";
    case Method::monte_carlo: return "monte-carlo";
    case Method::ambient: return "ambient";
    case Method::exact: return "exact";
    }
    return "unknown";
}

/// Limits on exhaustive enumeration. Exceeding them is an error, never a
/// silent switch to sampling.
struct EnumerationCaps {
    std::size_t carrier = 4096;
    std::uint64_t terms = 1'000'000;
};

inline void check_order(int k)
{
    if (k < 1 || static_cast<std::size_t>(k) + 1 > kMaxTupleLength) {
        throw std::invalid_argument("order k must be in [1, " + std::to_string(kMaxTupleLength - 1) + "]");
    }
}

/// Number of k-tuples of a finite carrier, or 0 on overflow past the cap.
template <MeasureSpace S>
std::uint64_t enumeration_size(const S& space, int k, const EnumerationCaps& caps)
{
    if constexpr (FiniteSpace<S>) {
        if constexpr (std::is_same_v<S, Cantor>) {
            if (space.depth() > 30) {
                return 0;
            }
        }
        const std::uint64_t n = space.carrier_size();
        if (n > caps.carrier) {
            return 0;
        }
        std::uint64_t total = 1;
        for (int i = 0; i < k; ++i) {
            if (total > caps.terms / n) {
                return 0;
            }
            total *= n;
        }
        return total;
    } else {
        return 0;
    }
}

template <MeasureSpace S>
bool enumerable(const S& space, int k, const EnumerationCaps& caps = {})
{
    return enumeration_size(space, k, caps) != 0;
}

/// Resolves `automatic`, and rejects `exact` where it is unavailable.
template <MeasureSpace S>
Method resolve_method(const S& space, int k, Method method, const EnumerationCaps& caps = {})
{
    if (method == Method::automatic) {
        return enumerable(space, k, caps) ? Method::exact : Method::monte_carlo;
    }
    if (method == Method::exact && !enumerable(space, k, caps)) {
        throw CapExceeded("exact evaluation unavailable: carrier^k exceeds the enumeration cap or the space is continuous");
    }
    return method;
}

/// Buffer holding (x, x_1, ..., x_k).
template <class P>
struct TupleBuffer {
    std::array<P, kMaxTupleLength> data{};
    int k = 1;

    std::span<const P> full() const { return std::span<const P>(data.data(), static_cast<std::size_t>(k) + 1); }
    std::span<const P> tail() const { return std::span<const P>(data.data() + 1, static_cast<std::size_t>(k)); }
};

template <MeasureSpace S>
class ScaleMixture {
public:
    using P = PointOf<S>;
    using Sampler = decltype(std::declval<const S&>().ball_sampler(std::declval<const P&>(), 1.0));

    ScaleMixture(const S& space, const KernelProfile& phi, const P& x, double eps, int k) : space_(&space), x_(x), k_(k)
    {
        const double base = 2.0 * space.constants().kappa * eps;
        std::vector<double> mass_weight;
        for (int j = 0; j < 200; ++j) {
            const double phi_bound = j == 0 ? evaluate(phi, 0.0) : evaluate(phi, std::ldexp(1.0, j - 1));
            if (j > 0 && phi_bound == 0.0) {
                break;
            }
            const double radius = std::ldexp(base, j);
            samplers_.push_back(space.ball_sampler(x, radius));
            radii_.push_back(radius);
            const double m = samplers_.back().measure();
            const double mk = std::pow(m, k);
            measures_k_.push_back(mk);
            mass_weight.push_back(phi_bound * mk);
            if (radius > space.diameter()) {
                break;
            }
        }
        total_ = 0.0;
        for (const double c : mass_weight) {
            total_ += c;
        }
        if (!(total_ > 0.0)) {
            throw ResolutionError("kernel mixture has zero mass");
        }
        cumulative_.resize(mass_weight.size());
        double acc = 0.0;
        for (std::size_t j = 0; j < mass_weight.size(); ++j) {
            acc += mass_weight[j] / total_;
            cumulative_[j] = acc;
        }
        // Unnormalized density tail; a single level gives importance exactly
        // mu(B)^k.
        tail_.assign(mass_weight.size() + 1, 0.0);
        for (std::size_t j = mass_weight.size(); j-- > 0;) {
            tail_[j] = tail_[j + 1] + (measures_k_[j] > 0.0 ? mass_weight[j] / measures_k_[j] : 0.0);
        }
    }

    std::size_t levels() const noexcept { return radii_.size(); }

    /// Fills buf.data[1..k] and returns the importance weight 1/q(y).
    double draw(StreamEngine& g, TupleBuffer<P>& buf) const
    {
        const double u = g.uniform();
        std::size_t level = 0;
        while (level + 1 < cumulative_.size() && u >= cumulative_[level]) {
            ++level;
        }
        double reach = 0.0;
        for (int i = 1; i <= k_; ++i) {
            buf.data[static_cast<std::size_t>(i)] = samplers_[level](g);
            reach = std::max(reach, space_->distance(x_, buf.data[static_cast<std::size_t>(i)]));
        }
        std::size_t inner = 0;
        while (inner < level && !(reach < radii_[inner])) {
            ++inner;
        }
        return total_ / tail_[inner];
    }

private:
    const S* space_;
    P x_;
    int k_;
    std::vector<Sampler> samplers_;
    std::vector<double> radii_;
    std::vector<double> measures_k_;
    std::vector<double> cumulative_;
    std::vector<double> tail_;
    double total_ = 0.0;
};

/// Calls visit(w, tuple) for n sampled tuples, w = phi(rho/eps) * importance.
template <MeasureSpace S, class Visit>
void sample_kernel_tuples(const S& space, const KernelProfile& phi, const PointOf<S>& x, double eps, int k,
                          std::uint64_t n, const RandomStream& rng, Method method, Visit&& visit)
{
    check_order(k);
    if (!(eps > 0.0)) {
        throw std::invalid_argument("scale must be positive");
    }
    TupleBuffer<PointOf<S>> buf;
    buf.k = k;
    buf.data[0] = x;
    auto g = rng.engine();
    if (method == Method::ambient) {
        const double mass_k = std::pow(space.total_mass(), k);
        for (std::uint64_t s = 0; s < n; ++s) {
            for (int i = 1; i <= k; ++i) {
                buf.data[static_cast<std::size_t>(i)] = space.sample(g);
            }
            visit(mass_k * evaluate(phi, rho(space, buf.full()) / eps), buf);
        }
        return;
    }
    const ScaleMixture<S> mixture(space, phi, x, eps, k);
    for (std::uint64_t s = 0; s < n; ++s) {
        const double importance = mixture.draw(g, buf);
        visit(importance * evaluate(phi, rho(space, buf.full()) / eps), buf);
    }
}

/// Calls visit(mu^k({tuple}), tuple) for every k-tuple of a finite carrier.
template <FiniteSpace S, class Visit>
void enumerate_tuples(const S& space, const PointOf<S>& x, int k, const EnumerationCaps& caps, Visit&& visit)
{
    check_order(k);
    if (enumeration_size(space, k, caps) == 0) {
        throw CapExceeded("carrier^k exceeds the enumeration cap");
    }
    const std::size_t n = space.carrier_size();
    std::vector<std::size_t> idx(static_cast<std::size_t>(k), 0);
    TupleBuffer<PointOf<S>> buf;
    buf.k = k;
    buf.data[0] = x;
    while (true) {
        double w = 1.0;
        for (int i = 0; i < k; ++i) {
            buf.data[static_cast<std::size_t>(i) + 1] = space.point_at(idx[static_cast<std::size_t>(i)]);
            w *= space.weight_at(idx[static_cast<std::size_t>(i)]);
        }
        visit(w, buf);
        int pos = k - 1;
        while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == n) {
            idx[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) {
            break;
        }
    }
}

} // namespace hyperkernel
