#pragma once

// Quasi-metric measure spaces.
//
// Every space is bounded and has finite total measure so that it can be
// sampled. Ahlfors bounds are only guaranteed on [r_min, r_max].

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "estimate.hpp"
#include "random.hpp"

namespace hyperkernel {

enum class SpaceKind { circle, torus, power_circle, cantor, finite_cloud };

inline const char* to_string(SpaceKind kind)
{
    switch (kind) {
    case SpaceKind::circle: return "circle";
    case SpaceKind::torus: return "torus";
    case SpaceKind::power_circle: return "power-circle";
    case SpaceKind::cantor: return "cantor";
    case SpaceKind::finite_cloud: return "finite-cloud";
    }
    return "unknown";
}

struct AhlforsConstants {
    double alpha = 1.0;
    double gamma = 1.0;
    double Gamma = 1.0;

    friend bool operator==(const AhlforsConstants&, const AhlforsConstants&) = default;
};

/// Triangle constant, doubling constant and (optional) Ahlfors constants.
struct GeometricConstants {
    double kappa = 1.0;
    double doubling_A = 2.0;
    std::optional<AhlforsConstants> ahlfors;
    double r_max = 1.0;
    double r_min = 0.0;

    friend bool operator==(const GeometricConstants&, const GeometricConstants&) = default;
};

inline void check_constants(const GeometricConstants& c)
{
    if (!(c.kappa >= 1.0)) {
        throw std::invalid_argument("kappa must be >= 1");
    }
    if (!(c.doubling_A > 1.0)) {
        throw std::invalid_argument("doubling_A must be > 1");
    }
    if (!(c.r_max > 0.0) || c.r_min < 0.0 || c.r_min > c.r_max) {
        throw std::invalid_argument("need 0 <= r_min <= r_max and r_max > 0");
    }
    if (c.ahlfors) {
        const auto& a = *c.ahlfors;
        if (!(a.alpha > 0.0) || !(a.gamma > 0.0) || !(a.Gamma >= a.gamma)) {
            throw std::invalid_argument("Ahlfors constants need alpha > 0 and 0 < gamma <= Gamma");
        }
    }
}

inline double circular_distance(double a, double b, double period) noexcept
{
    const double diff = std::abs(a - b);
    return std::min(diff, period - diff);
}

inline double wrap_periodic(double v, double period) noexcept
{
    v = std::fmod(v, period);
    if (v < 0.0) {
        v += period;
    }
    if (v >= period) {
        v -= period;
    }
    return v;
}

inline constexpr int kMaxTorusDimension = 3;

struct TorusPoint {
    std::array<double, kMaxTorusDimension> x{};

    friend bool operator==(const TorusPoint&, const TorusPoint&) = default;
};

/// A word in {0,1}^m; letter 0 is the most significant of the m low bits.
struct CantorWord {
    std::uint64_t bits = 0;

    friend bool operator==(const CantorWord&, const CantorWord&) = default;
};

struct CloudIndex {
    std::uint32_t index = 0;

    friend bool operator==(const CloudIndex&, const CloudIndex&) = default;
};

// ---------------------------------------------------------------------------
// Torus (R/LZ)^n with the l-infinity product of circle distances. n = 1 is
// the circle.
// ---------------------------------------------------------------------------
class Torus {
public:
    using point_type = TorusPoint;

    class BallSampler {
    public:
        BallSampler(const Torus& space, const TorusPoint& center, double r)
            : center_(center), half_width_(std::min(r, space.period_ / 2.0)), period_(space.period_),
              dimension_(space.dimension_), measure_(space.measure_ball(center, r))
        {
        }

        double measure() const noexcept { return measure_; }

        TorusPoint operator()(StreamEngine& g) const noexcept
        {
            TorusPoint p;
            for (int c = 0; c < dimension_; ++c) {
                const double offset = half_width_ * (2.0 * g.uniform() - 1.0);
                p.x[c] = wrap_periodic(center_.x[c] + offset, period_);
            }
            return p;
        }

    private:
        TorusPoint center_;
        double half_width_;
        double period_;
        int dimension_;
        double measure_;
    };

    explicit Torus(int dimension = 1, double circumference = 1.0)
        : dimension_(dimension), period_(circumference)
    {
        if (dimension < 1 || dimension > kMaxTorusDimension) {
            throw std::invalid_argument("torus dimension must be in [1, 3]");
        }
        if (!(circumference > 0.0)) {
            throw std::invalid_argument("circumference must be positive");
        }
        const double n = dimension;
        constants_.kappa = 1.0;
        constants_.ahlfors = AhlforsConstants{n, std::exp2(n), std::exp2(n)};
        constants_.doubling_A = std::exp2(n);
        constants_.r_max = circumference / 4.0;
    }

    SpaceKind kind() const noexcept { return dimension_ == 1 ? SpaceKind::circle : SpaceKind::torus; }
    std::string name() const { return to_string(kind()); }
    int dimension() const noexcept { return dimension_; }
    double circumference() const noexcept { return period_; }
    const GeometricConstants& constants() const noexcept { return constants_; }
    void set_constants(const GeometricConstants& c)
    {
        check_constants(c);
        constants_ = c;
    }

    double total_mass() const noexcept { return std::pow(period_, dimension_); }
    double diameter() const noexcept { return period_ / 2.0; }

    bool contains(const TorusPoint& p) const noexcept
    {
        for (int c = 0; c < kMaxTorusDimension; ++c) {
            const bool ok = c < dimension_ ? (p.x[c] >= 0.0 && p.x[c] < period_) : p.x[c] == 0.0;
            if (!ok) {
                return false;
            }
        }
        return true;
    }

    double distance(const TorusPoint& a, const TorusPoint& b) const noexcept
    {
        double d = 0.0;
        for (int c = 0; c < dimension_; ++c) {
            d = std::max(d, circular_distance(a.x[c], b.x[c], period_));
        }
        return d;
    }

    double measure_ball(const TorusPoint&, double r) const noexcept
    {
        return std::pow(2.0 * std::min(r, period_ / 2.0), dimension_);
    }

    TorusPoint sample(StreamEngine& g) const noexcept
    {
        TorusPoint p;
        for (int c = 0; c < dimension_; ++c) {
            p.x[c] = period_ * g.uniform();
        }
        return p;
    }

    BallSampler ball_sampler(const TorusPoint& center, double r) const { return BallSampler(*this, center, r); }

    /// First coordinate scaled to [0, 1); catalog functions are evaluated here.
    double position(const TorusPoint& p) const noexcept { return p.x[0] / period_; }

    TorusPoint point_at_position(double u) const noexcept
    {
        TorusPoint p;
        p.x[0] = wrap_periodic(u * period_, period_);
        return p;
    }

private:
    int dimension_;
    double period_;
    GeometricConstants constants_;
};

// ---------------------------------------------------------------------------
// Circle with the quasi-metric d = (circle distance)^beta, beta >= 1.
// ---------------------------------------------------------------------------
class PowerCircle {
public:
    using point_type = TorusPoint;

    class BallSampler {
    public:
        BallSampler(const PowerCircle& space, const TorusPoint& center, double r)
            : inner_(space.circle_, center, space.circle_radius(r))
        {
        }

        double measure() const noexcept { return inner_.measure(); }
        TorusPoint operator()(StreamEngine& g) const noexcept { return inner_(g); }

    private:
        Torus::BallSampler inner_;
    };

    explicit PowerCircle(double beta = 2.0, double circumference = 1.0) : circle_(1, circumference), beta_(beta)
    {
        if (!(beta >= 1.0)) {
            throw std::invalid_argument("power-circle needs beta >= 1");
        }
        constants_.kappa = std::exp2(beta - 1.0);
        constants_.ahlfors = AhlforsConstants{1.0 / beta, 2.0, 2.0};
        constants_.doubling_A = std::exp2(1.0 / beta);
        constants_.r_max = std::pow(circumference / 4.0, beta);
    }

    SpaceKind kind() const noexcept { return SpaceKind::power_circle; }
    std::string name() const { return to_string(kind()); }
    double beta() const noexcept { return beta_; }
    double circumference() const noexcept { return circle_.circumference(); }
    const Torus& base_circle() const noexcept { return circle_; }
    const GeometricConstants& constants() const noexcept { return constants_; }
    void set_constants(const GeometricConstants& c)
    {
        check_constants(c);
        constants_ = c;
    }

    double total_mass() const noexcept { return circle_.total_mass(); }
    double diameter() const noexcept { return std::pow(circle_.diameter(), beta_); }
    bool contains(const TorusPoint& p) const noexcept { return circle_.contains(p); }

    double distance(const TorusPoint& a, const TorusPoint& b) const noexcept
    {
        return std::pow(circle_.distance(a, b), beta_);
    }

    /// Circle-metric radius of the d-ball of radius r.
    double circle_radius(double r) const noexcept { return std::pow(r, 1.0 / beta_); }

    double measure_ball(const TorusPoint& p, double r) const noexcept
    {
        return circle_.measure_ball(p, circle_radius(r));
    }

    TorusPoint sample(StreamEngine& g) const noexcept { return circle_.sample(g); }
    BallSampler ball_sampler(const TorusPoint& center, double r) const { return BallSampler(*this, center, r); }
    double position(const TorusPoint& p) const noexcept { return circle_.position(p); }
    TorusPoint point_at_position(double u) const noexcept { return circle_.point_at_position(u); }

private:
    Torus circle_;
    double beta_;
    GeometricConstants constants_;
};

// ---------------------------------------------------------------------------
// Dyadic Cantor set truncated at depth m: words {0,1}^m, uniform weights
// 2^-m, ultrametric d(x,y) = 2^-lcp(x,y).
// ---------------------------------------------------------------------------
class Cantor {
public:
    using point_type = CantorWord;

    class BallSampler {
    public:
        BallSampler(const Cantor& space, const CantorWord& center, double r)
        {
            const int level = space.ball_level(r);
            free_bits_ = space.depth_ - level;
            prefix_ = free_bits_ >= 64 ? 0 : (center.bits >> free_bits_) << free_bits_;
            measure_ = std::ldexp(1.0, -level);
        }

        double measure() const noexcept { return measure_; }

        CantorWord operator()(StreamEngine& g) const noexcept
        {
            if (free_bits_ == 0) {
                return CantorWord{prefix_};
            }
            return CantorWord{prefix_ | (g() >> (64 - free_bits_))};
        }

    private:
        std::uint64_t prefix_ = 0;
        int free_bits_ = 0;
        double measure_ = 1.0;
    };

    explicit Cantor(int depth = 3) : depth_(depth)
    {
        if (depth < 1 || depth > 62) {
            throw std::invalid_argument("cantor depth must be in [1, 62]");
        }
        constants_.kappa = 1.0;
        constants_.ahlfors = AhlforsConstants{1.0, 0.5, 1.0};
        constants_.doubling_A = 4.0;
        constants_.r_max = 0.5;
        constants_.r_min = std::ldexp(1.0, -depth);
    }

    SpaceKind kind() const noexcept { return SpaceKind::cantor; }
    std::string name() const { return to_string(kind()); }
    int depth() const noexcept { return depth_; }
    const GeometricConstants& constants() const noexcept { return constants_; }
    void set_constants(const GeometricConstants& c)
    {
        check_constants(c);
        constants_ = c;
    }

    double total_mass() const noexcept { return 1.0; }
    double diameter() const noexcept { return 1.0; }
    bool contains(const CantorWord& p) const noexcept { return (p.bits >> depth_) == 0; }

    int common_prefix(const CantorWord& a, const CantorWord& b) const noexcept
    {
        return depth_ - std::bit_width(a.bits ^ b.bits);
    }

    double distance(const CantorWord& a, const CantorWord& b) const noexcept
    {
        if (a == b) {
            return 0.0;
        }
        return std::ldexp(1.0, -common_prefix(a, b));
    }

    /// Prefix length of the cylinder B(x, r) = {y : d(x,y) < r}, capped at m.
    int ball_level(double r) const noexcept
    {
        int level = 0;
        while (level < depth_ && !(std::ldexp(1.0, -level) < r)) {
            ++level;
        }
        return level;
    }

    double measure_ball(const CantorWord&, double r) const noexcept
    {
        if (!(r > 0.0)) {
            return 0.0;
        }
        return std::ldexp(1.0, -ball_level(r));
    }

    CantorWord sample(StreamEngine& g) const noexcept { return CantorWord{g() >> (64 - depth_)}; }
    BallSampler ball_sampler(const CantorWord& center, double r) const { return BallSampler(*this, center, r); }

    /// Binary value of the word in [0, 1).
    double position(const CantorWord& p) const noexcept { return std::ldexp(static_cast<double>(p.bits), -depth_); }

    CantorWord point_at_position(double u) const noexcept
    {
        const double scaled = std::floor(wrap_periodic(u, 1.0) * std::ldexp(1.0, depth_));
        return CantorWord{static_cast<std::uint64_t>(scaled)};
    }

    std::size_t carrier_size() const
    {
        if (depth_ > 30) {
            throw CapExceeded("cantor carrier too large to enumerate");
        }
        return std::size_t{1} << depth_;
    }
    CantorWord point_at(std::size_t i) const noexcept { return CantorWord{i}; }
    double weight_at(std::size_t) const noexcept { return std::ldexp(1.0, -depth_); }
    std::size_t index_of(const CantorWord& p) const noexcept { return static_cast<std::size_t>(p.bits); }

    /// Parses "0110"-style words of length m.
    CantorWord parse_word(const std::string& text) const
    {
        if (static_cast<int>(text.size()) != depth_) {
            throw std::invalid_argument("cantor word '" + text + "' must have length " + std::to_string(depth_));
        }
        std::uint64_t bits = 0;
        for (const char c : text) {
            if (c != '0' && c != '1') {
                throw std::invalid_argument("cantor word '" + text + "' must be binary");
            }
            bits = (bits << 1) | static_cast<std::uint64_t>(c == '1');
        }
        return CantorWord{bits};
    }

    std::string format_word(const CantorWord& p) const
    {
        std::string out(static_cast<std::size_t>(depth_), '0');
        for (int i = 0; i < depth_; ++i) {
            if ((p.bits >> (depth_ - 1 - i)) & 1u) {
                out[static_cast<std::size_t>(i)] = '1';
            }
        }
        return out;
    }

private:
    int depth_;
    GeometricConstants constants_;
};

// ---------------------------------------------------------------------------
// Finite weighted point cloud in R^n (n <= 3) with the Euclidean metric.
// ---------------------------------------------------------------------------
class FiniteCloud {
public:
    using point_type = CloudIndex;

    class BallSampler {
    public:
        BallSampler(const FiniteCloud& space, const CloudIndex& center, double r)
        {
            double acc = 0.0;
            for (std::size_t i = 0; i < space.size(); ++i) {
                if (space.distance(center, CloudIndex{static_cast<std::uint32_t>(i)}) < r) {
                    acc += space.weights_[i];
                    members_.push_back(static_cast<std::uint32_t>(i));
                    cumulative_.push_back(acc);
                }
            }
            measure_ = acc;
        }

        double measure() const noexcept { return measure_; }

        CloudIndex operator()(StreamEngine& g) const noexcept
        {
            const double target = g.uniform() * measure_;
            const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
            const auto pos = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), members_.size() - 1);
            return CloudIndex{members_[pos]};
        }

    private:
        std::vector<std::uint32_t> members_;
        std::vector<double> cumulative_;
        double measure_ = 0.0;
    };

    FiniteCloud(std::vector<std::vector<double>> coordinates, std::vector<double> weights = {})
    {
        if (coordinates.empty()) {
            throw std::invalid_argument("finite cloud needs at least one point");
        }
        dimension_ = static_cast<int>(coordinates.front().size());
        if (dimension_ < 1 || dimension_ > kMaxTorusDimension) {
            throw std::invalid_argument("finite cloud dimension must be in [1, 3]");
        }
        if (weights.empty()) {
            weights.assign(coordinates.size(), 1.0);
        }
        if (weights.size() != coordinates.size()) {
            throw std::invalid_argument("finite cloud: one weight per point required");
        }
        for (std::size_t i = 0; i < coordinates.size(); ++i) {
            if (static_cast<int>(coordinates[i].size()) != dimension_) {
                throw std::invalid_argument("finite cloud: mixed point dimensions");
            }
            if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
                throw std::invalid_argument("finite cloud: weights must be positive and finite");
            }
            std::array<double, kMaxTorusDimension> p{};
            std::copy(coordinates[i].begin(), coordinates[i].end(), p.begin());
            points_.push_back(p);
        }
        weights_ = std::move(weights);
        double closest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points_.size(); ++i) {
            for (std::size_t j = i + 1; j < points_.size(); ++j) {
                if (points_[i] == points_[j]) {
                    throw std::invalid_argument("finite cloud: duplicate points");
                }
                diameter_ = std::max(diameter_, euclid(points_[i], points_[j]));
                closest = std::min(closest, euclid(points_[i], points_[j]));
            }
        }
        cumulative_.resize(weights_.size());
        std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
        total_mass_ = cumulative_.back();

        constants_.kappa = 1.0;
        constants_.doubling_A = std::max(exact_doubling(), 1.0 + 1e-12);
        constants_.r_max = diameter_ > 0.0 ? diameter_ : 1.0;
        constants_.r_min = diameter_ > 0.0 ? closest : 0.0;
    }

    SpaceKind kind() const noexcept { return SpaceKind::finite_cloud; }
    std::string name() const { return to_string(kind()); }
    int dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return points_.size(); }
    const std::array<double, kMaxTorusDimension>& coordinates(std::size_t i) const { return points_.at(i); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const GeometricConstants& constants() const noexcept { return constants_; }
    void set_constants(const GeometricConstants& c)
    {
        check_constants(c);
        constants_ = c;
    }

    double total_mass() const noexcept { return total_mass_; }
    double diameter() const noexcept { return diameter_; }
    bool contains(const CloudIndex& p) const noexcept { return p.index < points_.size(); }

    double distance(const CloudIndex& a, const CloudIndex& b) const noexcept
    {
        return euclid(points_[a.index], points_[b.index]);
    }

    double measure_ball(const CloudIndex& x, double r) const noexcept
    {
        double m = 0.0;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (euclid(points_[x.index], points_[i]) < r) {
                m += weights_[i];
            }
        }
        return m;
    }

    CloudIndex sample(StreamEngine& g) const noexcept
    {
        const double target = g.uniform() * total_mass_;
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        const auto pos = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), points_.size() - 1);
        return CloudIndex{static_cast<std::uint32_t>(pos)};
    }

    BallSampler ball_sampler(const CloudIndex& center, double r) const { return BallSampler(*this, center, r); }

    double position(const CloudIndex& p) const noexcept { return points_[p.index][0]; }

    CloudIndex point_at_position(double u) const noexcept
    {
        std::size_t best = 0;
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (std::abs(points_[i][0] - u) < std::abs(points_[best][0] - u)) {
                best = i;
            }
        }
        return CloudIndex{static_cast<std::uint32_t>(best)};
    }

    std::size_t carrier_size() const noexcept { return points_.size(); }
    CloudIndex point_at(std::size_t i) const noexcept { return CloudIndex{static_cast<std::uint32_t>(i)}; }
    double weight_at(std::size_t i) const noexcept { return weights_[i]; }
    std::size_t index_of(const CloudIndex& p) const noexcept { return p.index; }

    /// Loads `id,x1,...,xn,weight` CSV (header row required).
    static FiniteCloud from_csv(std::istream& in)
    {
        std::string line;
        if (!std::getline(in, line)) {
            throw std::invalid_argument("finite cloud CSV: missing header");
        }
        const auto header = split(line);
        const auto n = header.size();
        if (n < 3 || header.front() != "id" || header.back() != "weight") {
            throw std::invalid_argument("finite cloud CSV: header must be id,x1,...,xn,weight");
        }
        for (std::size_t c = 1; c + 1 < n; ++c) {
            if (header[c] != "x" + std::to_string(c)) {
                throw std::invalid_argument("finite cloud CSV: unexpected column '" + header[c] + "'");
            }
        }
        std::vector<std::vector<double>> coords;
        std::vector<double> weights;
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            const auto cells = split(line);
            if (cells.size() != n) {
                throw std::invalid_argument("finite cloud CSV: wrong column count on line " + std::to_string(row));
            }
            std::vector<double> p;
            for (std::size_t c = 1; c + 1 < n; ++c) {
                p.push_back(parse_double(cells[c], row));
            }
            coords.push_back(std::move(p));
            weights.push_back(parse_double(cells.back(), row));
        }
        return FiniteCloud(std::move(coords), std::move(weights));
    }

    static FiniteCloud from_csv_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) {
            throw std::invalid_argument("cannot open finite cloud CSV '" + path + "'");
        }
        return from_csv(in);
    }

private:
    static double euclid(const std::array<double, kMaxTorusDimension>& a,
                         const std::array<double, kMaxTorusDimension>& b) noexcept
    {
        double s = 0.0;
        for (int c = 0; c < kMaxTorusDimension; ++c) {
            const double d = a[c] - b[c];
            s += d * d;
        }
        return std::sqrt(s);
    }

    static std::vector<std::string> split(const std::string& line)
    {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        return cells;
    }

    static double parse_double(const std::string& s, std::size_t row)
    {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) {
                throw std::invalid_argument(s);
            }
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("finite cloud CSV: bad number '" + s + "' on line " + std::to_string(row));
        }
    }

    // sup over x and r > 0 of mu(B(x,2r)) / mu(B(x,r)). Both balls are
    // constant on the intervals between consecutive breakpoints D u D/2
    // (D = distances from x), so evaluating at each breakpoint is exhaustive.
    double exact_doubling() const
    {
        double best = 1.0;
        std::vector<double> breaks;
        for (std::size_t x = 0; x < points_.size(); ++x) {
            breaks.clear();
            for (std::size_t y = 0; y < points_.size(); ++y) {
                const double d = euclid(points_[x], points_[y]);
                if (d > 0.0) {
                    breaks.push_back(d);
                    breaks.push_back(d / 2.0);
                }
            }
            const CloudIndex cx{static_cast<std::uint32_t>(x)};
            for (const double r : breaks) {
                best = std::max(best, measure_ball(cx, 2.0 * r) / measure_ball(cx, r));
            }
        }
        return best;
    }

    int dimension_ = 1;
    std::vector<std::array<double, kMaxTorusDimension>> points_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    double total_mass_ = 0.0;
    double diameter_ = 0.0;
    GeometricConstants constants_;
};

// ---------------------------------------------------------------------------
// Concepts.
// ---------------------------------------------------------------------------
template <class S>
concept MeasureSpace = requires(const S& s, const typename S::point_type& p, StreamEngine& g, double r) {
    { s.distance(p, p) } -> std::convertible_to<double>;
    { s.measure_ball(p, r) } -> std::convertible_to<double>;
    { s.sample(g) } -> std::same_as<typename S::point_type>;
    { s.ball_sampler(p, r).measure() } -> std::convertible_to<double>;
    { s.ball_sampler(p, r)(g) } -> std::same_as<typename S::point_type>;
    { s.total_mass() } -> std::convertible_to<double>;
    { s.diameter() } -> std::convertible_to<double>;
    { s.constants() } -> std::convertible_to<const GeometricConstants&>;
    { s.position(p) } -> std::convertible_to<double>;
    { s.contains(p) } -> std::convertible_to<bool>;
};

template <class S>
concept FiniteSpace = MeasureSpace<S> && requires(const S& s, std::size_t i, const typename S::point_type& p) {
    { s.carrier_size() } -> std::convertible_to<std::size_t>;
    { s.point_at(i) } -> std::same_as<typename S::point_type>;
    { s.weight_at(i) } -> std::convertible_to<double>;
    { s.index_of(p) } -> std::convertible_to<std::size_t>;
};

template <MeasureSpace S>
using PointOf = typename S::point_type;

// ---------------------------------------------------------------------------
// Runtime-polymorphic wrappers.
// ---------------------------------------------------------------------------
using AnySpace = std::variant<Torus, PowerCircle, Cantor, FiniteCloud>;
using AnyPoint = std::variant<TorusPoint, CantorWord, CloudIndex>;

template <MeasureSpace S>
const PointOf<S>& point_for(const S& space, const AnyPoint& p)
{
    const auto* q = std::get_if<PointOf<S>>(&p);
    if (q == nullptr) {
        throw IncompatiblePoint("point kind does not match space '" + space.name() + "'");
    }
    if (!space.contains(*q)) {
        throw IncompatiblePoint("point outside the carrier of '" + space.name() + "'");
    }
    return *q;
}

inline double distance(const AnySpace& space, const AnyPoint& x, const AnyPoint& y)
{
    return std::visit([&](const auto& s) { return s.distance(point_for(s, x), point_for(s, y)); }, space);
}

inline double measure_ball(const AnySpace& space, const AnyPoint& x, double r)
{
    return std::visit([&](const auto& s) { return s.measure_ball(point_for(s, x), r); }, space);
}

inline AnyPoint sample_point(const AnySpace& space, const RandomStream& rng)
{
    auto g = rng.engine();
    return std::visit([&](const auto& s) { return AnyPoint{s.sample(g)}; }, space);
}

inline const GeometricConstants& constants_of(const AnySpace& space)
{
    return std::visit([](const auto& s) -> const GeometricConstants& { return s.constants(); }, space);
}

inline std::string name_of(const AnySpace& space)
{
    return std::visit([](const auto& s) { return s.name(); }, space);
}

// ---------------------------------------------------------------------------
// Declarative description, as found in experiment configs.
// ---------------------------------------------------------------------------
struct SpaceDescriptor {
    SpaceKind kind = SpaceKind::circle;
    int dimension = 1;
    double circumference = 1.0;
    double beta = 2.0;
    int depth = 3;
    std::vector<std::vector<double>> points;
    std::vector<double> weights;
    std::string csv_path;

    // Declared overrides; when absent the space's own constants are used.
    std::optional<double> kappa;
    std::optional<double> doubling_A;
    std::optional<AhlforsConstants> ahlfors;
    std::optional<double> r_max;

    friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;
};

inline AnySpace make_space(const SpaceDescriptor& d)
{
    auto with_overrides = [&](auto space) -> AnySpace {
        auto c = space.constants();
        if (d.kappa) {
            c.kappa = *d.kappa;
        }
        if (d.ahlfors) {
            c.ahlfors = d.ahlfors;
            c.doubling_A = std::exp2(d.ahlfors->alpha) * d.ahlfors->Gamma / d.ahlfors->gamma;
        }
        if (d.doubling_A) {
            c.doubling_A = *d.doubling_A;
        }
        if (d.r_max) {
            c.r_max = *d.r_max;
        }
        space.set_constants(c);
        return space;
    };
    switch (d.kind) {
    case SpaceKind::circle: return with_overrides(Torus(1, d.circumference));
    case SpaceKind::torus: return with_overrides(Torus(d.dimension, d.circumference));
    case SpaceKind::power_circle: return with_overrides(PowerCircle(d.beta, d.circumference));
    case SpaceKind::cantor: return with_overrides(Cantor(d.depth));
    case SpaceKind::finite_cloud:
        if (!d.csv_path.empty()) {
            return with_overrides(FiniteCloud::from_csv_file(d.csv_path));
        }
        return with_overrides(FiniteCloud(d.points, d.weights));
    }
    throw std::invalid_argument("unknown space kind");
}

// ---------------------------------------------------------------------------
// Validation of the geometric constants.
// ---------------------------------------------------------------------------
struct ValidationReport {
    std::uint64_t trials = 0;
    double empirical_kappa = 0.0;
    double max_asymmetry = 0.0;
    std::uint64_t zero_distance_distinct = 0;
    std::uint64_t triangle_violations = 0;
    double declared_kappa = 1.0;

    bool passed() const noexcept
    {
        return triangle_violations == 0 && max_asymmetry == 0.0 && zero_distance_distinct == 0;
    }
};

/// Relative floating-point allowance in the quasi-triangle check: circle
/// distances are differences of rounded coordinates and can exceed an exact
/// metric identity by a few ulps.
inline constexpr double kTriangleRoundoff = 8.0 * std::numeric_limits<double>::epsilon();

template <MeasureSpace S>
ValidationReport validate_quasimetric(const S& space, std::uint64_t trials, const RandomStream& rng)
{
    if (trials < 1) {
        throw std::invalid_argument("validate_quasimetric needs trials >= 1");
    }
    ValidationReport report;
    report.trials = trials;
    report.declared_kappa = space.constants().kappa;
    auto g = rng.engine();
    for (std::uint64_t t = 0; t < trials; ++t) {
        const auto x = space.sample(g);
        const auto y = space.sample(g);
        const auto z = space.sample(g);
        const double dxy = space.distance(x, y);
        const double dyz = space.distance(y, z);
        const double dxz = space.distance(x, z);
        report.max_asymmetry = std::max(report.max_asymmetry, std::abs(dxy - space.distance(y, x)));
        if (dxy == 0.0 && !(x == y)) {
            ++report.zero_distance_distinct;
        }
        const double sum = dxy + dyz;
        if (sum > 0.0) {
            report.empirical_kappa = std::max(report.empirical_kappa, dxz / sum);
        }
        if (dxz > report.declared_kappa * sum * (1.0 + kTriangleRoundoff)) {
            ++report.triangle_violations;
        }
    }
    return report;
}

/// max over the (point, radius) grid of mu(B(x,2r)) / mu(B(x,r)).
template <MeasureSpace S>
double estimate_doubling_constant(const S& space, std::span<const double> radii, std::span<const PointOf<S>> points)
{
    if (radii.empty() || points.empty()) {
        throw std::invalid_argument("estimate_doubling_constant needs radii and points");
    }
    double best = 0.0;
    for (const auto& x : points) {
        for (const double r : radii) {
            const double small = space.measure_ball(x, r);
            if (!(small > 0.0)) {
                throw ResolutionError("zero-measure ball in doubling estimate");
            }
            best = std::max(best, space.measure_ball(x, 2.0 * r) / small);
        }
    }
    return best;
}

/// Exhaustive doubling constant of a finite space.
template <FiniteSpace S>
double exact_doubling_constant(const S& space)
{
    double best = 1.0;
    std::vector<double> breaks;
    const std::size_t n = space.carrier_size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = space.point_at(i);
        breaks.clear();
        for (std::size_t j = 0; j < n; ++j) {
            const double d = space.distance(x, space.point_at(j));
            if (d > 0.0) {
                breaks.push_back(d);
                breaks.push_back(d / 2.0);
            }
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        for (const double r : breaks) {
            best = std::max(best, space.measure_ball(x, 2.0 * r) / space.measure_ball(x, r));
        }
    }
    return best;
}

/// Ahlfors constants fitted to a finite space over r in [min positive
/// distance, diameter], with alpha = log2 of the exact doubling constant.
template <FiniteSpace S>
AhlforsConstants fit_ahlfors(const S& space)
{
    const std::size_t n = space.carrier_size();
    const double alpha = std::max(std::log2(exact_doubling_constant(space)), 1e-3);
    double min_d = std::numeric_limits<double>::infinity();
    double max_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = space.distance(space.point_at(i), space.point_at(j));
            min_d = std::min(min_d, d);
            max_d = std::max(max_d, d);
        }
    }
    if (n < 2) {
        return AhlforsConstants{alpha, space.total_mass(), space.total_mass()};
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    std::vector<double> breaks;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = space.point_at(i);
        breaks.assign({min_d, max_d});
        for (std::size_t j = 0; j < n; ++j) {
            const double d = space.distance(x, space.point_at(j));
            if (d >= min_d && d <= max_d) {
                breaks.push_back(d);
            }
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        // On (b_i, b_{i+1}] the ball is constant, so the ratio is extremal at
        // the endpoints.
        for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
            const double m = space.measure_ball(x, breaks[b + 1]);
            lo = std::min(lo, m / std::pow(breaks[b + 1], alpha));
            hi = std::max(hi, m / std::pow(breaks[b], alpha));
        }
        const double m_top = space.measure_ball(x, max_d);
        lo = std::min(lo, m_top / std::pow(max_d, alpha));
        hi = std::max(hi, m_top / std::pow(max_d, alpha));
    }
    return AhlforsConstants{alpha, lo, std::max(hi, lo)};
}

/// Counts gamma r^alpha <= mu(B(x,r)) <= Gamma r^alpha violations, up to the
/// same relative roundoff as the triangle check.
template <MeasureSpace S>
std::uint64_t ahlfors_violations(const S& space, std::span<const PointOf<S>> points, std::span<const double> radii)
{
    const auto& c = space.constants();
    if (!c.ahlfors) {
        return 0;
    }
    std::uint64_t violations = 0;
    for (const auto& x : points) {
        for (const double r : radii) {
            const double m = space.measure_ball(x, r);
            const double scale = std::pow(r, c.ahlfors->alpha);
            if (m < c.ahlfors->gamma * scale * (1.0 - kTriangleRoundoff) ||
                m > c.ahlfors->Gamma * scale * (1.0 + kTriangleRoundoff)) {
                ++violations;
            }
        }
    }
    return violations;
}

} // namespace hyperkernel
