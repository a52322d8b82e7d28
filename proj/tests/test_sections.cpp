#include <gtest/gtest.h>

#include <hyperkernel/hyperkernel.hpp>

#include <cmath>
#include <vector>

using namespace hyperkernel;

namespace {

TorusPoint at(double u) { return TorusPoint{{u, 0.0, 0.0}}; }

template <class S>
bool member(const S& space, const PointOf<S>& x, double r, std::vector<PointOf<S>> ys)
{
    return in_section(space, Section<PointOf<S>>{x, r, static_cast<int>(ys.size())}, std::span<const PointOf<S>>(ys));
}

} // namespace

TEST(InSection, Examples)
{
    const Torus circle(1, 1.0);
    EXPECT_TRUE(member(circle, at(0.0), 0.2, {at(0.3)}));
    EXPECT_FALSE(member(circle, at(0.0), 0.15, {at(0.3)}));
    EXPECT_TRUE(member(circle, at(0.4), 1e-9, {at(0.4), at(0.4)}));
    EXPECT_TRUE(member(circle, at(0.0), 0.1, {at(0.05), at(0.95)}));
}

TEST(InSection, StrictBoundary)
{
    const FiniteCloud cloud({{0.0}, {1.0}, {2.0}});
    EXPECT_FALSE(member(cloud, CloudIndex{0}, 1.0, {CloudIndex{1}}));
    EXPECT_TRUE(member(cloud, CloudIndex{0}, std::nextafter(1.0, 2.0), {CloudIndex{1}}));
}

TEST(InSection, LengthMismatchAndBadRadius)
{
    const Torus circle(1, 1.0);
    const std::vector<TorusPoint> ys{at(0.1)};
    EXPECT_THROW(in_section(circle, Section<TorusPoint>{at(0.0), 0.1, 2}, std::span<const TorusPoint>(ys)),
                 std::invalid_argument);
    EXPECT_THROW(in_section(circle, Section<TorusPoint>{at(0.0), 0.0, 1}, std::span<const TorusPoint>(ys)),
                 std::invalid_argument);
}

TEST(InSection, MonotoneInRadius)
{
    const PowerCircle power(2.0, 1.0);
    StreamEngine g(1, 1);
    for (int t = 0; t < 5000; ++t) {
        const auto x = power.sample(g);
        std::vector<TorusPoint> ys{power.sample(g), power.sample(g)};
        const double r1 = 0.1 * g.uniform() + 1e-6, r2 = r1 * (1.0 + g.uniform());
        if (member(power, x, r1, ys)) {
            ASSERT_TRUE(member(power, x, r2, ys));
        }
    }
}

template <class S>
std::uint64_t sandwich_violations(const S& space, int trials, std::uint64_t seed)
{
    using P = PointOf<S>;
    StreamEngine g(seed, 0);
    const double kappa = space.constants().kappa;
    std::uint64_t bad = 0;
    for (int t = 0; t < trials; ++t) {
        const int k = 1 + static_cast<int>(g.below(3));
        const P x = space.sample(g);
        const double r = space.constants().r_max * std::pow(10.0, -3.0 * g.uniform());
        std::vector<P> ys(static_cast<std::size_t>(k));
        for (auto& y : ys) {
            y = space.ball_sampler(x, r)(g);
        }
        bad += !in_section(space, Section<P>{x, r, k}, std::span<const P>(ys));
        for (auto& y : ys) {
            y = space.ball_sampler(x, 3.0 * kappa * r)(g);
        }
        if (in_section(space, Section<P>{x, r, k}, std::span<const P>(ys))) {
            for (const auto& y : ys) {
                bad += !(space.distance(x, y) < 2.0 * kappa * r);
            }
        }
    }
    return bad;
}

TEST(Sandwich, BallProductInsideSectionInsideDilatedBall)
{
    EXPECT_EQ(sandwich_violations(Torus(1, 1.0), 10000, 1), 0u);
    EXPECT_EQ(sandwich_violations(PowerCircle(2.0, 1.0), 10000, 2), 0u);
    EXPECT_EQ(sandwich_violations(Cantor(20), 10000, 3), 0u);
    EXPECT_EQ(sandwich_violations(FiniteCloud({{0.0, 0.0}, {0.3, 0.1}, {1.0, 0.4}, {0.2, 0.9}}), 10000, 4), 0u);
}

TEST(MeasureSection, CircleClosedForm)
{
    const Torus circle(1, 1.0);
    const auto e = measure_section(circle, Section<TorusPoint>{at(0.3), 0.1, 1}, 100000, RandomStream{1, 1});
    EXPECT_NEAR(e.value, 0.4, 3.0 * e.stderr + 1e-12);
    const auto ambient = measure_section(circle, Section<TorusPoint>{at(0.3), 0.1, 1}, 100000, RandomStream{1, 2},
                                         Method::ambient);
    EXPECT_GT(ambient.stderr, 0.0);
    EXPECT_NEAR(ambient.value, 0.4, 3.0 * ambient.stderr);
}

TEST(MeasureSection, CantorEnumeration)
{
    const Cantor c(3);
    const auto e = measure_section(c, Section<CantorWord>{c.parse_word("000"), 0.3, 1}, 1, RandomStream{});
    EXPECT_EQ(e.value, 0.25);
    EXPECT_EQ(e.stderr, 0.0);
    EXPECT_TRUE(e.exact);
    const auto k2 = measure_section(c, Section<CantorWord>{c.parse_word("000"), 0.3, 2}, 1, RandomStream{}, Method::exact);
    EXPECT_EQ(k2.value, 0.0625);
}

TEST(MeasureSection, LargeRadiusIsTotalMass)
{
    const FiniteCloud cloud({{0.0}, {1.0}, {2.0}}, {1.0, 2.0, 0.5});
    EXPECT_EQ(measure_section(cloud, Section<CloudIndex>{CloudIndex{1}, 5.0, 1}, 1, RandomStream{}).value, 3.5);
    EXPECT_EQ(measure_section(cloud, Section<CloudIndex>{CloudIndex{1}, 5.0, 2}, 1, RandomStream{}).value, 12.25);
    const Torus circle(1, 1.0);
    EXPECT_EQ(measure_section(circle, Section<TorusPoint>{at(0.0), 0.6, 1}, 1000, RandomStream{}).value, 1.0);
}

TEST(MeasureSection, AhlforsCorridor)
{
    for (int k = 1; k <= 2; ++k) {
        const Torus circle(1, 1.0);
        StreamEngine g(5, static_cast<std::uint64_t>(k));
        for (int i = 0; i < 5; ++i) {
            const auto x = circle.sample(g);
            for (const double r : {1e-3, 1e-2, 0.1, 0.25}) {
                const auto e = measure_section(circle, Section<TorusPoint>{x, r, k}, 20000,
                                               RandomStream{5, static_cast<std::uint64_t>(10 * i + k)});
                const double v = e.value / std::pow(r, k), se = e.stderr / std::pow(r, k);
                EXPECT_GE(v + 3.0 * se, std::pow(2.0, k));
                EXPECT_LE(v - 3.0 * se, std::pow(4.0, k));
            }
        }
    }
}

TEST(MeasureSection, CloudDoublingBound)
{
    const FiniteCloud cloud({{0.0}, {1.0}, {2.5}, {2.7}, {4.0}});
    const double A = cloud.constants().doubling_A;
    for (int k = 1; k <= 2; ++k) {
        const double bound = std::pow(8.0, k * std::log2(A));
        for (std::uint32_t x = 0; x < 5; ++x) {
            for (const double r : {0.1, 0.2, 0.5, 1.0, 1.3, 2.0}) {
                const double small = measure_section(cloud, Section<CloudIndex>{{x}, r, k}, 1, RandomStream{}).value;
                const double big = measure_section(cloud, Section<CloudIndex>{{x}, 2 * r, k}, 1, RandomStream{}).value;
                EXPECT_LE(big, bound * small);
            }
        }
    }
}

TEST(MeasureSection, RejectsZeroSamples)
{
    const Torus circle(1, 1.0);
    EXPECT_THROW(measure_section(circle, Section<TorusPoint>{at(0.0), 0.1, 1}, 0, RandomStream{}), std::invalid_argument);
}
