#include <gtest/gtest.h>

#include <hyperkernel/space.hpp>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

using namespace hyperkernel;

namespace {

TorusPoint at(double u) { return TorusPoint{{u, 0.0, 0.0}}; }

FiniteCloud line012() { return FiniteCloud({{0.0}, {1.0}, {2.0}}); }

} // namespace

TEST(Distance, CircleWrapsAround)
{
    const Torus circle(1, 1.0);
    EXPECT_DOUBLE_EQ(circle.distance(at(0.1), at(0.9)), 0.2);
    EXPECT_EQ(circle.distance(at(0.3), at(0.3)), 0.0);
}

TEST(Distance, CantorLongestCommonPrefix)
{
    const Cantor c(3);
    EXPECT_EQ(c.distance(c.parse_word("000"), c.parse_word("001")), 0.25);
    EXPECT_EQ(c.distance(c.parse_word("000"), c.parse_word("100")), 1.0);
    EXPECT_EQ(c.distance(c.parse_word("010"), c.parse_word("010")), 0.0);
    EXPECT_EQ(c.format_word(c.parse_word("011")), "011");
    EXPECT_THROW(c.parse_word("01"), std::invalid_argument);
    EXPECT_THROW(c.parse_word("012"), std::invalid_argument);
}

TEST(Distance, TorusIsSupOfCircleFactors)
{
    const Torus t(2, 1.0);
    EXPECT_DOUBLE_EQ(t.distance(TorusPoint{{0.1, 0.0, 0.0}}, TorusPoint{{0.2, 0.7, 0.0}}), 0.3);
}

TEST(Distance, PowerCircleRaisesCircleDistance)
{
    const PowerCircle p(2.0, 1.0);
    EXPECT_DOUBLE_EQ(p.distance(at(0.0), at(0.3)), 0.09);
    EXPECT_EQ(p.constants().kappa, 2.0);
    EXPECT_EQ(p.constants().ahlfors->alpha, 0.5);
}

TEST(Distance, IncompatiblePointKind)
{
    const AnySpace s = Cantor(3);
    EXPECT_THROW(distance(s, AnyPoint{TorusPoint{}}, AnyPoint{CantorWord{}}), IncompatiblePoint);
    EXPECT_THROW(distance(s, AnyPoint{CantorWord{8}}, AnyPoint{CantorWord{}}), IncompatiblePoint);
    EXPECT_EQ(distance(s, AnyPoint{CantorWord{0}}, AnyPoint{CantorWord{1}}), 0.25);
}

TEST(MeasureBall, ClosedForms)
{
    EXPECT_DOUBLE_EQ(Torus(1, 1.0).measure_ball(at(0.5), 0.2), 0.4);
    EXPECT_DOUBLE_EQ(Torus(1, 1.0).measure_ball(at(0.5), 0.7), 1.0);
    const Cantor c(3);
    EXPECT_EQ(c.measure_ball(c.parse_word("000"), 0.3), 0.25);
    EXPECT_EQ(line012().measure_ball(CloudIndex{0}, 1.5), 2.0);
    EXPECT_EQ(line012().measure_ball(CloudIndex{0}, 1.0), 1.0);
}

TEST(MeasureBall, CantorMatchesEnumeration)
{
    const Cantor c(5);
    for (std::size_t i = 0; i < c.carrier_size(); ++i) {
        for (const double r : {0.01, 0.03125, 0.05, 0.3, 0.5, 0.75, 1.0, 1.5}) {
            double direct = 0.0;
            for (std::size_t j = 0; j < c.carrier_size(); ++j) {
                if (c.distance(c.point_at(i), c.point_at(j)) < r) {
                    direct += c.weight_at(j);
                }
            }
            ASSERT_EQ(c.measure_ball(c.point_at(i), r), direct) << i << " " << r;
        }
    }
}

TEST(MeasureBall, NestedOnMonotoneGrids)
{
    const Torus circle(1, 1.0);
    const PowerCircle power(2.0, 1.0);
    const Cantor cantor(12);
    StreamEngine g(3, 3);
    for (int t = 0; t < 100; ++t) {
        const auto x = circle.sample(g);
        const auto w = cantor.sample(g);
        double pc = 0.0, pp = 0.0, pk = 0.0;
        for (int i = 0; i <= 60; ++i) {
            const double r = std::pow(10.0, -4.0 + i / 15.0);
            const double mc = circle.measure_ball(x, r), mp = power.measure_ball(x, r), mk = cantor.measure_ball(w, r);
            ASSERT_GE(mc, pc);
            ASSERT_GE(mp, pp);
            ASSERT_GE(mk, pk);
            pc = mc;
            pp = mp;
            pk = mk;
        }
    }
}

TEST(Sampling, CircleMean)
{
    const Torus circle(1, 1.0);
    StreamEngine g(4, 0);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        sum += circle.sample(g).x[0];
    }
    EXPECT_NEAR(sum / 10000, 0.5, 3.0 / std::sqrt(12.0 * 10000));
}

TEST(Sampling, CantorLeavesUniform)
{
    const Cantor c(3);
    StreamEngine g(4, 1);
    std::array<int, 8> counts{};
    for (int i = 0; i < 10000; ++i) {
        ++counts[c.sample(g).bits];
    }
    const double sigma = std::sqrt(10000 * (1.0 / 8) * (7.0 / 8));
    for (const int n : counts) {
        EXPECT_NEAR(n, 1250.0, 3.0 * sigma);
    }
}

TEST(Sampling, CloudFollowsWeights)
{
    const FiniteCloud cloud({{0.0}, {1.0}}, {1.0, 3.0});
    StreamEngine g(4, 2);
    int second = 0;
    for (int i = 0; i < 10000; ++i) {
        second += cloud.sample(g).index == 1;
    }
    EXPECT_NEAR(second, 7500.0, 3.0 * std::sqrt(10000 * 0.75 * 0.25));
}

TEST(Sampling, BallSamplerStaysInBall)
{
    const Torus circle(1, 1.0);
    const PowerCircle power(2.0, 1.0);
    const Cantor cantor(10);
    StreamEngine g(4, 3);
    for (int t = 0; t < 2000; ++t) {
        const double r = std::pow(10.0, -3.0 * g.uniform());
        const auto x = circle.sample(g);
        ASSERT_LT(circle.distance(x, circle.ball_sampler(x, r)(g)), r);
        ASSERT_LT(power.distance(x, power.ball_sampler(x, r)(g)), r);
        const auto w = cantor.sample(g);
        ASSERT_LT(cantor.distance(w, cantor.ball_sampler(w, r)(g)), r);
    }
    EXPECT_DOUBLE_EQ(circle.ball_sampler(at(0.2), 0.1).measure(), 0.2);
}

TEST(Validation, DeclaredKappaHolds)
{
    const auto circle = validate_quasimetric(Torus(1, 1.0), 10000, RandomStream{1, 0});
    EXPECT_TRUE(circle.passed());
    EXPECT_LE(circle.empirical_kappa, 1.0 + 1e-12);
    const auto power = validate_quasimetric(PowerCircle(2.0, 1.0), 10000, RandomStream{1, 1});
    EXPECT_TRUE(power.passed());
    EXPECT_LE(power.empirical_kappa, 2.0);
    const auto cantor = validate_quasimetric(Cantor(20), 10000, RandomStream{1, 2});
    EXPECT_TRUE(cantor.passed());
    EXPECT_LE(cantor.empirical_kappa, 1.0);
}

TEST(Validation, PowerCircleKappaIsTight)
{
    // Exhaustive triple search on a 100-point grid: 2^(beta-1) is attained.
    const PowerCircle p(2.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            for (int l = 0; l < 100; ++l) {
                const double s = p.distance(at(i / 100.0), at(j / 100.0)) + p.distance(at(j / 100.0), at(l / 100.0));
                if (s > 0.0) {
                    worst = std::max(worst, p.distance(at(i / 100.0), at(l / 100.0)) / s);
                }
            }
        }
    }
    EXPECT_NEAR(worst, 2.0, 1e-12);
}

TEST(Validation, PlantedKappaIsReported)
{
    PowerCircle p(2.0, 1.0);
    auto c = p.constants();
    c.kappa = 1.0;
    p.set_constants(c);
    const auto report = validate_quasimetric(p, 10000, RandomStream{1, 3});
    EXPECT_GT(report.triangle_violations, 0u);
    EXPECT_FALSE(report.passed());
}

TEST(Validation, SymmetryIsExact)
{
    StreamEngine g(8, 8);
    const Torus t(3, 1.0);
    const FiniteCloud cloud({{0.0, 0.1}, {0.3, 0.9}, {2.0, 1.0}});
    for (int i = 0; i < 100000; ++i) {
        const auto x = t.sample(g), y = t.sample(g);
        ASSERT_EQ(t.distance(x, y), t.distance(y, x));
        const auto a = cloud.sample(g), b = cloud.sample(g);
        ASSERT_EQ(cloud.distance(a, b), cloud.distance(b, a));
    }
}

TEST(Doubling, CircleClosedForm)
{
    const Torus circle(1, 1.0);
    const std::vector<double> radii{0.001, 0.01, 0.05, 0.125};
    const std::vector<TorusPoint> pts{at(0.0), at(0.37)};
    EXPECT_DOUBLE_EQ(estimate_doubling_constant(circle, radii, pts), 2.0);
}

TEST(Doubling, CantorExhaustive)
{
    const Cantor c(6);
    EXPECT_LE(exact_doubling_constant(c), 2.0);
    EXPECT_EQ(exact_doubling_constant(c), 2.0);
}

TEST(Doubling, CloudEnumeration)
{
    // From 0: B(0,r) = {0} for r <= 1, {0,1} for 1 < r <= 2, all for r > 2;
    // from 1 the ball jumps from {1} to all at r = 1, so A = 3.
    EXPECT_EQ(exact_doubling_constant(line012()), 3.0);
    EXPECT_EQ(line012().constants().doubling_A, 3.0);
}

TEST(Ahlfors, ClosedFormSpacesHaveNoViolations)
{
    const Torus circle(1, 1.0);
    const Cantor cantor(20);
    const PowerCircle power(2.0, 1.0);
    StreamEngine g(9, 9);
    std::vector<double> radii;
    for (int i = 1; i <= 200; ++i) {
        radii.push_back(0.25 * std::pow(1e-3, (200.0 - i) / 199.0));
    }
    std::vector<TorusPoint> cp;
    std::vector<CantorWord> kp;
    for (int i = 0; i < 50; ++i) {
        cp.push_back(circle.sample(g));
        kp.push_back(cantor.sample(g));
    }
    EXPECT_EQ(ahlfors_violations(circle, std::span<const TorusPoint>(cp), radii), 0u);
    EXPECT_EQ(ahlfors_violations(cantor, std::span<const CantorWord>(kp), radii), 0u);
    std::vector<double> pradii;
    for (const double r : radii) {
        pradii.push_back(r * r);
    }
    EXPECT_EQ(ahlfors_violations(power, std::span<const TorusPoint>(cp), pradii), 0u);
}

TEST(Ahlfors, FittedCloudConstantsBracketBalls)
{
    const auto cloud = line012();
    const auto a = fit_ahlfors(cloud);
    EXPECT_LE(a.gamma, a.Gamma);
    for (std::size_t i = 0; i < 3; ++i) {
        for (const double r : {1.0, 1.5, 2.0}) {
            const double m = cloud.measure_ball(CloudIndex{static_cast<std::uint32_t>(i)}, r);
            EXPECT_GE(m, a.gamma * std::pow(r, a.alpha) * (1 - 1e-12));
            EXPECT_LE(m, a.Gamma * std::pow(r, a.alpha) * (1 + 1e-12));
        }
    }
}

TEST(Constants, DeclaredDefaults)
{
    const auto c = Torus(1, 1.0).constants();
    EXPECT_EQ(c.kappa, 1.0);
    EXPECT_EQ(c.ahlfors->alpha, 1.0);
    EXPECT_EQ(c.ahlfors->gamma, 2.0);
    EXPECT_EQ(c.ahlfors->Gamma, 2.0);
    EXPECT_EQ(c.r_max, 0.25);
    const auto k = Cantor(8).constants();
    EXPECT_EQ(k.kappa, 1.0);
    EXPECT_EQ(k.ahlfors->gamma, 0.5);
    EXPECT_EQ(k.ahlfors->Gamma, 1.0);
    EXPECT_EQ(k.r_max, 0.5);
}

TEST(Constants, InvalidOverridesRejected)
{
    SpaceDescriptor d;
    d.kappa = 0.5;
    EXPECT_THROW(make_space(d), std::invalid_argument);
    d.kappa.reset();
    d.ahlfors = AhlforsConstants{1.0, 3.0, 2.0};
    EXPECT_THROW(make_space(d), std::invalid_argument);
}

TEST(Cloud, CsvLoading)
{
    std::istringstream ok("id,x1,x2,weight\n0,0,0,1\n1,1,0,2\n2,0,1,1\n");
    const auto cloud = FiniteCloud::from_csv(ok);
    EXPECT_EQ(cloud.size(), 3u);
    EXPECT_EQ(cloud.dimension(), 2);
    EXPECT_EQ(cloud.total_mass(), 4.0);
    std::istringstream bad_header("x1,weight\n0,1\n");
    EXPECT_THROW(FiniteCloud::from_csv(bad_header), std::invalid_argument);
    std::istringstream bad_cell("id,x1,weight\n0,abc,1\n");
    EXPECT_THROW(FiniteCloud::from_csv(bad_cell), std::invalid_argument);
}

TEST(Cloud, RejectsDuplicatesAndBadWeights)
{
    EXPECT_THROW(FiniteCloud(std::vector<std::vector<double>>{{0.0}, {0.0}}), std::invalid_argument);
    EXPECT_THROW(FiniteCloud({{0.0}, {1.0}}, {1.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(FiniteCloud(std::vector<std::vector<double>>{{0.0}, {1.0, 2.0}}), std::invalid_argument);
}
