#include <gtest/gtest.h>

#include <hyperkernel/hyperkernel.hpp>

#include <cmath>
#include <numbers>
#include <vector>

using namespace hyperkernel;

namespace {

TorusPoint at(double u) { return TorusPoint{{u, 0.0, 0.0}}; }

FiniteCloud line012() { return FiniteCloud({{0.0}, {1.0}, {2.0}}); }

FunctionField cosine(double frequency = 1.0)
{
    FunctionField f{FunctionKind::cosine};
    f.frequency = frequency;
    return f;
}

using Fs = std::vector<FunctionField>;

std::span<const FunctionField> span_of(const Fs& fs) { return std::span<const FunctionField>(fs); }

} // namespace

// ---------------------------------------------------------------------------
// Constants.
// ---------------------------------------------------------------------------

TEST(TheoremConstants, CircleK1)
{
    const auto c = theorem_constants(1, 1.0, 1.0, 2.0, 2.0, 2.0);
    EXPECT_DOUBLE_EQ(c.lambda0, 2.5);
    EXPECT_NEAR(c.C1, 1.0 / (6.25 * std::log(2.5)), 1e-15);
    EXPECT_NEAR(c.C1, 0.17463, 5e-5);
    EXPECT_NEAR(c.C2, 25.0 / std::log(2.5), 1e-12);
    // Frozen from the direct formula evaluation.
    EXPECT_NEAR(c.C2, 27.283917, 1e-6);
    EXPECT_EQ(c.A_tilde, 8.0);
    EXPECT_EQ(c.prop33_bound, 2.0);
    EXPECT_NEAR(c.C_domination, 16.0 / (c.C1 * std::numbers::ln2), 1e-10);
    EXPECT_NEAR(c.C_domination, 132.193, 1e-3);
}

TEST(TheoremConstants, UnitAhlfors)
{
    EXPECT_DOUBLE_EQ(theorem_constants(1, 1.0, 1.0, 1.0, 1.0, 2.0).lambda0, 3.0);
    EXPECT_EQ(theorem_constants(2, 1.0, 1.0, 1.0, 1.0, 2.0).prop33_bound, 4.0);
}

TEST(TheoremConstants, CircleK2AgainstFormulas)
{
    const int k = 2;
    const double alpha = 1.0, kappa = 1.0, gamma = 2.0, Gamma = 2.0, A = 2.0;
    const double ka = k * alpha;
    const double lambda0 = std::pow(1.0 + std::pow(Gamma, k) * std::pow(2.0 * kappa, ka), 1.0 / ka) / std::pow(gamma, 1.0 / alpha);
    const auto c = theorem_constants(k, alpha, kappa, gamma, Gamma, A);
    EXPECT_NEAR(c.lambda0, lambda0, 1e-14);
    EXPECT_NEAR(c.lambda0, std::sqrt(17.0) / 2.0, 1e-14);
    EXPECT_NEAR(c.C1, 1.0 / (std::pow(lambda0, 4.0) * std::log(lambda0)), 1e-14);
    EXPECT_NEAR(c.C2, std::pow(lambda0, 4.0) * 16.0 / std::log(lambda0), 1e-9);
    EXPECT_NEAR(c.A_tilde, 64.0, 1e-12);
    EXPECT_NEAR(c.prop33_bound, 4.0, 1e-15);
}

TEST(TheoremConstants, PowerCircleUsesKappa)
{
    // beta = 2: kappa = 2, alpha = 1/2, gamma = Gamma = 2.
    const auto c = theorem_constants(1, 0.5, 2.0, 2.0, 2.0, std::sqrt(2.0));
    EXPECT_NEAR(c.prop33_bound, std::pow(4.0, std::log2(std::sqrt(2.0))), 1e-12);
    EXPECT_NEAR(c.A_tilde, std::pow(16.0, std::log2(std::sqrt(2.0))), 1e-12);
    EXPECT_NEAR(c.lambda0, std::pow(1.0 + 2.0 * 2.0, 2.0) / 4.0, 1e-12);
}

TEST(TheoremConstants, RejectsInvalidInputs)
{
    EXPECT_THROW(theorem_constants(0, 1, 1, 1, 1, 2), std::invalid_argument);
    EXPECT_THROW(theorem_constants(1, 1, 0.5, 1, 1, 2), std::invalid_argument);
    EXPECT_THROW(theorem_constants(1, 1, 1, 2, 1, 2), std::invalid_argument);
    EXPECT_THROW(theorem_constants(1, 1, 1, 1, 1, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Product difference.
// ---------------------------------------------------------------------------

TEST(ProductDifference, TwoTermExample)
{
    const std::vector<double> a{2.0, 3.0}, b{1.0, 1.0};
    const auto pd = product_difference<double>(a, b);
    EXPECT_EQ(pd.terms, (std::vector<double>{3.0, 2.0}));
    EXPECT_EQ(pd.total, 5.0);
}

TEST(ProductDifference, EqualSequencesVanish)
{
    const std::vector<double> a{1.5, -2.0, 7.0};
    const auto pd = product_difference<double>(a, a);
    EXPECT_EQ(pd.total, 0.0);
    for (const double t : pd.terms) {
        EXPECT_EQ(t, 0.0);
    }
}

TEST(ProductDifference, IntegerSequencesAreExact)
{
    StreamEngine g(3, 3);
    for (int t = 0; t < 10000; ++t) {
        const std::size_t k = 1 + g.below(8);
        std::vector<long long> a(k), b(k);
        long long pa = 1, pb = 1;
        for (std::size_t i = 0; i < k; ++i) {
            a[i] = static_cast<long long>(g.below(21)) - 10;
            b[i] = static_cast<long long>(g.below(21)) - 10;
            pa *= a[i];
            pb *= b[i];
        }
        ASSERT_EQ(product_difference<long long>(a, b).total, pa - pb);
    }
}

TEST(ProductDifference, LengthMismatch)
{
    const std::vector<double> a{1.0}, b{1.0, 2.0}, none;
    EXPECT_THROW(product_difference<double>(a, b), std::invalid_argument);
    EXPECT_THROW(product_difference<double>(none, none), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// J and the means.
// ---------------------------------------------------------------------------

TEST(Normalizer, CircleIndicatorClosedForm)
{
    const Torus circle(1, 1.0);
    const auto j = j_normalizer(circle, KernelProfile{}, at(0.4), 0.05, 1, 100000, RandomStream{1, 1});
    EXPECT_NEAR(j.value, 0.2, 3.0 * j.stderr + 1e-12);
    const auto ambient = j_normalizer(circle, KernelProfile{}, at(0.4), 0.05, 1, 100000, RandomStream{1, 1}, Method::ambient);
    EXPECT_NEAR(ambient.value, 0.2, 3.0 * ambient.stderr);
}

TEST(Normalizer, LargeScaleIsTotalMass)
{
    const auto cloud = FiniteCloud({{0.0}, {1.0}, {2.0}}, {1.0, 2.0, 0.5});
    EXPECT_EQ(j_normalizer(cloud, KernelProfile{}, CloudIndex{0}, 10.0, 2, 1, RandomStream{}).value, 3.5 * 3.5);
    const Torus circle(1, 1.0);
    EXPECT_NEAR(j_normalizer(circle, KernelProfile{}, at(0.0), 0.75, 2, 1000, RandomStream{}).value, 1.0, 1e-12);
}

TEST(Normalizer, CantorExamples)
{
    const Cantor c(3);
    EXPECT_EQ(j_normalizer(c, KernelProfile{}, c.parse_word("000"), 0.3, 1, 1, RandomStream{}).value, 0.25);
}

TEST(Normalizer, CantorClosedFormMatchesEnumeration)
{
    const Cantor c(6);
    for (const auto& phi : {KernelProfile{ProfileKind::indicator}, KernelProfile{ProfileKind::exponential},
                            KernelProfile{ProfileKind::power, 4.0}, KernelProfile{ProfileKind::gaussian}}) {
        for (const int k : {1, 2}) {
            for (const double eps : {0.01, 0.1, 0.3, 1.0}) {
                const double closed = j_normalizer(c, phi, CantorWord{13}, eps, k, 1, RandomStream{}).value;
                const double enumerated =
                    j_normalizer(c, phi, CantorWord{13}, eps, k, 1, RandomStream{}, Method::exact, EnumerationCaps{})
                        .value;
                const auto oracle = exact_normalizer(c, phi, CantorWord{13}, eps, k);
                EXPECT_NEAR(closed, oracle.value, 1e-12 * oracle.value);
                EXPECT_NEAR(enumerated, oracle.value, 1e-12 * oracle.value);
            }
        }
    }
}

TEST(Normalizer, ResolutionError)
{
    const Torus circle(1, 1.0);
    EXPECT_THROW(j_normalizer(circle, KernelProfile{}, at(0.0), 1e-9, 3, 100, RandomStream{}, Method::ambient),
                 ResolutionError);
    EXPECT_THROW(j_normalizer(circle, KernelProfile{}, at(0.0), 0.0, 1, 100, RandomStream{}), std::invalid_argument);
}

TEST(Normalizer, InadmissibleProfile)
{
    const Torus circle(1, 1.0);
    EXPECT_THROW(j_normalizer(circle, KernelProfile{ProfileKind::power, 1.0}, at(0.0), 0.1, 1, 100, RandomStream{}),
                 AdmissibilityError);
}

TEST(PhiMean, ConstantOnesGiveExactlyOne)
{
    const Torus circle(1, 1.0);
    const Fs ones(2, FunctionField::constant(1.0));
    for (const auto& phi : {KernelProfile{ProfileKind::indicator}, KernelProfile{ProfileKind::gaussian}}) {
        for (const auto method : {Method::monte_carlo, Method::ambient}) {
            const auto e = phi_mean(circle, phi, span_of(ones), at(0.2), 0.05, 10000, RandomStream{2, 2}, method);
            EXPECT_EQ(e.value, 1.0);
            EXPECT_EQ(e.stderr, 0.0);
        }
    }
}

TEST(PhiMean, CosineAverage)
{
    const Torus circle(1, 1.0);
    const Fs f{cosine()};
    const auto e = phi_mean(circle, KernelProfile{}, span_of(f), at(0.0), 0.05, 100000, RandomStream{3, 3});
    const double expected = std::sin(0.2 * std::numbers::pi) / (0.2 * std::numbers::pi);
    EXPECT_NEAR(expected, 0.93549, 1e-5);
    EXPECT_NEAR(e.value, expected, 3.0 * e.stderr);
}

TEST(PhiMean, Multilinearity)
{
    const Torus circle(1, 1.0);
    FunctionField bump{FunctionKind::bump};
    bump.center = 0.25;
    Fs f{cosine(), bump};
    const auto base = phi_mean(circle, KernelProfile{ProfileKind::exponential}, span_of(f), at(0.2), 0.1, 20000, RandomStream{4, 4});
    f[0].amplitude = -2.5;
    const auto scaled = phi_mean(circle, KernelProfile{ProfileKind::exponential}, span_of(f), at(0.2), 0.1, 20000, RandomStream{4, 4});
    EXPECT_NEAR(scaled.value, -2.5 * base.value, 1e-12 * std::abs(base.value) + 1e-15);
}

TEST(PhiMean, WrongFunctionCount)
{
    const Torus circle(1, 1.0);
    const Fs none;
    EXPECT_THROW(phi_mean(circle, KernelProfile{}, span_of(none), at(0.0), 0.1, 10, RandomStream{}), std::invalid_argument);
}

TEST(PhiStar, ConstantIsReproduced)
{
    const Torus circle(1, 1.0);
    const Fs f{FunctionField::constant(-0.7), FunctionField::constant(2.0)};
    const auto grid = geometric_grid(0.01, 0.25, 6);
    const auto ps = phi_star(circle, KernelProfile{ProfileKind::gaussian}, span_of(f), at(0.3), grid, 1000, RandomStream{5, 5});
    EXPECT_NEAR(ps.estimate.value, 1.4, 1e-14);
}

TEST(PhiStar, DominatesEveryGridMember)
{
    const Torus circle(1, 1.0);
    const Fs f{cosine(3.0)};
    const auto grid = geometric_grid(0.01, 0.25, 6);
    const RandomStream rng{6, 6};
    const auto ps = phi_star(circle, KernelProfile{}, span_of(f), at(0.1), grid, 5000, rng);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto m = kernel_means(circle, KernelProfile{}, span_of(f), at(0.1), grid[i], 5000, rng.substream({i}));
        EXPECT_GE(ps.estimate.value, m.abs_mean.value);
    }
}

TEST(PhiStar, ExhaustiveGridEqualsOracle)
{
    const FiniteCloud cloud({{0.0, 0.0}, {0.5, 0.1}, {0.9, 0.8}, {0.2, 0.6}, {1.3, 0.2}}, {1.0, 0.5, 2.0, 1.0, 0.25});
    const Fs f{FunctionField::table({1.0, -0.5, 0.0, 2.0, 0.3}), FunctionField::table({0.2, 1.0, -1.0, 0.5, 0.0})};
    for (std::uint32_t x = 0; x < 5; ++x) {
        const auto radii = exhaustive_section_radii(cloud, CloudIndex{x}, 2);
        const auto ps = phi_star(cloud, KernelProfile{}, span_of(f), CloudIndex{x}, radii, 1, RandomStream{});
        EXPECT_NEAR(ps.estimate.value, exact_phi_star(cloud, KernelProfile{}, span_of(f), CloudIndex{x}, {}).value, 1e-14);
        EXPECT_EQ(ps.estimate.stderr, 0.0);
    }
}

TEST(MultilinearMaximal, CloudExample)
{
    const auto cloud = line012();
    const Fs f{FunctionField::table({1.0, 0.0, 0.0})};
    const auto radii = exhaustive_section_radii(cloud, CloudIndex{0}, 1);
    EXPECT_EQ(multilinear_maximal(cloud, span_of(f), CloudIndex{0}, radii, 1, RandomStream{}).estimate.value, 1.0);
}

TEST(MultilinearMaximal, OnesGiveOne)
{
    const Torus circle(1, 1.0);
    const Fs ones(2, FunctionField::constant(1.0));
    const auto grid = geometric_grid(0.001, 0.5, 8);
    EXPECT_EQ(multilinear_maximal(circle, span_of(ones), at(0.6), grid, 1000, RandomStream{7, 7}).estimate.value, 1.0);
}

TEST(MultilinearMaximal, MonotoneInFunctions)
{
    const Torus circle(1, 1.0);
    FunctionField f{FunctionKind::bump}, g{FunctionKind::bump};
    f.width = 0.2;
    g.width = 0.2;
    g.amplitude = 1.5;
    const Fs small{f, f}, large{g, f};
    const auto grid = geometric_grid(0.01, 0.5, 8);
    const auto a = multilinear_maximal(circle, span_of(small), at(0.1), grid, 4000, RandomStream{8, 8});
    const auto b = multilinear_maximal(circle, span_of(large), at(0.1), grid, 4000, RandomStream{8, 8});
    EXPECT_LE(a.estimate.value, b.estimate.value);
}

TEST(MultilinearMaximal, EmptySectionIsResolutionError)
{
    const Torus circle(1, 1.0);
    const Fs ones(3, FunctionField::constant(1.0));
    const std::vector<double> tiny{1e-12};
    EXPECT_THROW(multilinear_maximal(circle, span_of(ones), at(0.0), tiny, 10, RandomStream{}, Method::ambient),
                 ResolutionError);
}

TEST(HardyLittlewood, CloudExample)
{
    const auto cloud = line012();
    const auto f = FunctionField::table({1.0, 0.0, 0.0});
    const auto radii = exhaustive_ball_radii(cloud, CloudIndex{0});
    EXPECT_EQ(radii.size(), 3u);
    EXPECT_EQ(hl_maximal(cloud, f, CloudIndex{0}, radii, 1, RandomStream{}).estimate.value, 1.0);
    EXPECT_EQ(hl_maximal(cloud, f, CloudIndex{2}, exhaustive_ball_radii(cloud, CloudIndex{2}), 1, RandomStream{})
                  .estimate.value,
              1.0 / 3.0);
}

TEST(HardyLittlewood, ConstantAndSmallRadius)
{
    const Torus circle(1, 1.0);
    const auto grid = geometric_grid(1e-4, 0.5, 10);
    EXPECT_EQ(hl_maximal(circle, FunctionField::constant(-3.0), at(0.2), grid, 100, RandomStream{}).estimate.value, 3.0);
    const auto f = cosine();
    const std::vector<double> small{1e-4};
    const auto m = hl_maximal(circle, f, at(0.1), small, 1000, RandomStream{9, 9});
    EXPECT_NEAR(m.estimate.value, std::abs(f.at_position(0.1)), 3.0 * m.estimate.stderr + 1e-7);
    const auto full = hl_maximal(circle, f, at(0.1), grid, 1000, RandomStream{9, 9});
    EXPECT_GE(full.estimate.value, std::abs(f.at_position(0.1)) - 1e-6);
}

TEST(HardyLittlewood, AmbientMatchesExact)
{
    const FiniteCloud cloud({{0.0}, {0.4}, {1.0}, {1.7}}, {1.0, 2.0, 1.0, 0.5});
    const auto f = FunctionField::table({0.5, -1.0, 2.0, 0.0});
    const auto radii = exhaustive_ball_radii(cloud, CloudIndex{1});
    const auto exact = hl_maximal(cloud, f, CloudIndex{1}, radii, 1, RandomStream{});
    const auto mc = hl_maximal(cloud, f, CloudIndex{1}, radii, 20000, RandomStream{10, 1}, Method::ambient);
    EXPECT_NEAR(mc.estimate.value, exact.estimate.value, 4.0 * mc.estimate.stderr + 1e-12);
}

// ---------------------------------------------------------------------------
// Grids.
// ---------------------------------------------------------------------------

TEST(Grids, GeometricEndpointsAndRatio)
{
    const auto g = geometric_grid(1e-3, 1.0, 7);
    ASSERT_EQ(g.size(), 7u);
    EXPECT_EQ(g.front(), 1e-3);
    EXPECT_EQ(g.back(), 1.0);
    for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_NEAR(g[i] / g[i - 1], std::sqrt(10.0), 1e-12);
    }
    const auto d = geometric_grid(std::ldexp(1.0, -12), std::ldexp(1.0, -5), 8);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d[i], std::ldexp(1.0, -12 + static_cast<int>(i)));
    }
    EXPECT_THROW(geometric_grid(0.0, 1.0, 3), std::invalid_argument);
    EXPECT_THROW(geometric_grid(1.0, 0.5, 3), std::invalid_argument);
}

TEST(Grids, DyadicCoverRatioAtMostTwo)
{
    const auto g = dyadic_cover(1e-3 * 0.25, 0.5);
    EXPECT_EQ(g.front(), 0.25e-3);
    EXPECT_EQ(g.back(), 0.5);
    for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_LE(g[i] / g[i - 1], 2.0 + 1e-12);
    }
}

TEST(Grids, ThresholdRadii)
{
    EXPECT_EQ(threshold_radii({0.0, 1.0, 1.0, 2.0}), (std::vector<double>{0.5, 1.5, 4.0}));
    EXPECT_EQ(threshold_radii({0.0}), (std::vector<double>{1.0}));
}

TEST(Grids, CheckGridRejectsUnsorted)
{
    const std::vector<double> bad{0.1, 0.05};
    EXPECT_THROW(check_grid(bad), std::invalid_argument);
    EXPECT_THROW(check_grid({}), std::invalid_argument);
}
