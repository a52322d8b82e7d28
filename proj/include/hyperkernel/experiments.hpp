#pragma once

// Experiment runners. Each turns a validated config into a Report: fixed-schema
// CSV rows plus a JSON summary. Rows are computed in parallel into
// preallocated slots, and every random draw comes from a substream keyed by
// the row's logical coordinates, so output bytes do not depend on --jobs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "sections.hpp"

namespace hyperkernel {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    unsigned jobs = 1;
    std::uint64_t seed = 0;
};

struct Report {
    ExperimentKind kind = ExperimentKind::verify;
    std::string space;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    nlohmann::json summary = nlohmann::json::object();
    std::uint64_t violations = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;

    bool passed() const noexcept { return violations == 0; }
};

/// Shortest round-trip decimal form.
inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

inline const char* format_bool(bool b) { return b ? "true" : "false"; }

inline std::string to_csv(const Report& r)
{
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) {
                out += ',';
            }
            out += cells[i];
        }
        out += '\n';
    };
    line(r.header);
    for (const auto& row : r.rows) {
        line(row);
    }
    return out;
}

inline nlohmann::json summary_json(const Report& r)
{
    nlohmann::json j = r.summary;
    j["experiment"] = to_string(r.kind);
    j["space"] = r.space;
    j["rows"] = r.rows.size();
    j["violations"] = r.violations;
    j["passed"] = r.passed();
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
    j["provenance"] = {{"config_hash", hash}, {"seed", r.seed}, {"version", kVersion}};
    return j;
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

namespace detail {

enum StreamKey : std::uint64_t { points_key = 1, rows_key = 2, verify_key = 3 };

template <MeasureSpace S>
std::vector<PointOf<S>> evaluation_points(const S& space, const ExperimentConfig& cfg, const RandomStream& root,
                                          bool whole_finite_carrier)
{
    std::vector<PointOf<S>> pts;
    if (!cfg.eval_positions.empty()) {
        for (const double u : cfg.eval_positions) {
            pts.push_back(space.point_at_position(u));
        }
        return pts;
    }
    if constexpr (FiniteSpace<S>) {
        if (whole_finite_carrier && enumerable(space, 1)) {
            for (std::size_t i = 0; i < space.carrier_size(); ++i) {
                pts.push_back(space.point_at(i));
            }
            return pts;
        }
    }
    // Adversarial picks first: centers of the catalog functions (kinks, bump
    // tops), then mu-random points.
    const auto count = static_cast<std::size_t>(cfg.eval_points);
    for (const auto& f : cfg.functions) {
        if (f.kind == FunctionKind::constant || f.kind == FunctionKind::table || pts.size() >= count) {
            continue;
        }
        const auto p = space.point_at_position(wrap_periodic(f.center, 1.0));
        if (std::find(pts.begin(), pts.end(), p) == pts.end()) {
            pts.push_back(p);
        }
    }
    auto g = root.substream({points_key}).engine();
    while (pts.size() < count) {
        pts.push_back(space.sample(g));
    }
    return pts;
}

/// Fitted Ahlfors constants for finite spaces that do not declare them.
template <MeasureSpace S>
GeometricConstants effective_constants(const S& space)
{
    GeometricConstants c = space.constants();
    if constexpr (FiniteSpace<S>) {
        if (!c.ahlfors && enumerable(space, 1)) {
            c.ahlfors = fit_ahlfors(space);
        }
    }
    return c;
}

inline TheoremConstants constants_for(const GeometricConstants& c, int k)
{
    if (!c.ahlfors) {
        throw ConfigError("this experiment needs Ahlfors constants; declare space.ahlfors");
    }
    return theorem_constants(k, c.ahlfors->alpha, c.kappa, c.ahlfors->gamma, c.ahlfors->Gamma, c.doubling_A);
}

inline nlohmann::json constants_json(const TheoremConstants& t)
{
    return {{"lambda0", t.lambda0}, {"C1", t.C1}, {"C2", t.C2}, {"A_tilde", t.A_tilde},
            {"C_domination", t.C_domination}, {"prop33_bound", t.prop33_bound}};
}

inline std::vector<double> union_sorted(std::vector<double> a, const std::vector<double>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

template <MeasureSpace S>
Report new_report(ExperimentKind kind, const S& space, const ExperimentConfig& cfg, const RunOptions& opt,
                  std::vector<std::string> header)
{
    Report r;
    r.kind = kind;
    r.space = space.name();
    r.header = std::move(header);
    r.config_hash = config_hash(cfg);
    r.seed = opt.seed;
    return r;
}

} // namespace detail

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string check;
    std::uint64_t trials = 0;
    std::uint64_t violations = 0;
    double max_observed = 0.0;
    double bound = 0.0;
};

template <MeasureSpace S>
std::vector<CheckResult> verification_suite(const S& space, const ExperimentConfig& cfg, const RandomStream& root,
                                            unsigned jobs)
{
    using P = PointOf<S>;
    const int k = cfg.k;
    const std::uint64_t trials = cfg.verify_trials;
    const GeometricConstants gc = space.constants();
    const double kappa = gc.kappa;
    const double tol = kTriangleRoundoff;
    const auto rng = root.substream({detail::verify_key});
    auto pts = detail::evaluation_points(space, cfg, root, false);
    if (pts.size() > 20) {
        pts.resize(20);
    }
    const double r_lo = std::max(gc.r_min, 1e-3 * gc.r_max);
    const auto radii = geometric_grid(r_lo, gc.r_max, 25);

    std::vector<std::function<CheckResult()>> checks;

    checks.emplace_back([&] {
        const auto v = validate_quasimetric(space, trials, rng.substream({1}));
        return CheckResult{"quasi_triangle", trials, v.triangle_violations + v.zero_distance_distinct, v.empirical_kappa,
                           kappa};
    });
    checks.emplace_back([&] {
        auto g = rng.substream({2}).engine();
        CheckResult c{"symmetry", trials, 0, 0.0, 0.0};
        for (std::uint64_t t = 0; t < trials; ++t) {
            const P x = space.sample(g);
            const P y = space.sample(g);
            const double gap = std::abs(space.distance(x, y) - space.distance(y, x));
            c.max_observed = std::max(c.max_observed, gap);
            c.violations += gap != 0.0;
        }
        return c;
    });
    if (gc.ahlfors) {
        checks.emplace_back([&] {
            CheckResult c{"ahlfors_sandwich", pts.size() * radii.size(), 0, 0.0, gc.ahlfors->Gamma};
            c.violations = ahlfors_violations(space, std::span<const P>(pts), std::span<const double>(radii));
            for (const auto& x : pts) {
                for (const double r : radii) {
                    c.max_observed = std::max(c.max_observed, space.measure_ball(x, r) / std::pow(r, gc.ahlfors->alpha));
                }
            }
            return c;
        });
    }
    checks.emplace_back([&] {
        double observed = 0.0;
        std::uint64_t n = 0;
        if constexpr (FiniteSpace<S>) {
            if (enumerable(space, 1)) {
                observed = exact_doubling_constant(space);
                n = space.carrier_size();
            }
        }
        if (n == 0) {
            const auto half = geometric_grid(r_lo, gc.r_max / 2.0, 20);
            observed = estimate_doubling_constant(space, std::span<const double>(half), std::span<const P>(pts));
            n = pts.size() * half.size();
        }
        return CheckResult{"doubling", n, observed > gc.doubling_A * (1.0 + tol) ? 1u : 0u, observed, gc.doubling_A};
    });
    checks.emplace_back([&] {
        auto g = rng.substream({3}).engine();
        CheckResult c{"rho_sandwich", trials, 0, 0.0, 1.0};
        TupleBuffer<P> buf;
        buf.k = k;
        for (std::uint64_t t = 0; t < trials; ++t) {
            for (int i = 0; i <= k; ++i) {
                buf.data[static_cast<std::size_t>(i)] = space.sample(g);
            }
            const double r = rho(space, buf.full());
            const double diam = tuple_diameter(space, buf.full());
            if (diam / (2.0 * kappa) > r * (1.0 + tol) || r > diam * (1.0 + tol)) {
                ++c.violations;
            }
            if (r > 0.0) {
                c.max_observed = std::max(c.max_observed, diam / (2.0 * kappa * r));
            }
        }
        return c;
    });
    checks.emplace_back([&] {
        auto g = rng.substream({4}).engine();
        CheckResult c{"rho_permutation", trials, 0, 0.0, 0.0};
        TupleBuffer<P> buf;
        buf.k = k;
        for (std::uint64_t t = 0; t < trials; ++t) {
            for (int i = 0; i <= k; ++i) {
                buf.data[static_cast<std::size_t>(i)] = space.sample(g);
            }
            const double before = rho(space, buf.full());
            for (int i = k; i > 0; --i) {
                std::swap(buf.data[static_cast<std::size_t>(i)], buf.data[g.below(static_cast<std::uint64_t>(i) + 1)]);
            }
            const double gap = std::abs(before - rho(space, buf.full()));
            c.max_observed = std::max(c.max_observed, gap);
            c.violations += gap != 0.0;
        }
        return c;
    });
    // Product of balls inside the section, section inside the 2 kappa ball.
    checks.emplace_back([&] {
        auto g = rng.substream({5}).engine();
        CheckResult c{"section_inner", trials, 0, 0.0, 1.0};
        std::vector<P> ys(static_cast<std::size_t>(k));
        for (std::uint64_t t = 0; t < trials; ++t) {
            const P x = space.sample(g);
            const double r = gc.r_max * (0.001 + 0.999 * g.uniform());
            const auto sampler = space.ball_sampler(x, r);
            for (auto& y : ys) {
                y = sampler(g);
            }
            const Section<P> s{x, r, k};
            if (!in_section(space, s, std::span<const P>(ys))) {
                ++c.violations;
            }
        }
        return c;
    });
    checks.emplace_back([&] {
        auto g = rng.substream({6}).engine();
        CheckResult c{"section_outer", trials, 0, 0.0, 1.0};
        std::vector<P> ys(static_cast<std::size_t>(k));
        for (std::uint64_t t = 0; t < trials; ++t) {
            const P x = space.sample(g);
            const double r = gc.r_max * (0.001 + 0.999 * g.uniform());
            const auto sampler = space.ball_sampler(x, 3.0 * kappa * r);
            for (auto& y : ys) {
                y = sampler(g);
            }
            const Section<P> s{x, r, k};
            if (!in_section(space, s, std::span<const P>(ys))) {
                continue;
            }
            for (const auto& y : ys) {
                const double ratio = space.distance(x, y) / (2.0 * kappa * r);
                c.max_observed = std::max(c.max_observed, ratio);
                if (!(ratio < 1.0 + tol)) {
                    ++c.violations;
                    break;
                }
            }
        }
        return c;
    });
    checks.emplace_back([&] {
        const double A_tilde = std::pow(gc.doubling_A, k * std::log2(8.0 * kappa));
        const auto half = geometric_grid(r_lo, gc.r_max / 2.0, 5);
        const std::size_t npts = std::min<std::size_t>(pts.size(), 10);
        const std::uint64_t n = std::min<std::uint64_t>(cfg.mc_samples, 50'000);
        CheckResult c{"section_doubling", npts * half.size(), 0, 0.0, A_tilde};
        for (std::size_t i = 0; i < npts; ++i) {
            for (std::size_t j = 0; j < half.size(); ++j) {
                const auto small = measure_section(space, Section<P>{pts[i], half[j], k}, n,
                                                   rng.substream({7, i, j, 0}), cfg.method);
                const auto large = measure_section(space, Section<P>{pts[i], 2.0 * half[j], k}, n,
                                                   rng.substream({7, i, j, 1}), cfg.method);
                if (small.value > 0.0) {
                    c.max_observed = std::max(c.max_observed, large.value / small.value);
                }
                if (!within_upper(large.value, A_tilde * small.value, combine_stderr(large.stderr, A_tilde * small.stderr))) {
                    ++c.violations;
                }
            }
        }
        return c;
    });
    if (gc.ahlfors) {
        checks.emplace_back([&] {
            const double exact = s_phi(cfg.profile, k, gc.ahlfors->alpha);
            const double quad = s_phi_quadrature(cfg.profile, k, gc.ahlfors->alpha);
            const double rel = std::abs(quad - exact) / exact;
            return CheckResult{"profile_moment", 1, rel > 1e-6 ? 1u : 0u, rel, 1e-6};
        });
    }
    checks.emplace_back([&] {
        std::uint64_t bad = 0;
        try {
            validate_profile(cfg.profile, k, gc.ahlfors ? gc.ahlfors->alpha : 1.0);
        } catch (const AdmissibilityError&) {
            bad = 1;
        }
        return CheckResult{"profile_admissible", 1, bad, 0.0, 0.0};
    });
    checks.emplace_back([&] {
        auto g = rng.substream({8}).engine();
        CheckResult c{"product_difference", trials, 0, 0.0, 1e-12};
        std::vector<double> a, b;
        for (std::uint64_t t = 0; t < trials; ++t) {
            const std::size_t len = 1 + g.below(8);
            a.resize(len);
            b.resize(len);
            for (std::size_t i = 0; i < len; ++i) {
                a[i] = -10.0 + 20.0 * g.uniform();
                b[i] = -10.0 + 20.0 * g.uniform();
            }
            const auto pd = product_difference<double>(a, b);
            double pa = 1.0, pb = 1.0, scale = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                pa *= a[i];
                pb *= b[i];
                scale += std::abs(pd.terms[i]);
            }
            scale += std::abs(pa) + std::abs(pb);
            const double rel = std::abs(pd.total - (pa - pb)) / scale;
            c.max_observed = std::max(c.max_observed, rel);
            c.violations += rel > 1e-12;
        }
        return c;
    });
    checks.emplace_back([&] {
        const std::vector<FunctionField> ones(static_cast<std::size_t>(k), FunctionField::constant(1.0));
        const std::size_t npts = std::min<std::size_t>(pts.size(), 5);
        const std::uint64_t n = std::min<std::uint64_t>(cfg.mc_samples, 20'000);
        CheckResult c{"normalization", npts * 4, 0, 0.0, 0.0};
        for (std::size_t i = 0; i < npts; ++i) {
            for (int j = 0; j < 4; ++j) {
                const double eps = std::ldexp(gc.r_max, -2 * j);
                const auto m = phi_mean(space, cfg.profile, std::span<const FunctionField>(ones), pts[i], eps, n,
                                        rng.substream({9, i, static_cast<std::uint64_t>(j)}), cfg.method);
                c.max_observed = std::max(c.max_observed, std::abs(m.value - 1.0));
                c.violations += m.value != 1.0;
            }
        }
        return c;
    });
    checks.emplace_back([&] {
        const std::size_t npts = std::min<std::size_t>(pts.size(), 5);
        const std::uint64_t n = std::min<std::uint64_t>(cfg.mc_samples, 20'000);
        CheckResult c{"multilinearity", npts, 0, 0.0, 1e-12};
        auto scaled = cfg.functions;
        constexpr double factor = 3.0;
        if (scaled.front().kind == FunctionKind::table) {
            for (auto& v : scaled.front().values) {
                v *= factor;
            }
        } else {
            scaled.front().amplitude *= factor;
        }
        for (std::size_t i = 0; i < npts; ++i) {
            const auto stream = rng.substream({10, i});
            const double eps = gc.r_max / 4.0;
            const auto base = phi_mean(space, cfg.profile, std::span<const FunctionField>(cfg.functions), pts[i], eps, n,
                                       stream, cfg.method);
            const auto times = phi_mean(space, cfg.profile, std::span<const FunctionField>(scaled), pts[i], eps, n,
                                        stream, cfg.method);
            const double gap = std::abs(times.value - factor * base.value) / std::max(1.0, std::abs(factor * base.value));
            c.max_observed = std::max(c.max_observed, gap);
            c.violations += gap > 1e-12;
        }
        return c;
    });

    std::vector<CheckResult> results(checks.size());
    parallel_for(checks.size(), jobs, [&](std::size_t i) { results[i] = checks[i](); });
    return results;
}

template <MeasureSpace S>
Report run_verify(const S& space, const ExperimentConfig& cfg, const RunOptions& opt)
{
    Report rep = detail::new_report(ExperimentKind::verify, space, cfg, opt,
                                    {"check", "space", "trials", "violations", "max_observed", "bound", "pass"});
    const auto results = verification_suite(space, cfg, RandomStream{opt.seed, 0}, opt.jobs);
    nlohmann::json failed = nlohmann::json::array();
    for (const auto& c : results) {
        rep.rows.push_back({c.check, rep.space, std::to_string(c.trials), std::to_string(c.violations),
                            format_double(c.max_observed), format_double(c.bound), format_bool(c.violations == 0)});
        rep.violations += c.violations;
        if (c.violations) {
            failed.push_back(c.check);
        }
    }
    rep.summary["checks"] = results.size();
    rep.summary["failed_checks"] = failed;
    return rep;
}

// ---------------------------------------------------------------------------
// ratios
// ---------------------------------------------------------------------------

template <MeasureSpace S>
Report run_ratios(const S& space, const ExperimentConfig& cfg, const RunOptions& opt)
{
    using P = PointOf<S>;
    Report rep = detail::new_report(
        ExperimentKind::ratios, space, cfg, opt,
        {"space", "x_id", "r", "quantity", "estimate", "stderr", "lower_bound", "upper_bound", "pass"});
    const GeometricConstants gc = detail::effective_constants(space);
    const TheoremConstants tc = detail::constants_for(gc, cfg.k);
    const int k = cfg.k;
    const double ka = k * gc.ahlfors->alpha;
    const double s = s_phi(cfg.profile, k, gc.ahlfors->alpha);
    const double lo_section = std::pow(gc.ahlfors->gamma, k);
    const double hi_section = std::pow(2.0 * gc.kappa, ka) * std::pow(gc.ahlfors->Gamma, k);

    const RandomStream root{opt.seed, 0};
    const auto pts = detail::evaluation_points(space, cfg, root, false);
    const auto radii = cfg.radius_grid ? cfg.radius_grid->values()
                                       : geometric_grid(std::max(gc.r_min, 1e-3 * gc.r_max), gc.r_max, 13);

    struct Cell {
        Estimate value;
        std::string error;
    };
    const std::size_t nr = radii.size();
    std::vector<Cell> cells(pts.size() * nr * 2);
    parallel_for(cells.size(), opt.jobs, [&](std::size_t idx) {
        const std::size_t q = idx % 2;
        const std::size_t j = (idx / 2) % nr;
        const std::size_t i = idx / (2 * nr);
        const auto stream = root.substream({detail::rows_key, i, j, q});
        try {
            cells[idx].value = q == 0 ? measure_section(space, Section<P>{pts[i], radii[j], k}, cfg.mc_samples, stream, cfg.method)
                                      : j_normalizer(space, cfg.profile, pts[i], radii[j], k, cfg.mc_samples, stream, cfg.method);
            if (q == 0 && !(cells[idx].value.value > 0.0)) {
                throw ResolutionError("no samples fell in the section");
            }
        } catch (const ResolutionError& e) {
            cells[idx].error = e.what();
        }
    });

    nlohmann::json excluded = nlohmann::json::array();
    double min_ratio[2] = {INFINITY, INFINITY};
    double max_ratio[2] = {0.0, 0.0};
    for (std::size_t idx = 0; idx < cells.size(); ++idx) {
        const std::size_t q = idx % 2;
        const std::size_t j = (idx / 2) % nr;
        const std::size_t i = idx / (2 * nr);
        const char* quantity = q == 0 ? "section_measure" : "normalizer";
        if (!cells[idx].error.empty()) {
            excluded.push_back({{"x_id", i}, {"r", radii[j]}, {"quantity", quantity}, {"reason", cells[idx].error}});
            continue;
        }
        const double scale = std::pow(radii[j], ka) * (q == 0 ? 1.0 : s);
        const double est = cells[idx].value.value / scale;
        const double se = cells[idx].value.stderr / scale;
        const double lo = q == 0 ? lo_section : tc.C1;
        const double hi = q == 0 ? hi_section : tc.C2;
        const bool pass = est + 3.0 * se >= lo && est - 3.0 * se <= hi;
        rep.violations += !pass;
        min_ratio[q] = std::min(min_ratio[q], est);
        max_ratio[q] = std::max(max_ratio[q], est);
        rep.rows.push_back({rep.space, std::to_string(i), format_double(radii[j]), quantity, format_double(est),
                            format_double(se), format_double(lo), format_double(hi), format_bool(pass)});
    }
    rep.summary["constants"] = detail::constants_json(tc);
    rep.summary["s_phi"] = s;
    rep.summary["ahlfors"] = {{"alpha", gc.ahlfors->alpha}, {"gamma", gc.ahlfors->gamma}, {"Gamma", gc.ahlfors->Gamma}};
    rep.summary["section_measure_range"] = {min_ratio[0], max_ratio[0]};
    rep.summary["normalizer_range"] = {min_ratio[1], max_ratio[1]};
    rep.summary["excluded"] = excluded;
    return rep;
}

// ---------------------------------------------------------------------------
// domination
// ---------------------------------------------------------------------------

template <MeasureSpace S>
Report run_domination(const S& space, const ExperimentConfig& cfg, const RunOptions& opt)
{
    Report rep = detail::new_report(ExperimentKind::domination, space, cfg, opt,
                                    {"space", "x_id", "phi_star", "stderr_ps", "m_sections", "stderr_m", "prod_hl",
                                     "bound_c", "bound_prop33", "pass_thm32", "pass_prop33"});
    const GeometricConstants gc = detail::effective_constants(space);
    const TheoremConstants tc = detail::constants_for(gc, cfg.k);
    const int k = cfg.k;
    const std::span<const FunctionField> fs(cfg.functions);
    const RandomStream root{opt.seed, 0};
    const auto pts = detail::evaluation_points(space, cfg, root, true);
    const bool exhaustive = resolve_method(space, k, cfg.method) == Method::exact;

    // The top radius must clear the diameter so the sup over sections sees X^k.
    const auto default_grid = dyadic_cover(1e-3 * gc.r_max, 2.0 * std::max(gc.r_max, space.diameter()));
    const auto eps_grid = cfg.epsilon_grid ? cfg.epsilon_grid->values() : default_grid;
    const auto r_grid = cfg.radius_grid ? cfg.radius_grid->values() : default_grid;
    std::vector<double> doubled(r_grid.size());
    std::transform(r_grid.begin(), r_grid.end(), doubled.begin(), [](double r) { return 2.0 * r; });
    const auto ball_grid = detail::union_sorted(r_grid, doubled);

    struct Row {
        Estimate phi_star, m;
        double prod = 1.0, prod_se = 0.0;
    };
    std::vector<Row> rows(pts.size());
    parallel_for(pts.size(), opt.jobs, [&](std::size_t i) {
        const auto& x = pts[i];
        std::vector<double> eps = eps_grid, radii = r_grid, balls = ball_grid;
        if constexpr (FiniteSpace<S>) {
            if (exhaustive) {
                radii = exhaustive_section_radii(space, x, k);
                eps = radii;
                balls = exhaustive_ball_radii(space, x);
            }
        }
        Row row;
        row.phi_star = phi_star(space, cfg.profile, fs, x, eps, cfg.mc_samples,
                                root.substream({detail::rows_key, i, 0}), cfg.method).estimate;
        row.m = multilinear_maximal(space, fs, x, radii, cfg.mc_samples, root.substream({detail::rows_key, i, 1}),
                                    cfg.method).estimate;
        double rel_var = 0.0;
        for (std::size_t f = 0; f < fs.size(); ++f) {
            const auto mf = hl_maximal(space, fs[f], x, balls, cfg.mc_samples,
                                       root.substream({detail::rows_key, i, 2, f}), cfg.method).estimate;
            row.prod *= mf.value;
            if (mf.value > 0.0) {
                rel_var += (mf.stderr / mf.value) * (mf.stderr / mf.value);
            }
        }
        row.prod_se = std::abs(row.prod) * std::sqrt(rel_var);
        rows[i] = row;
    });

    std::uint64_t fail32 = 0, fail33 = 0;
    double worst32 = 0.0, worst33 = 0.0;
    double l1 = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double bound_c = tc.C_domination * r.m.value;
        const double bound_33 = tc.prop33_bound * r.prod;
        const bool pass32 = within_upper(r.phi_star.value, bound_c,
                                         combine_stderr(r.phi_star.stderr, tc.C_domination * r.m.stderr));
        const bool pass33 = within_upper(r.m.value, bound_33, combine_stderr(r.m.stderr, tc.prop33_bound * r.prod_se));
        fail32 += !pass32;
        fail33 += !pass33;
        if (r.m.value > 0.0) {
            worst32 = std::max(worst32, r.phi_star.value / r.m.value);
        }
        if (r.prod > 0.0) {
            worst33 = std::max(worst33, r.m.value / r.prod);
        }
        if constexpr (FiniteSpace<S>) {
            if (exhaustive) {
                l1 += r.phi_star.value * space.weight_at(space.index_of(pts[i]));
            }
        }
        rep.rows.push_back({rep.space, std::to_string(i), format_double(r.phi_star.value), format_double(r.phi_star.stderr),
                            format_double(r.m.value), format_double(r.m.stderr), format_double(r.prod),
                            format_double(bound_c), format_double(bound_33), format_bool(pass32), format_bool(pass33)});
    }
    rep.violations = fail32 + fail33;
    rep.summary["constants"] = detail::constants_json(tc);
    rep.summary["violations_thm32"] = fail32;
    rep.summary["violations_prop33"] = fail33;
    rep.summary["max_phi_star_over_m"] = worst32;
    rep.summary["max_m_over_prod_hl"] = worst33;
    rep.summary["exhaustive"] = exhaustive;
    if (exhaustive) {
        // ||Phi*||_1 / prod ||f_j||_p, reported rather than asserted.
        double norms = 1.0;
        for (const auto& f : cfg.functions) {
            norms *= lp_norm(f, space);
        }
        rep.summary["l1_ratio"] = norms > 0.0 ? l1 / norms : 0.0;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

/// Tail sum sum_{i >= log2(sigma / (2 kappa eps)) - 1} phi(2^i) 2^(i k alpha):
/// the envelope of the kernel mass outside the sigma-neighbourhood.
inline double tail_envelope(const KernelProfile& phi, double sigma, double eps, double kappa, double ka)
{
    const int start = static_cast<int>(std::ceil(std::log2(sigma / (2.0 * kappa * eps)) - 1.0));
    double sum = 0.0;
    for (int i = start; i < start + 400; ++i) {
        const double term = evaluate(phi, std::ldexp(1.0, i)) * std::exp2(i * ka);
        if (i > 0 && (term == 0.0 || term < 1e-17 * sum)) {
            break;
        }
        sum += term;
    }
    return sum;
}

/// Least-squares slope of log y against log x over the positive entries.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            const double lx = std::log(x[i]), ly = std::log(y[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
    }
    if (n < 2) {
        return std::nan("");
    }
    const double denom = n * sxx - sx * sx;
    return denom == 0.0 ? std::nan("") : (n * sxy - sx * sy) / denom;
}

template <MeasureSpace S>
Report run_convergence(const S& space, const ExperimentConfig& cfg, const RunOptions& opt)
{
    Report rep = detail::new_report(ExperimentKind::convergence, space, cfg, opt,
                                    {"space", "x_id", "epsilon", "estimate", "target", "abs_err", "thm41_err", "stderr"});
    const GeometricConstants gc = space.constants();
    const int k = cfg.k;
    const std::span<const FunctionField> fs(cfg.functions);
    const RandomStream root{opt.seed, 0};
    const auto pts = detail::evaluation_points(space, cfg, root, false);
    auto eps = cfg.epsilon_grid ? cfg.epsilon_grid->values() : dyadic_cover(std::ldexp(gc.r_max, -7), gc.r_max);
    std::reverse(eps.begin(), eps.end());
    const std::size_t ne = eps.size();

    std::vector<KernelMeans> cells(pts.size() * ne);
    std::vector<double> targets(pts.size());
    parallel_for(cells.size(), opt.jobs, [&](std::size_t idx) {
        const std::size_t i = idx / ne, j = idx % ne;
        cells[idx] = kernel_means(space, cfg.profile, fs, pts[i], eps[j], cfg.mc_samples,
                                  root.substream({detail::rows_key, i, j}), cfg.method);
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        targets[i] = 1.0;
        for (const auto& f : fs) {
            targets[i] *= evaluate(f, space, pts[i]);
        }
    }

    std::vector<double> mean_err(ne, 0.0), mean_var(ne, 0.0);
    const double npts = static_cast<double>(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < ne; ++j) {
            const auto& c = cells[i * ne + j];
            mean_err[j] += c.identity_error.value / npts;
            mean_var[j] += c.identity_error.stderr * c.identity_error.stderr / (npts * npts);
            rep.rows.push_back({rep.space, std::to_string(i), format_double(eps[j]), format_double(c.mean.value),
                                format_double(targets[i]), format_double(std::abs(c.mean.value - targets[i])),
                                format_double(c.identity_error.value), format_double(c.identity_error.stderr)});
        }
    }
    // Monotone decay of the mean error is only claimed for smooth functions
    // on circle-type spaces; elsewhere the count is a diagnostic.
    std::uint64_t trend_violations = 0;
    for (std::size_t j = 1; j < ne; ++j) {
        trend_violations += !within_upper(mean_err[j], mean_err[j - 1], std::sqrt(mean_var[j] + mean_var[j - 1]));
    }
    const bool smooth = std::all_of(cfg.functions.begin(), cfg.functions.end(), [](const FunctionField& f) {
        return f.kind == FunctionKind::constant || f.kind == FunctionKind::cosine || f.kind == FunctionKind::bump;
    });
    const bool trend_gated = smooth && (std::is_same_v<S, Torus> || std::is_same_v<S, PowerCircle>);
    rep.violations = trend_gated ? trend_violations : 0;

    double sigma = 1.0;
    for (const auto& f : cfg.functions) {
        if (f.kind == FunctionKind::bump || f.kind == FunctionKind::step) {
            sigma = std::min(sigma, f.width);
        }
    }
    nlohmann::json envelope = nlohmann::json::array();
    const double alpha = gc.ahlfors ? gc.ahlfors->alpha : 1.0;
    for (const double e : eps) {
        envelope.push_back(tail_envelope(cfg.profile, sigma, e, gc.kappa, k * alpha));
    }
    rep.summary["epsilon"] = eps;
    rep.summary["mean_thm41_err"] = mean_err;
    rep.summary["loglog_slope"] = loglog_slope(eps, mean_err);
    rep.summary["final_mean_thm41_err"] = mean_err.empty() ? 0.0 : mean_err.back();
    rep.summary["trend_violations"] = trend_violations;
    rep.summary["trend_gated"] = trend_gated;
    rep.summary["tail_envelope"] = envelope;
    return rep;
}

// ---------------------------------------------------------------------------
// Dispatch and output.
// ---------------------------------------------------------------------------

inline Report run_experiment(const ExperimentConfig& cfg, ExperimentKind kind, const RunOptions& opt)
{
    const AnySpace space = make_space(cfg.space);
    return std::visit(
        [&](const auto& s) -> Report {
            switch (kind) {
            case ExperimentKind::verify: return run_verify(s, cfg, opt);
            case ExperimentKind::ratios: return run_ratios(s, cfg, opt);
            case ExperimentKind::domination: return run_domination(s, cfg, opt);
            case ExperimentKind::convergence: return run_convergence(s, cfg, opt);
            }
            throw std::invalid_argument("unknown experiment");
        },
        space);
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    out << text;
}

} // namespace hyperkernel
