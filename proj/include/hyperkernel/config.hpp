#pragma once

// Experiment configuration: JSON parsing with strict key checking, emission
// (parse(emit(c)) == c), and validation of the cross-field invariants.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "function_field.hpp"
#include "operators.hpp"
#include "profile.hpp"
#include "sampling.hpp"
#include "space.hpp"

namespace hyperkernel {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { verify, ratios, domination, convergence };

inline const char* to_string(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::verify: return "verify";
    case ExperimentKind::ratios: return "ratios";
    case ExperimentKind::domination: return "domination";
    case ExperimentKind::convergence: return "convergence";
    }
    return "unknown";
}

struct GridSpec {
    double min = 1e-3;
    double max = 1.0;
    int count = 10;

    std::vector<double> values() const { return geometric_grid(min, max, count); }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct ExperimentConfig {
    std::optional<std::uint64_t> seed;
    ExperimentKind experiment = ExperimentKind::verify;
    SpaceDescriptor space;
    int k = 1;
    KernelProfile profile;
    std::vector<FunctionField> functions;
    std::optional<GridSpec> epsilon_grid;
    std::optional<GridSpec> radius_grid;
    std::uint64_t mc_samples = 100'000;
    int eval_points = 50;
    std::vector<double> eval_positions;
    std::uint64_t verify_trials = 10'000;
    Method method = Method::automatic;
    std::string output_prefix = "hyperkernel";

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <class T>
T get_as(const json& obj, const std::string& key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

inline double get_number(const json& obj, const std::string& key, const std::string& where)
{
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

inline std::uint64_t get_count(const json& obj, const std::string& key, const std::string& where)
{
    const auto& v = obj.at(key);
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) {
            return static_cast<std::uint64_t>(d);
        }
    }
    throw ConfigError(where + "." + key + ": expected a nonnegative integer");
}

inline SpaceKind parse_space_kind(const std::string& s)
{
    for (auto k : {SpaceKind::circle, SpaceKind::torus, SpaceKind::power_circle, SpaceKind::cantor, SpaceKind::finite_cloud}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("space.kind: unknown kind '" + s + "'");
}

inline ProfileKind parse_profile_kind(const std::string& s)
{
    for (auto k : {ProfileKind::indicator, ProfileKind::exponential, ProfileKind::power, ProfileKind::gaussian}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("profile.kind: unknown kind '" + s + "'");
}

inline FunctionKind parse_function_kind(const std::string& s)
{
    for (auto k : {FunctionKind::constant, FunctionKind::cosine, FunctionKind::bump, FunctionKind::step,
                   FunctionKind::abs_kink, FunctionKind::table}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("functions: unknown kind '" + s + "'");
}

inline ExperimentKind parse_experiment_kind(const std::string& s)
{
    for (auto k : {ExperimentKind::verify, ExperimentKind::ratios, ExperimentKind::domination, ExperimentKind::convergence}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("experiment: unknown kind '" + s + "'");
}

inline Method parse_method(const std::string& s)
{
    for (auto m : {Method::automatic, Method::monte_carlo, Method::ambient, Method::exact}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw ConfigError("method: unknown method '" + s + "'");
}

inline std::set<std::string> space_keys(SpaceKind kind)
{
    std::set<std::string> keys{"kind", "kappa", "doubling_A", "ahlfors", "r_max"};
    switch (kind) {
    case SpaceKind::circle: keys.insert("circumference"); break;
    case SpaceKind::torus: keys.insert({"circumference", "dimension"}); break;
    case SpaceKind::power_circle: keys.insert({"circumference", "beta"}); break;
    case SpaceKind::cantor: keys.insert("depth"); break;
    case SpaceKind::finite_cloud: keys.insert({"points", "weights", "csv"}); break;
    }
    return keys;
}

inline std::set<std::string> function_keys(FunctionKind kind)
{
    switch (kind) {
    case FunctionKind::constant: return {"kind", "amplitude", "p"};
    case FunctionKind::cosine: return {"kind", "amplitude", "frequency", "center", "p"};
    case FunctionKind::bump:
    case FunctionKind::step: return {"kind", "amplitude", "center", "width", "p"};
    case FunctionKind::abs_kink: return {"kind", "amplitude", "center", "p"};
    case FunctionKind::table: return {"kind", "values", "p"};
    }
    return {};
}

inline SpaceDescriptor parse_space(const json& j)
{
    if (!j.is_object() || !j.contains("kind")) {
        throw ConfigError("space: expected an object with a 'kind'");
    }
    SpaceDescriptor d;
    d.kind = parse_space_kind(get_as<std::string>(j, "kind", "space"));
    reject_unknown(j, space_keys(d.kind), "space");
    if (j.contains("circumference")) d.circumference = get_number(j, "circumference", "space");
    if (j.contains("dimension")) d.dimension = static_cast<int>(get_count(j, "dimension", "space"));
    if (j.contains("beta")) d.beta = get_number(j, "beta", "space");
    if (j.contains("depth")) d.depth = static_cast<int>(get_count(j, "depth", "space"));
    if (j.contains("points")) d.points = get_as<std::vector<std::vector<double>>>(j, "points", "space");
    if (j.contains("weights")) d.weights = get_as<std::vector<double>>(j, "weights", "space");
    if (j.contains("csv")) d.csv_path = get_as<std::string>(j, "csv", "space");
    if (j.contains("kappa")) d.kappa = get_number(j, "kappa", "space");
    if (j.contains("doubling_A")) d.doubling_A = get_number(j, "doubling_A", "space");
    if (j.contains("r_max")) d.r_max = get_number(j, "r_max", "space");
    if (j.contains("ahlfors")) {
        const auto& a = j.at("ahlfors");
        reject_unknown(a, {"alpha", "gamma", "Gamma"}, "space.ahlfors");
        for (const char* key : {"alpha", "gamma", "Gamma"}) {
            if (!a.contains(key)) {
                throw ConfigError(std::string("space.ahlfors: missing '") + key + "'");
            }
        }
        d.ahlfors = AhlforsConstants{get_number(a, "alpha", "space.ahlfors"), get_number(a, "gamma", "space.ahlfors"),
                                     get_number(a, "Gamma", "space.ahlfors")};
    }
    if (d.kind == SpaceKind::finite_cloud && d.points.empty() == d.csv_path.empty()) {
        throw ConfigError("space: finite-cloud needs exactly one of 'points' or 'csv'");
    }
    return d;
}

inline double parse_exponent(const json& v)
{
    if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity")) {
        return std::numeric_limits<double>::infinity();
    }
    if (!v.is_number()) {
        throw ConfigError("functions.p: expected a number or \"inf\"");
    }
    return v.get<double>();
}

inline FunctionField parse_function(const json& j)
{
    if (!j.is_object() || !j.contains("kind")) {
        throw ConfigError("functions: each entry needs a 'kind'");
    }
    FunctionField f;
    f.kind = parse_function_kind(get_as<std::string>(j, "kind", "functions"));
    reject_unknown(j, function_keys(f.kind), std::string("functions[") + to_string(f.kind) + "]");
    if (j.contains("amplitude")) f.amplitude = get_number(j, "amplitude", "functions");
    if (j.contains("frequency")) f.frequency = get_number(j, "frequency", "functions");
    if (j.contains("center")) f.center = get_number(j, "center", "functions");
    if (j.contains("width")) f.width = get_number(j, "width", "functions");
    if (j.contains("values")) f.values = get_as<std::vector<double>>(j, "values", "functions");
    if (j.contains("p")) f.p = parse_exponent(j.at("p"));
    return f;
}

inline GridSpec parse_grid(const json& j, const std::string& where)
{
    reject_unknown(j, {"min", "max", "count"}, where);
    GridSpec g;
    for (const char* key : {"min", "max", "count"}) {
        if (!j.contains(key)) {
            throw ConfigError(where + ": missing '" + key + "'");
        }
    }
    g.min = get_number(j, "min", where);
    g.max = get_number(j, "max", where);
    g.count = static_cast<int>(get_count(j, "count", where));
    return g;
}

inline std::string locate(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

inline json emit_number_or_inf(double v)
{
    return std::isinf(v) ? json("inf") : json(v);
}

} // namespace detail

/// Throws ConfigError naming the violated invariant.
inline void validate_config(const ExperimentConfig& c)
{
    if (c.k < 1 || static_cast<std::size_t>(c.k) + 1 > kMaxTupleLength) {
        throw ConfigError("k must be in [1, " + std::to_string(kMaxTupleLength - 1) + "]");
    }
    if (c.functions.size() != static_cast<std::size_t>(c.k)) {
        throw ConfigError("need exactly k = " + std::to_string(c.k) + " functions, got " + std::to_string(c.functions.size()));
    }
    if (c.mc_samples < 2) {
        throw ConfigError("mc_samples must be >= 2");
    }
    if (c.eval_points < 1) {
        throw ConfigError("eval_points must be >= 1");
    }
    if (c.verify_trials < 1) {
        throw ConfigError("verify_trials must be >= 1");
    }
    if (c.output_prefix.empty() || c.output_prefix.find('/') != std::string::npos) {
        throw ConfigError("output_prefix must be a nonempty file name stem");
    }
    AnySpace space;
    try {
        space = make_space(c.space);
        std::visit([](const auto& s) { check_constants(s.constants()); }, space);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("space: ") + e.what());
    }
    const GeometricConstants gc = constants_of(space);
    for (const auto* grid : {&c.epsilon_grid, &c.radius_grid}) {
        if (!*grid) {
            continue;
        }
        const GridSpec& g = **grid;
        const char* name = grid == &c.epsilon_grid ? "epsilon_grid" : "radius_grid";
        if (!(g.min > 0.0) || g.count < 1 || (g.count == 1 ? !(g.max >= g.min) : !(g.max > g.min))) {
            throw ConfigError(std::string(name) + " must be increasing: need 0 < min < max and count >= 1");
        }
    }
    if (c.epsilon_grid && c.epsilon_grid->max > gc.r_max) {
        throw ConfigError("epsilon_grid.max = " + std::to_string(c.epsilon_grid->max) + " exceeds r_max = " +
                          std::to_string(gc.r_max));
    }
    for (const double u : c.eval_positions) {
        if (!(u >= 0.0 && u < 1.0)) {
            throw ConfigError("eval_positions must lie in [0, 1)");
        }
    }
    try {
        std::visit(
            [&](const auto& s) {
                for (const auto& f : c.functions) {
                    check_function(f, s);
                }
                if (c.method == Method::exact) {
                    resolve_method(s, c.k, Method::exact);
                }
            },
            space);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("functions: ") + e.what());
    }
    if (gc.ahlfors) {
        try {
            validate_profile(c.profile, c.k, gc.ahlfors->alpha);
        } catch (const AdmissibilityError& e) {
            throw ConfigError(std::string("profile: ") + e.what());
        }
    } else if (c.profile.kind == ProfileKind::power && !(c.profile.power_exponent > 0.0)) {
        throw ConfigError("profile: power profile needs b > 0");
    }
    for (const auto& f : c.functions) {
        if (c.k > 1 && !(f.p > 1.0)) {
            throw ConfigError("functions: p must be in (1, inf] when k > 1");
        }
    }
    if (c.experiment == ExperimentKind::convergence) {
        double sum = 0.0;
        for (const auto& f : c.functions) {
            sum += 1.0 / f.p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "sum of 1/p_j = %.6g != 1", sum);
            throw ConfigError(buf);
        }
    }
}

inline nlohmann::json emit_config(const ExperimentConfig& c)
{
    using nlohmann::json;
    json j;
    if (c.seed) {
        j["seed"] = *c.seed;
    }
    j["experiment"] = to_string(c.experiment);
    json s;
    const auto& d = c.space;
    s["kind"] = to_string(d.kind);
    switch (d.kind) {
    case SpaceKind::circle: s["circumference"] = d.circumference; break;
    case SpaceKind::torus:
        s["circumference"] = d.circumference;
        s["dimension"] = d.dimension;
        break;
    case SpaceKind::power_circle:
        s["circumference"] = d.circumference;
        s["beta"] = d.beta;
        break;
    case SpaceKind::cantor: s["depth"] = d.depth; break;
    case SpaceKind::finite_cloud:
        if (!d.csv_path.empty()) {
            s["csv"] = d.csv_path;
        } else {
            s["points"] = d.points;
        }
        if (!d.weights.empty()) {
            s["weights"] = d.weights;
        }
        break;
    }
    if (d.kappa) s["kappa"] = *d.kappa;
    if (d.doubling_A) s["doubling_A"] = *d.doubling_A;
    if (d.r_max) s["r_max"] = *d.r_max;
    if (d.ahlfors) s["ahlfors"] = {{"alpha", d.ahlfors->alpha}, {"gamma", d.ahlfors->gamma}, {"Gamma", d.ahlfors->Gamma}};
    j["space"] = s;
    j["k"] = c.k;
    j["profile"] = {{"kind", to_string(c.profile.kind)}};
    if (c.profile.kind == ProfileKind::power) {
        j["profile"]["b"] = c.profile.power_exponent;
    }
    json fs = json::array();
    for (const auto& f : c.functions) {
        json e;
        e["kind"] = to_string(f.kind);
        const auto keys = detail::function_keys(f.kind);
        if (keys.contains("amplitude")) e["amplitude"] = f.amplitude;
        if (keys.contains("frequency")) e["frequency"] = f.frequency;
        if (keys.contains("center")) e["center"] = f.center;
        if (keys.contains("width")) e["width"] = f.width;
        if (keys.contains("values")) e["values"] = f.values;
        e["p"] = detail::emit_number_or_inf(f.p);
        fs.push_back(e);
    }
    j["functions"] = fs;
    if (c.epsilon_grid) {
        j["epsilon_grid"] = {{"min", c.epsilon_grid->min}, {"max", c.epsilon_grid->max}, {"count", c.epsilon_grid->count}};
    }
    if (c.radius_grid) {
        j["radius_grid"] = {{"min", c.radius_grid->min}, {"max", c.radius_grid->max}, {"count", c.radius_grid->count}};
    }
    j["mc_samples"] = c.mc_samples;
    j["eval_points"] = c.eval_points;
    if (!c.eval_positions.empty()) {
        j["eval_positions"] = c.eval_positions;
    }
    j["verify_trials"] = c.verify_trials;
    j["method"] = to_string(c.method);
    j["output_prefix"] = c.output_prefix;
    return j;
}

inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    using namespace detail;
    reject_unknown(j,
                   {"seed", "experiment", "space", "k", "profile", "functions", "epsilon_grid", "radius_grid",
                    "mc_samples", "eval_points", "eval_positions", "verify_trials", "method", "output_prefix"},
                   "config");
    ExperimentConfig c;
    try {
        if (j.contains("seed")) c.seed = get_count(j, "seed", "config");
        if (j.contains("experiment")) c.experiment = parse_experiment_kind(get_as<std::string>(j, "experiment", "config"));
        if (!j.contains("space")) {
            throw ConfigError("config: missing 'space'");
        }
        c.space = parse_space(j.at("space"));
        if (j.contains("k")) c.k = static_cast<int>(get_count(j, "k", "config"));
        if (j.contains("profile")) {
            const auto& p = j.at("profile");
            reject_unknown(p, {"kind", "b"}, "profile");
            if (!p.contains("kind")) {
                throw ConfigError("profile: missing 'kind'");
            }
            c.profile.kind = parse_profile_kind(get_as<std::string>(p, "kind", "profile"));
            if (p.contains("b")) {
                if (c.profile.kind != ProfileKind::power) {
                    throw ConfigError("profile: 'b' only applies to the power profile");
                }
                c.profile.power_exponent = get_number(p, "b", "profile");
            }
        }
        if (j.contains("functions")) {
            const auto& fs = j.at("functions");
            if (!fs.is_array()) {
                throw ConfigError("functions: expected an array");
            }
            for (const auto& f : fs) {
                c.functions.push_back(parse_function(f));
            }
        } else {
            // Constants with sum 1/p = 1.
            for (int i = 0; i < c.k; ++i) {
                c.functions.push_back(FunctionField::constant(1.0, static_cast<double>(c.k)));
            }
        }
        if (j.contains("epsilon_grid")) c.epsilon_grid = parse_grid(j.at("epsilon_grid"), "epsilon_grid");
        if (j.contains("radius_grid")) c.radius_grid = parse_grid(j.at("radius_grid"), "radius_grid");
        if (j.contains("mc_samples")) c.mc_samples = get_count(j, "mc_samples", "config");
        if (j.contains("eval_points")) c.eval_points = static_cast<int>(get_count(j, "eval_points", "config"));
        if (j.contains("eval_positions")) c.eval_positions = get_as<std::vector<double>>(j, "eval_positions", "config");
        if (j.contains("verify_trials")) c.verify_trials = get_count(j, "verify_trials", "config");
        if (j.contains("method")) c.method = parse_method(get_as<std::string>(j, "method", "config"));
        if (j.contains("output_prefix")) c.output_prefix = get_as<std::string>(j, "output_prefix", "config");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate_config(c);
    return c;
}

inline ExperimentConfig parse_config(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("JSON parse error at " + detail::locate(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// 64-bit FNV-1a of the canonical (sorted-key, compact) JSON form.
inline std::uint64_t config_hash(const ExperimentConfig& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : emit_config(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace hyperkernel
