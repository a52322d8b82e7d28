// hyperkernel: run verification experiments from a JSON config.
//
//   hyperkernel <verify|ratios|domination|convergence|constants> --config FILE
//               [--out DIR] [--seed N] [--jobs N] [--verbose]
//
// Exit status: 0 all checks pass, 1 an inequality was violated, 2 usage or
// configuration error.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <hyperkernel/hyperkernel.hpp>

namespace {

using namespace hyperkernel;

constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const ExperimentConfig& cfg)
{
    if (flag) {
        return *flag;
    }
    if (cfg.seed) {
        return *cfg.seed;
    }
    if (const char* env = std::getenv("HYPERKERNEL_SEED")) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') {
            throw ConfigError(std::string("HYPERKERNEL_SEED is not an unsigned integer: '") + env + "'");
        }
        return v;
    }
    return 0;
}

void print_constants(std::ostream& os, const TheoremConstants& t)
{
    os << "lambda0       = " << format_double(t.lambda0) << '\n'
       << "C1            = " << format_double(t.C1) << '\n'
       << "C2            = " << format_double(t.C2) << '\n'
       << "A_tilde       = " << format_double(t.A_tilde) << '\n'
       << "C_domination  = " << format_double(t.C_domination) << '\n'
       << "prop33_bound  = " << format_double(t.prop33_bound) << '\n';
}

Report constants_report(const ExperimentConfig& cfg, const RunOptions& opt, TheoremConstants& out)
{
    return std::visit(
        [&](const auto& s) {
            Report rep;
            rep.kind = cfg.experiment;
            rep.space = s.name();
            rep.header = {"name", "value"};
            rep.config_hash = config_hash(cfg);
            rep.seed = opt.seed;
            const auto gc = detail::effective_constants(s);
            out = detail::constants_for(gc, cfg.k);
            const std::pair<const char*, double> fields[] = {
                {"lambda0", out.lambda0}, {"C1", out.C1}, {"C2", out.C2}, {"A_tilde", out.A_tilde},
                {"C_domination", out.C_domination}, {"prop33_bound", out.prop33_bound}};
            for (const auto& [name, value] : fields) {
                rep.rows.push_back({name, format_double(value)});
            }
            rep.summary["constants"] = detail::constants_json(out);
            rep.summary["kappa"] = gc.kappa;
            rep.summary["doubling_A"] = gc.doubling_A;
            rep.summary["ahlfors"] = {{"alpha", gc.ahlfors->alpha}, {"gamma", gc.ahlfors->gamma}, {"Gamma", gc.ahlfors->Gamma}};
            return rep;
        },
        make_space(cfg.space));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hypermetric kernels and multilinear maximal operators: numerical checks"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool verbose = false;

    const char* names[] = {"verify", "ratios", "domination", "convergence", "constants"};
    const char* help[] = {"run the invariant suite", "section-measure and normalizer ratio tables",
                          "Phi* <= C M and M <= bound * prod Mf per point", "identity-approximation error along eps",
                          "print the explicit constants"};
    for (int i = 0; i < 5; ++i) {
        auto* sub = app.add_subcommand(names[i], help[i]);
        sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed override (else config seed, else HYPERKERNEL_SEED, else 0)");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1u, 1024u));
        sub->add_flag("--verbose", verbose, "print the summary JSON");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        ExperimentConfig cfg = load_config(config_path);
        RunOptions opt;
        opt.jobs = jobs;
        opt.seed = resolve_seed(seed, cfg);

        Report rep;
        if (sub == "constants") {
            TheoremConstants t;
            rep = constants_report(cfg, opt, t);
            print_constants(std::cout, t);
        } else {
            cfg.experiment = detail::parse_experiment_kind(sub);
            validate_config(cfg);
            rep = run_experiment(cfg, cfg.experiment, opt);
        }

        std::filesystem::create_directories(out_dir);
        const auto base = std::filesystem::path(out_dir) / cfg.output_prefix;
        write_text(base.string() + "_" + sub + ".csv", to_csv(rep));
        write_text(base.string() + "_summary.json", summary_json(rep).dump(2) + "\n");

        if (verbose) {
            std::cout << summary_json(rep).dump(2) << '\n';
        }
        if (sub != "constants") {
            std::cout << sub << " on " << rep.space << ": " << rep.rows.size() << " rows, " << rep.violations
                      << " violations -> " << (rep.passed() ? "PASS" : "FAIL") << '\n';
        }
        return rep.passed() ? 0 : kExitViolation;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
    } catch (const AdmissibilityError& e) {
        std::cerr << "admissibility error: " << e.what() << '\n';
    } catch (const CapExceeded& e) {
        std::cerr << "enumeration cap exceeded: " << e.what() << '\n';
    } catch (const ResolutionError& e) {
        std::cerr << "resolution error: " << e.what() << '\n';
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "output error: " << e.what() << '\n';
    } catch (const std::runtime_error& e) {
        std::cerr << "output error: " << e.what() << '\n';
    }
    return kExitUsage;
}
