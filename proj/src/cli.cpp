#include "dcflr/cli.hpp"

#include "dcflr/error.hpp"
#include "dcflr/estimator.hpp"
#include "dcflr/experiments.hpp"
#include "dcflr/lowerbound.hpp"
#include "dcflr/operators.hpp"
#include "dcflr/risk.hpp"
#include "dcflr/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

namespace dcflr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Raised while reading or validating the configuration; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Invocation {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    bool check = false;

    std::optional<int> n;
    std::string data_path;
    std::optional<double> lambda;
    std::optional<int> m;
    std::string model_path;
    std::optional<int> mc_draws;
};

struct Loaded {
    json raw;
    ExperimentConfig config;
};

Loaded load_config(const Invocation& inv) {
    Loaded l;
    try {
        if (!inv.config_path.empty()) {
            std::ifstream in(inv.config_path);
            if (!in) throw ConfigError("cannot open config '" + inv.config_path + "'");
            l.raw = json::parse(in);
        } else {
            l.raw = json::object();
        }
        l.config = l.raw.get<ExperimentConfig>();
        if (inv.seed) l.config.seed = *inv.seed;
        validate(l.config);
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return l;
}

json section(const json& raw, const char* key) { return raw.value(key, json::object()); }

template <class T>
T setting(const json& sec, const char* key, T fallback) {
    try {
        return sec.value(key, fallback);
    } catch (const json::exception& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::invalid_argument, "cannot open '" + path.string() + "' for writing");
    return out;
}

fs::path prepare_out(const Invocation& inv) {
    fs::path dir(inv.out_dir);
    fs::create_directories(dir);
    return dir;
}

Scenario scenario_of(const ExperimentConfig& c) { return build_scenario(c.scenario, make_uniform_grid(c.grid_size)); }

int first_n(const Loaded& l, const Invocation& inv, const char* key) {
    if (inv.n) return *inv.n;
    return setting(section(l.raw, key), "N", l.config.N_list.front());
}

int cmd_generate(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const int n = first_n(l, inv, "generate");
    if (n < 1) throw ConfigError("N must be >= 1");
    const Scenario sc = scenario_of(l.config);
    const Dataset data = generate_dataset(l.config.scenario, sc.b0, n, l.config.seed);
    const fs::path dir = prepare_out(inv);
    save_dataset((dir / "dataset.csv").string(), data);
    auto spec_out = open_output(dir / "scenario.json");
    spec_out << json({{"scenario", l.config.scenario}, {"grid_size", l.config.grid_size}}).dump(2) << '\n';
    out << "wrote " << n << " samples to " << (dir / "dataset.csv").string() << '\n';
    return kExitOk;
}

int cmd_fit(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const json sec = section(l.raw, "fit");
    const Scenario sc = scenario_of(l.config);
    const Dataset data = inv.data_path.empty()
                             ? generate_dataset(l.config.scenario, sc.b0, first_n(l, inv, "fit"), l.config.seed)
                             : load_dataset(inv.data_path);
    const ScheduleParams sched = schedule_params(l.config.schedule, data.size(), l.config.scenario);
    const double lambda = inv.lambda ? *inv.lambda : setting(sec, "lambda", sched.lambda);
    const int m = inv.m ? *inv.m : setting(sec, "m", sched.m);
    DacOptions options{l.config.mode, l.config.seed, l.config.threads, false};
    const DacModel model = dac_fit(data, sc, lambda, m, options);
    const fs::path dir = prepare_out(inv);
    export_model((dir / "beta_hat.txt").string(), (dir / "model.json").string(), model, data.size());
    out << "fitted N=" << data.size() << " m=" << m << " lambda=" << lambda << '\n';
    return kExitOk;
}

int cmd_risk(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const json sec = section(l.raw, "risk");
    const fs::path model_path = inv.model_path.empty() ? fs::path(inv.out_dir) / "beta_hat.txt" : fs::path(inv.model_path);
    std::ifstream beta_in(model_path);
    require(static_cast<bool>(beta_in), Errc::invalid_argument, "cannot open model '" + model_path.string() + "'");
    const GridFunction beta = read_grid_function(beta_in);
    json sidecar = json::object();
    if (std::ifstream side(model_path.parent_path() / "model.json"); side) sidecar = json::parse(side);

    const Scenario sc = scenario_of(l.config);
    check_same_grid(beta.grid(), *sc.grid);
    const double lambda = sidecar.value("lambda", 1.0);
    const int m = sidecar.value("m", 1);
    const int n = m * sidecar.value("n_per_block", 0);
    const int draws = inv.mc_draws ? *inv.mc_draws : setting(sec, "mc_draws", 100000);

    RlsModel model{lambda, beta, std::nullopt, sc.basis.project(beta), std::nullopt, std::nullopt};
    model.f_coeffs = model.basis_coeffs->cwiseQuotient(sc.rho.cwiseSqrt());
    const fs::path dir = prepare_out(inv);
    auto csv = open_output(dir / "risk.csv");
    write_risk_csv_header(csv);
    for (RiskMethod method : {RiskMethod::spectral, RiskMethod::monte_carlo}) {
        const RiskReport report = excess_risk(model, sc, method, draws, l.config.seed);
        write_risk_csv_row(csv, n, m, lambda, l.config.scenario, report);
        out << to_string(method) << " excess risk " << std::setprecision(6) << report.excess_risk << '\n';
    }
    return kExitOk;
}

int cmd_rate_sweep(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const double tolerance = setting(section(l.raw, "check"), "slope_tolerance", 0.15);
    const SweepResult result = rate_sweep(l.config);
    write_sweep_outputs(result, l.config, prepare_out(inv).string());
    out << std::setprecision(6) << "slope " << result.fit.slope << " (theory " << result.fit.theoretical_exponent
        << ")\n";
    if (inv.check) {
        const bool pass = !result.fit.degenerate &&
                          std::abs(result.fit.slope - result.fit.theoretical_exponent) <= tolerance;
        out << (pass ? "check passed" : "check failed") << '\n';
        return pass ? kExitOk : kExitCheckFailed;
    }
    return kExitOk;
}

int cmd_lowerbound(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const json sec = section(l.raw, "lowerbound");
    const double a = setting(sec, "a", 256.0);
    const long long n = setting(sec, "N", 4096LL);
    const auto m_list = setting(sec, "M_list", std::vector<int>{8, 12, 16});
    const auto strategy = packing_strategy_from_string(setting(sec, "strategy", std::string("brute_force")));
    const int kl_draws = setting(sec, "kl_draws", 100000);
    const ExperimentConfig& c = l.config;
    if (c.scenario.sigma <= 0.0) throw ConfigError("lowerbound needs sigma > 0");

    const Scenario sc = scenario_of(c);
    const double p = c.scenario.p;
    const FanoCertificate t1 = theorem1_certificate(a, n, c.scenario.theta, p, c.scenario.sigma, [p](int k) {
        return std::pow(static_cast<double>(k), -1.0 / p);
    });
    bool all_ok = true;
    json families = json::array();
    for (int M : m_list) {
        const PackingSet packing = gv_packing(M, strategy, c.seed);
        const PackingCheck pc = check_packing(packing);
        const HypothesisFamily family = build_hypotheses(sc, packing);
        const HypothesisCheck hc = check_hypotheses(family, sc);
        const double kl = kl_gaussian(family.betas[0], family.betas[1], family.sigma, sc.lam);
        const double kl_mc = kl_monte_carlo(family.betas[0], family.betas[1], family.sigma, sc, kl_draws, c.seed);
        const bool kl_ok = std::abs(kl_mc - kl) <= 0.05 * kl;
        all_ok = all_ok && pc.ok() && hc.ok() && kl_ok;
        families.push_back({{"M", M},
                            {"size", packing.size()},
                            {"min_disagreement", pc.min_disagreement},
                            {"packing_ok", pc.ok()},
                            {"hypotheses_ok", hc.ok()},
                            {"kl_pair", kl},
                            {"kl_pair_monte_carlo", kl_mc},
                            {"certificate", to_json(family_certificate(family, packing.size(), n))}});
    }
    const json report = {{"theorem1", to_json(t1)}, {"a", a}, {"families", families}};
    auto file = open_output(prepare_out(inv) / "certificate.json");
    file << report.dump(2) << '\n';
    out << std::setprecision(6) << "certificate M=" << t1.M << " probability_bound=" << t1.probability_bound << '\n';
    if (inv.check) {
        out << (all_ok ? "check passed" : "check failed") << '\n';
        return all_ok ? kExitOk : kExitCheckFailed;
    }
    return kExitOk;
}

int cmd_effective_dim(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const json sec = section(l.raw, "effective_dim");
    const auto lambdas = setting(sec, "lambdas", std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1, 1.0});
    const Scenario sc = scenario_of(l.config);
    const EigenSystem& system = sc.composites.system;
    const EigenSystem analytic =
        EigenSystem::from_eigenvalues({sc.mu.data(), sc.mu.data() + sc.modes()});
    const fs::path dir = prepare_out(inv);
    {
        auto csv = open_output(dir / "spectrum.csv");
        write_spectrum_csv(csv, system);
    }
    auto csv = open_output(dir / "effdim.csv");
    csv << "lambda,effective_dimension,analytic,scaled\n" << std::setprecision(17);
    for (double lambda : lambdas) {
        const double eff = effective_dimension(system, lambda);
        csv << lambda << ',' << eff << ',' << effective_dimension(analytic, lambda) << ','
            << eff * std::pow(lambda, l.config.scenario.p) << '\n';
    }
    out << "trace " << std::setprecision(10) << trace_of(system) << '\n';
    return kExitOk;
}

int cmd_deviation(const Invocation& inv, std::ostream& out) {
    const Loaded l = load_config(inv);
    const json sec = section(l.raw, "deviation");
    const auto lambdas = setting(sec, "lambdas", std::vector<double>{0.1, 0.3, 1.0});
    const auto blocks = setting(sec, "n_blocks", std::vector<int>{32, 128, 512});
    const int trials = setting(sec, "trials", 2000);
    auto csv = open_output(prepare_out(inv) / "deviation.csv");
    csv << "lambda,n_block,trials,exceed,probability,std_error,effective_dimension,c1,bound\n" << std::setprecision(17);
    bool ok = true;
    for (double lambda : lambdas) {
        for (int nb : blocks) {
            const DeviationReport r = deviation_probability(l.config.scenario, lambda, nb, trials, l.config.seed);
            csv << r.lambda << ',' << r.n_block << ',' << r.trials << ',' << r.exceed << ',' << r.probability << ','
                << r.std_error << ',' << r.effective_dimension << ',' << r.c1 << ',' << r.bound << '\n';
            if (r.bound < 1.0 && r.probability > r.bound + 2.0 * r.std_error) ok = false;
        }
    }
    out << "deviation grid done\n";
    if (inv.check) {
        out << (ok ? "check passed" : "check failed") << '\n';
        return ok ? kExitOk : kExitCheckFailed;
    }
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Divide-and-conquer functional linear regression experiments", "dcflr"};
    app.require_subcommand(1);
    app.fallthrough();
    Invocation inv;
    app.add_option("--config", inv.config_path, "JSON configuration file");
    app.add_option("--seed", inv.seed, "Seed overriding the configuration");
    app.add_option("--out", inv.out_dir, "Output directory");
    app.add_flag("--check", inv.check, "Exit with code 3 when the built-in check fails");

    auto* gen = app.add_subcommand("generate", "Generate a dataset");
    gen->add_option("--n", inv.n, "Sample size");
    auto* fit = app.add_subcommand("fit", "Fit the divide-and-conquer estimator");
    fit->add_option("--data", inv.data_path, "Dataset file (generated from the config when omitted)");
    fit->add_option("--n", inv.n, "Sample size when generating");
    fit->add_option("--lambda", inv.lambda, "Regularization parameter");
    fit->add_option("--m", inv.m, "Number of blocks");
    auto* risk = app.add_subcommand("risk", "Excess risk of an exported model");
    risk->add_option("--model", inv.model_path, "beta_hat file written by fit");
    risk->add_option("--mc-draws", inv.mc_draws, "Monte Carlo draws");
    auto* sweep = app.add_subcommand("rate-sweep", "Convergence-rate sweep over N");
    auto* lower = app.add_subcommand("lowerbound", "Packing, hypotheses and Fano certificate");
    auto* eff = app.add_subcommand("effective-dim", "Spectrum and effective dimension");
    auto* dev = app.add_subcommand("deviation-prob", "Monte Carlo deviation probability");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalidConfig;
    }
    try {
        if (gen->parsed()) return cmd_generate(inv, out);
        if (fit->parsed()) return cmd_fit(inv, out);
        if (risk->parsed()) return cmd_risk(inv, out);
        if (sweep->parsed()) return cmd_rate_sweep(inv, out);
        if (lower->parsed()) return cmd_lowerbound(inv, out);
        if (eff->parsed()) return cmd_effective_dim(inv, out);
        if (dev->parsed()) return cmd_deviation(inv, out);
    } catch (const ConfigError& e) {
        err << "invalid config: " << e.what() << '\n';
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

} // namespace dcflr
