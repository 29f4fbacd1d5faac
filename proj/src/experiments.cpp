#include "dcflr/experiments.hpp"

#include "dcflr/error.hpp"
#include "dcflr/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>

namespace dcflr {

namespace {

constexpr double kRiskFloor = 1e-20;

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::invalid_argument, "cannot open '" + path.string() + "' for writing");
    return out;
}

} // namespace

std::string to_string(ScheduleKind kind) {
    switch (kind) {
    case ScheduleKind::T2a: return "T2a";
    case ScheduleKind::T2b_log: return "T2b_log";
    case ScheduleKind::T5_noiseless: return "T5_noiseless";
    case ScheduleKind::T6: return "T6";
    case ScheduleKind::custom: return "custom";
    }
    return "unknown";
}

ScheduleKind schedule_kind_from_string(const std::string& name) {
    for (auto kind : {ScheduleKind::T2a, ScheduleKind::T2b_log, ScheduleKind::T5_noiseless, ScheduleKind::T6,
                      ScheduleKind::custom})
        if (name == to_string(kind)) return kind;
    fail(Errc::parse_error, "unknown schedule '" + name + "'");
}

void validate(const ExperimentConfig& c) {
    validate(c.scenario);
    require(!c.N_list.empty(), Errc::invalid_argument, "N_list is empty");
    for (std::size_t i = 0; i < c.N_list.size(); ++i) {
        require(c.N_list[i] >= 1, Errc::invalid_argument, "N_list entries must be >= 1");
        require(i == 0 || c.N_list[i] > c.N_list[i - 1], Errc::invalid_argument, "N_list must be increasing");
    }
    require(c.replicates >= 1, Errc::invalid_argument, "replicates must be >= 1");
    require(c.threads >= 1, Errc::invalid_argument, "threads must be >= 1");
    require(c.schedule.delta >= 0.0, Errc::invalid_argument, "delta must be >= 0");
    if (c.schedule.kind == ScheduleKind::T5_noiseless)
        require(c.schedule.eta > 0.0 && c.schedule.eta <= 0.5, Errc::invalid_argument, "eta must lie in (0, 1/2]");
    if (c.schedule.kind == ScheduleKind::T6)
        require(c.schedule.t > 0.0 && c.schedule.t <= 1.0, Errc::invalid_argument, "t must lie in (0, 1]");
    if (c.schedule.kind == ScheduleKind::T2b_log)
        require(c.schedule.r > 0.0, Errc::invalid_argument, "r must be > 0");
    if (c.schedule.kind == ScheduleKind::custom)
        require(c.schedule.scale > 0.0 && c.schedule.m >= 1, Errc::invalid_argument, "custom schedule needs scale > 0, m >= 1");
    for (int n : c.N_list) {
        const int m = schedule_params(c.schedule, n, c.scenario).m;
        require(n % m == 0, Errc::invalid_argument, "scheduled m = " + std::to_string(m) + " does not divide N = " +
                                                        std::to_string(n));
    }
}

void to_json(nlohmann::json& j, const Schedule& s) {
    j = {{"kind", to_string(s.kind)}, {"delta", s.delta}};
    switch (s.kind) {
    case ScheduleKind::T5_noiseless: j["eta"] = s.eta; break;
    case ScheduleKind::T2b_log: j["r"] = s.r; break;
    case ScheduleKind::T6: j["t"] = s.t; break;
    case ScheduleKind::custom:
        j["scale"] = s.scale;
        j["exponent"] = s.exponent;
        j["m"] = s.m;
        break;
    case ScheduleKind::T2a: break;
    }
    if (s.fixed_m) j["fixed_m"] = *s.fixed_m;
}

void from_json(const nlohmann::json& j, Schedule& s) {
    s = Schedule{};
    s.kind = schedule_kind_from_string(j.at("kind").get<std::string>());
    s.delta = j.value("delta", s.delta);
    s.eta = j.value("eta", s.eta);
    s.r = j.value("r", s.r);
    s.t = j.value("t", s.t);
    s.scale = j.value("scale", s.scale);
    s.exponent = j.value("exponent", s.exponent);
    s.m = j.value("m", s.m);
    if (j.contains("fixed_m")) s.fixed_m = j["fixed_m"].get<int>();
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"scenario", c.scenario},   {"grid_size", c.grid_size}, {"N_list", c.N_list},
         {"replicates", c.replicates}, {"schedule", c.schedule},   {"seed", c.seed},
         {"mode", to_string(c.mode)}, {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    c.scenario = j.value("scenario", nlohmann::json::object()).get<ScenarioSpec>();
    c.grid_size = j.value("grid_size", c.grid_size);
    c.N_list = j.value("N_list", c.N_list);
    c.replicates = j.value("replicates", c.replicates);
    if (j.contains("schedule")) c.schedule = j["schedule"].get<Schedule>();
    c.seed = j.value("seed", c.seed);
    c.mode = fit_mode_from_string(j.value("mode", std::string("operator")));
    c.threads = j.value("threads", c.threads);
}

int largest_divisor_at_most(int n, double cap) {
    require(n >= 1, Errc::invalid_argument, "n must be >= 1");
    const int limit = cap >= n ? n : static_cast<int>(std::floor(cap));
    for (int d = limit; d >= 2; --d)
        if (n % d == 0) return d;
    return 1;
}

ScheduleParams schedule_params(const Schedule& s, int N, const ScenarioSpec& sc) {
    require(N >= 1, Errc::invalid_argument, "N must be >= 1");
    const double n = static_cast<double>(N);
    const double log_n = std::log(n);
    const double theta = sc.theta;
    const double p = sc.p;
    ScheduleParams out;
    switch (s.kind) {
    case ScheduleKind::T2a:
        out.lambda = std::pow(n, -1.0 / (2.0 * theta + p));
        out.m_cap = std::pow(n, (2.0 * theta - p) / (4.0 * theta + 2.0 * p) - s.delta);
        break;
    case ScheduleKind::T2b_log:
        out.lambda = std::pow(n, -1.0 / (2.0 * p)) * std::pow(log_n, 3.0 * s.r / (2.0 * p));
        out.m_cap = std::pow(log_n, s.r);
        break;
    case ScheduleKind::T5_noiseless:
        out.lambda = std::pow(n, -(1.0 - 2.0 * s.eta) / (2.0 * p));
        out.m_cap = std::pow(n, s.eta - s.delta);
        break;
    case ScheduleKind::T6:
        out.lambda = std::pow(n, -1.0 / (2.0 * theta + p));
        out.m_cap = std::pow(n, (2.0 * theta + p - s.t) / (2.0 * theta + p) - s.delta) / log_n;
        break;
    case ScheduleKind::custom:
        out.lambda = s.scale * std::pow(n, -s.exponent);
        out.m_cap = s.m;
        break;
    }
    if (s.fixed_m) {
        out.m_cap = *s.fixed_m;
        out.m = *s.fixed_m;
    } else if (s.kind == ScheduleKind::custom) {
        out.m = s.m;
    } else {
        out.m = largest_divisor_at_most(N, out.m_cap);
    }
    return out;
}

double theoretical_exponent(const Schedule& s, const ScenarioSpec& sc) {
    switch (s.kind) {
    case ScheduleKind::T5_noiseless: return -sc.theta * (1.0 - 2.0 * s.eta) / sc.p;
    case ScheduleKind::T2b_log: return -sc.theta / sc.p;
    default: return -2.0 * sc.theta / (2.0 * sc.theta + sc.p);
    }
}

RateFitResult slope_fit(const std::vector<std::pair<double, double>>& points) {
    require(points.size() >= 4, Errc::insufficient_data, "slope fit needs at least 4 points");
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            require(points[i].first != points[j].first, Errc::insufficient_data, "slope fit needs distinct abscissae");
    RateFitResult fit;
    fit.points = points;
    for (const auto& [x, y] : points) {
        if (!std::isfinite(x) || !std::isfinite(y)) fit.degenerate = true;
    }
    if (fit.degenerate) {
        fit.slope = fit.intercept = fit.stderr_ = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (const auto& [x, y] : points) {
        const double e = y - fit.intercept - fit.slope * x;
        ssr += e * e;
    }
    fit.stderr_ = std::sqrt(ssr / (n - 2.0) / sxx);
    return fit;
}

SweepResult rate_sweep(const ExperimentConfig& config) {
    validate(config);
    const Scenario scenario = build_scenario(config.scenario, make_uniform_grid(config.grid_size));
    return rate_sweep(config, scenario);
}

SweepResult rate_sweep(const ExperimentConfig& config, const Scenario& scenario) {
    validate(config);
    SweepResult result;
    std::vector<std::pair<double, double>> points;
    bool floor_hit = false;
    for (int N : config.N_list) {
        const ScheduleParams params = schedule_params(config.schedule, N, config.scenario);
        double sum = 0.0;
        for (int rep = 0; rep < config.replicates; ++rep) {
            const std::uint64_t cell = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(N)),
                                                   static_cast<std::uint64_t>(rep));
            const Dataset data = generate_dataset(config.scenario, scenario.b0, N, cell);
            DacOptions options{config.mode, derive_seed(cell, 1), config.threads, false};
            const DacModel model = dac_fit(data, scenario, params.lambda, params.m, options);
            const RiskReport report = excess_risk(model.averaged, scenario, RiskMethod::spectral);
            result.rows.push_back({N, rep, params, report});
            sum += report.excess_risk;
        }
        const double mean = sum / config.replicates;
        result.N_list.push_back(N);
        result.mean_risk.push_back(mean);
        result.params.push_back(params);
        if (!(mean > kRiskFloor) || !std::isfinite(mean)) floor_hit = true;
        points.emplace_back(std::log10(static_cast<double>(N)), std::log10(mean));
    }
    if (points.size() >= 4) {
        result.fit = slope_fit(points);
    } else {
        result.fit.points = points;
        result.fit.slope = result.fit.intercept = result.fit.stderr_ = std::numeric_limits<double>::quiet_NaN();
    }
    if (floor_hit) {
        result.fit.degenerate = true;
        result.fit.slope = result.fit.intercept = result.fit.stderr_ = std::numeric_limits<double>::quiet_NaN();
    }
    result.fit.theoretical_exponent = theoretical_exponent(config.schedule, config.scenario);
    return result;
}

void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& config, const std::string& dir) {
    const std::filesystem::path base(dir);
    std::filesystem::create_directories(base);
    {
        auto out = open_output(base / "results.csv");
        out << "N,m,lambda,theta,p,sigma,excess_risk,approx_error,sample_error,method,replicate,schedule,m_cap\n";
        out << std::setprecision(17);
        for (const auto& row : result.rows) {
            out << row.N << ',' << row.params.m << ',' << row.params.lambda << ',' << config.scenario.theta << ','
                << config.scenario.p << ',' << config.scenario.sigma << ',' << row.report.excess_risk << ','
                << row.report.approx_error << ',' << row.report.sample_error << ',' << to_string(row.report.method)
                << ',' << row.replicate << ',' << to_string(config.schedule.kind) << ',' << row.params.m_cap << '\n';
        }
    }
    {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [x, y] : result.fit.points) pts.push_back({number_or_null(x), number_or_null(y)});
        nlohmann::json per_n = nlohmann::json::array();
        for (std::size_t i = 0; i < result.N_list.size(); ++i)
            per_n.push_back({{"N", result.N_list[i]},
                             {"m", result.params[i].m},
                             {"lambda", result.params[i].lambda},
                             {"mean_risk", result.mean_risk[i]}});
        const nlohmann::json j = {{"slope", number_or_null(result.fit.slope)},
                                  {"intercept", number_or_null(result.fit.intercept)},
                                  {"stderr", number_or_null(result.fit.stderr_)},
                                  {"theoretical_exponent", result.fit.theoretical_exponent},
                                  {"degenerate", result.fit.degenerate},
                                  {"points", pts},
                                  {"per_N", per_n},
                                  {"replicates", config.replicates},
                                  {"schedule", config.schedule},
                                  {"seed", config.seed},
                                  {"note", "finite-N slope is a proxy for the asymptotic rate"}};
        auto out = open_output(base / "ratefit.json");
        out << j.dump(2) << '\n';
    }
    {
        auto out = open_output(base / "plotdata.csv");
        out << "log10_N,log10_risk\n" << std::setprecision(17);
        for (const auto& [x, y] : result.fit.points) out << x << ',' << y << '\n';
    }
}

Theorem4Terms theorem4_terms(const ScenarioSpec& sc, double lambda, int m, int N) {
    require(sc.design == Design::bounded_uniform, Errc::assumption_violated,
            "the expectation bound needs bounded scores; Gaussian design has none");
    require(lambda > 0.0 && lambda <= 1.0, Errc::invalid_argument, "the bound needs 0 < lambda <= 1");
    require(N >= 1 && m >= 1, Errc::invalid_argument, "N and m must be >= 1");
    validate(sc);
    std::vector<double> mu(sc.truncation);
    for (int k = 1; k <= sc.truncation; ++k) mu[k - 1] = std::pow(static_cast<double>(k), -1.0 / sc.p);
    const EigenSystem system = EigenSystem::from_eigenvalues(mu);
    const double eff = effective_dimension(system, lambda);
    const double trace = trace_of(system);
    const double mu1 = system.eigenvalues()[0];
    const double g2 = sc.gamma0.head(std::min<Eigen::Index>(sc.gamma0.size(), sc.truncation)).squaredNorm();
    const double s2 = sc.sigma * sc.sigma;
    const double n = static_cast<double>(N);
    const double md = static_cast<double>(m);

    Theorem4Terms t;
    t.c1 = 3.0;
    t.rho = std::numbers::sqrt3;
    const double rho2 = t.rho * t.rho;
    t.c3 = 192.0 * (t.c1 * rho2 * rho2 * trace * trace * g2 * g2 + std::max(mu1 * mu1, 1.0) * g2 * g2);
    const double inner = 4.0 * rho2 + 4.0 * rho2 / 3.0;
    t.c4 = std::pow(1.0 + 6.0 * inner * inner, 0.25);
    t.c5 = 3.0 / (32.0 * rho2);

    const double l2t = std::pow(lambda, 2.0 * sc.theta);
    t.approximation = 2.0 * l2t * g2;
    t.variance = 16.0 * eff / n * (t.c1 * l2t * g2 + s2);
    t.partition = 8.0 * t.c1 * md / n * eff * l2t * g2;
    const double tail = (1.0 + md * eff / n) * std::sqrt(eff) * std::exp(-t.c5 * n / (2.0 * md * eff));
    t.tail_signal = t.c3 * t.c4 * mu1 * (4.0 + 2.0 * md) / (n * std::pow(lambda, 2.0 - 2.0 * sc.theta)) * tail;
    t.tail_noise = t.c4 * mu1 * rho2 * trace * 4.0 * s2 / (n * lambda * lambda) * tail;
    return t;
}

double theorem4_rhs(const ScenarioSpec& sc, double lambda, int m, int N) {
    return theorem4_terms(sc, lambda, m, N).total();
}

} // namespace dcflr
