#include "dcflr/synth.hpp"

#include "dcflr/error.hpp"
#include "dcflr/rng.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace dcflr {

std::string to_string(Design design) { return design == Design::gaussian ? "gaussian" : "bounded_uniform"; }

Design design_from_string(const std::string& name) {
    if (name == "gaussian") return Design::gaussian;
    if (name == "bounded_uniform") return Design::bounded_uniform;
    fail(Errc::parse_error, "unknown design '" + name + "'");
}

Eigen::VectorXd default_gamma0(int count) {
    require(count >= 1, Errc::invalid_argument, "gamma0 needs at least one coefficient");
    Eigen::VectorXd g(count);
    for (int k = 1; k <= count; ++k) g[k - 1] = std::pow(static_cast<double>(k), -0.51);
    return g / g.norm();
}

std::pair<double, double> default_split(double p) {
    const double total = 1.0 / p;
    if (total / 2.0 > 1.0) return {total / 2.0, total / 2.0};
    const double omega = 0.5 * (0.5 + (total - 1.0));
    return {omega, total - omega};
}

ScenarioSpec make_scenario_spec(double p, double theta, double sigma, Design design, int truncation) {
    ScenarioSpec spec;
    spec.p = p;
    std::tie(spec.omega_exp, spec.tau_exp) = default_split(p);
    spec.theta = theta;
    spec.sigma = sigma;
    spec.design = design;
    spec.truncation = truncation;
    spec.gamma0 = default_gamma0(truncation);
    validate(spec);
    return spec;
}

void validate(const ScenarioSpec& s) {
    require(s.p > 0.0 && s.p <= 1.0, Errc::invalid_argument, "p must lie in (0, 1]");
    require(s.theta > 0.0 && s.theta <= 0.5, Errc::invalid_argument, "theta must lie in (0, 1/2]");
    require(s.tau_exp > 1.0, Errc::invalid_argument, "tau_exp must exceed 1");
    require(s.omega_exp > 0.5, Errc::invalid_argument, "omega_exp must exceed 1/2");
    require(std::abs(s.omega_exp + s.tau_exp - 1.0 / s.p) <= 1e-9 / s.p, Errc::invalid_argument,
            "omega_exp + tau_exp must equal 1/p");
    require(s.sigma >= 0.0 && std::isfinite(s.sigma), Errc::invalid_argument, "sigma must be >= 0");
    require(s.truncation >= 1, Errc::invalid_argument, "truncation must be >= 1");
    require(s.gamma0.size() >= 1 && s.gamma0.allFinite(), Errc::invalid_argument, "gamma0 must be finite and nonempty");
}

void to_json(nlohmann::json& j, const ScenarioSpec& s) {
    j = {{"p", s.p},
         {"omega_exp", s.omega_exp},
         {"tau_exp", s.tau_exp},
         {"theta", s.theta},
         {"gamma0", std::vector<double>(s.gamma0.data(), s.gamma0.data() + s.gamma0.size())},
         {"sigma", s.sigma},
         {"design", to_string(s.design)},
         {"truncation", s.truncation}};
}

void from_json(const nlohmann::json& j, ScenarioSpec& s) {
    s.p = j.value("p", 0.5);
    s.truncation = j.value("truncation", 200);
    const auto split = default_split(s.p);
    s.omega_exp = j.value("omega_exp", j.contains("tau_exp") ? 1.0 / s.p - j["tau_exp"].get<double>() : split.first);
    s.tau_exp = j.value("tau_exp", 1.0 / s.p - s.omega_exp);
    s.theta = j.value("theta", 0.5);
    s.sigma = j.value("sigma", 0.5);
    s.design = design_from_string(j.value("design", std::string("gaussian")));
    if (j.contains("gamma0")) {
        const auto g = j["gamma0"].get<std::vector<double>>();
        s.gamma0 = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    } else {
        s.gamma0 = default_gamma0(s.truncation);
    }
    validate(s);
}

Scenario build_scenario(const ScenarioSpec& spec, GridPtr grid) {
    validate(spec);
    const int m = spec.truncation;
    require(m < grid->size(), Errc::invalid_argument, "truncation must stay below the grid size");
    Eigen::VectorXd rho(m), lam(m), g = Eigen::VectorXd::Zero(m);
    for (int k = 1; k <= m; ++k) {
        rho[k - 1] = std::pow(static_cast<double>(k), -spec.omega_exp);
        lam[k - 1] = std::pow(static_cast<double>(k), -spec.tau_exp);
    }
    for (Eigen::Index k = 0; k < spec.gamma0.size(); ++k) {
        if (k < m) {
            g[k] = spec.gamma0[k];
        } else {
            require(spec.gamma0[k] == 0.0, Errc::source_condition_unsatisfiable,
                    "gamma0 has weight on mode " + std::to_string(k + 1) + " where L_C vanishes");
        }
    }
    const Eigen::VectorXd mu = rho.cwiseProduct(lam);
    Eigen::VectorXd b0(m);
    for (int k = 0; k < m; ++k) {
        require(lam[k] > 0.0 || g[k] == 0.0, Errc::source_condition_unsatisfiable, "lambda_k vanishes");
        b0[k] = g[k] == 0.0 ? 0.0 : std::pow(mu[k], spec.theta) / std::sqrt(lam[k]) * g[k];
    }
    CosineBasis basis(grid, m);
    GridFunction beta0 = basis.synthesize(b0);
    DiscretizedOperator lk = discretize_operator(SpectralDecay{spec.omega_exp, m, false}, grid);
    DiscretizedOperator lc = discretize_operator(SpectralDecay{spec.tau_exp, m, false}, grid);
    Composites comp = compose_T(lk, lc);
    return Scenario{spec,          grid,           std::move(basis), std::move(rho), std::move(lam),
                    mu,            std::move(g),   std::move(b0),    std::move(beta0), std::move(lk),
                    std::move(lc), std::move(comp)};
}

namespace {

// Draws the M scores of one sample and, when noise is requested, one N(0,1)
// noise value from the same stream afterwards.
void draw_sample(const ScenarioSpec& spec, Engine& engine, double* zeta, double* noise) {
    const int m = spec.truncation;
    if (spec.design == Design::gaussian) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int k = 0; k < m; ++k) zeta[k] = normal(engine);
        if (noise) *noise = normal(engine);
    } else {
        std::uniform_real_distribution<double> uniform(-std::numbers::sqrt3, std::numbers::sqrt3);
        for (int k = 0; k < m; ++k) zeta[k] = uniform(engine);
        if (noise) *noise = std::normal_distribution<double>(0.0, 1.0)(engine);
    }
}

} // namespace

Eigen::MatrixXd sample_scores(const ScenarioSpec& spec, int n, std::uint64_t seed, std::uint64_t first_index) {
    require(n >= 1, Errc::invalid_argument, "sample size must be >= 1");
    // Row-major so each sample's scores are contiguous.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(n, spec.truncation);
    for (int i = 0; i < n; ++i) {
        Engine engine = make_engine(seed, first_index + static_cast<std::uint64_t>(i));
        draw_sample(spec, engine, z.row(i).data(), nullptr);
    }
    return z;
}

Eigen::MatrixXd sample_coefficients(const ScenarioSpec& spec, int n, std::uint64_t seed, std::uint64_t first_index) {
    Eigen::VectorXd sd(spec.truncation);
    for (int k = 1; k <= spec.truncation; ++k) sd[k - 1] = std::pow(static_cast<double>(k), -0.5 * spec.tau_exp);
    return sample_scores(spec, n, seed, first_index) * sd.asDiagonal();
}

std::vector<GridFunction> sample_X(const Scenario& scenario, int n, std::uint64_t seed) {
    const Eigen::MatrixXd coeffs = sample_coefficients(scenario.spec, n, seed);
    const Eigen::MatrixXd values = coeffs * scenario.basis.values().transpose();
    std::vector<GridFunction> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.emplace_back(scenario.grid, values.row(i).transpose());
    return out;
}

Dataset generate_dataset(const ScenarioSpec& spec, const Eigen::VectorXd& b0, int N, std::uint64_t seed) {
    require(N >= 1, Errc::invalid_argument, "dataset size must be >= 1");
    require(b0.size() == spec.truncation, Errc::invalid_argument, "beta0 coefficients do not match the truncation");
    const int m = spec.truncation;
    Eigen::VectorXd sd(m);
    for (int k = 1; k <= m; ++k) sd[k - 1] = std::pow(static_cast<double>(k), -0.5 * spec.tau_exp);

    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(N, m);
    Eigen::VectorXd eps(N);
    for (int i = 0; i < N; ++i) {
        Engine engine = make_engine(seed, static_cast<std::uint64_t>(i));
        draw_sample(spec, engine, z.row(i).data(), &eps[i]);
    }
    Dataset d;
    d.X = z * sd.asDiagonal();
    d.y = d.X * b0;
    if (spec.sigma > 0.0) d.y += spec.sigma * eps;
    d.meta.seed = seed;
    d.meta.sigma = spec.sigma;
    d.meta.design = spec.design;
    d.meta.scenario = spec;
    return d;
}

std::vector<GridFunction> GridDataset::samples() const {
    std::vector<GridFunction> out;
    out.reserve(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.emplace_back(grid, X.row(i).transpose());
    return out;
}

GridDataset to_grid(const Dataset& data, const CosineBasis& basis) {
    require(data.X.cols() == basis.count(), Errc::invalid_argument, "dataset width differs from basis size");
    return GridDataset{basis.grid_ptr(), data.X * basis.values().transpose(), data.y};
}

void save_dataset(std::ostream& out, const Dataset& data) {
    require(data.size() >= 1, Errc::invalid_argument, "refusing to save an empty dataset");
    require(data.X.rows() == data.size(), Errc::invalid_argument, "dataset rows and responses disagree");
    nlohmann::json meta = {{"seed", data.meta.seed},
                           {"sigma", data.meta.sigma},
                           {"design", to_string(data.meta.design)},
                           {"N", data.size()},
                           {"M", data.X.cols()},
                           {"scenario", data.meta.scenario}};
    out << meta.dump() << '\n';
    out << "i,y";
    for (Eigen::Index k = 1; k <= data.X.cols(); ++k) out << ",c_" << k;
    out << '\n' << std::setprecision(17);
    for (int i = 0; i < data.size(); ++i) {
        out << i << ',' << data.y[i];
        for (Eigen::Index k = 0; k < data.X.cols(); ++k) out << ',' << data.X(i, k);
        out << '\n';
    }
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    require(static_cast<bool>(out), Errc::invalid_argument, "cannot open '" + path + "' for writing");
    save_dataset(out, data);
}

namespace {

double parse_double(const std::string& field, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        fail(Errc::parse_error, where + ": bad number '" + field + "'");
    }
    require(used == field.size() && std::isfinite(v), Errc::parse_error, where + ": bad number '" + field + "'");
    return v;
}

} // namespace

Dataset load_dataset(std::istream& in) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, "line 1: missing meta header");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse_error, std::string("line 1: ") + e.what());
    }
    Dataset d;
    int n = 0, m = 0;
    try {
        n = meta.at("N").get<int>();
        m = meta.at("M").get<int>();
        d.meta.seed = meta.at("seed").get<std::uint64_t>();
        d.meta.sigma = meta.at("sigma").get<double>();
        d.meta.design = design_from_string(meta.at("design").get<std::string>());
        d.meta.scenario = meta.value("scenario", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::parse_error, std::string("line 1: ") + e.what());
    }
    require(n >= 1 && m >= 1, Errc::parse_error, "line 1: N and M must be >= 1");
    require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, "line 2: missing column header");
    require(line.rfind("i,y", 0) == 0, Errc::parse_error, "line 2: expected header starting with 'i,y'");

    d.X.resize(n, m);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const std::string where = "line " + std::to_string(i + 3);
        require(static_cast<bool>(std::getline(in, line)), Errc::parse_error, where + ": unexpected end of file");
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        require(static_cast<int>(fields.size()) == m + 2, Errc::parse_error,
                where + ": expected " + std::to_string(m + 2) + " fields, got " + std::to_string(fields.size()));
        require(parse_double(fields[0], where) == i, Errc::parse_error, where + ": row index out of sequence");
        d.y[i] = parse_double(fields[1], where);
        for (int k = 0; k < m; ++k) d.X(i, k) = parse_double(fields[k + 2], where);
    }
    return d;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::invalid_argument, "cannot open '" + path + "'");
    return load_dataset(in);
}

} // namespace dcflr
