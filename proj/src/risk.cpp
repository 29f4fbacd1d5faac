#include "dcflr/risk.hpp"

#include "dcflr/error.hpp"
#include "dcflr/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <ostream>

namespace dcflr {

namespace {

constexpr std::uint64_t kMonteCarloStream = 0x6d6f6e746563ULL;
constexpr std::uint64_t kDeviationStream = 0x646576696174ULL;

void check_lambda(double lambda) {
    require(lambda > 0.0 && std::isfinite(lambda), Errc::invalid_argument, "lambda must be > 0");
}

} // namespace

std::string to_string(RiskMethod method) { return method == RiskMethod::spectral ? "spectral" : "monte_carlo"; }

Eigen::VectorXd f_lambda_coeffs(const Scenario& scenario, double lambda) {
    check_lambda(lambda);
    const double theta = scenario.spec.theta;
    Eigen::VectorXd f(scenario.modes());
    for (int k = 0; k < scenario.modes(); ++k) {
        const double mu = scenario.mu[k];
        f[k] = std::pow(mu, theta + 0.5) * scenario.gamma0[k] / (lambda + mu);
    }
    return f;
}

GridFunction compute_f_lambda(const GridFunction& beta0, const DiscretizedOperator& LK, const DiscretizedOperator& LC,
                              const EigenSystem& system_T, double lambda) {
    check_lambda(lambda);
    check_same_grid(beta0.grid(), LK.grid());
    check_same_grid(beta0.grid(), LC.grid());
    require(system_T.has_eigenfunctions(), Errc::method_unavailable, "f_lambda needs the eigenvectors of T");
    const Eigen::VectorXd sw = beta0.grid().weights().cwiseSqrt();
    const Eigen::MatrixXd k_half = operator_sqrt(LK).sym_matrix();
    const Eigen::VectorXd rhs = k_half * (LC.sym_matrix() * sw.cwiseProduct(beta0.values()));
    const Eigen::MatrixXd& v = system_T.sym_vectors();
    const Eigen::VectorXd scaled = (v.transpose() * rhs).cwiseQuotient((system_T.eigenvalues().array() + lambda).matrix());
    const Eigen::VectorXd f = v * scaled;
    return GridFunction(beta0.grid_ptr(), f.cwiseQuotient(sw));
}

double approximation_error(double lambda, double theta, const Eigen::VectorXd& gamma0, const EigenSystem& system) {
    check_lambda(lambda);
    require(theta > 0.0 && theta <= 0.5, Errc::invalid_argument, "theta must lie in (0, 1/2]");
    const auto& mu = system.eigenvalues();
    double sum = 0.0;
    const Eigen::Index n = std::min<Eigen::Index>(gamma0.size(), mu.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        if (mu[k] <= 0.0 || gamma0[k] == 0.0) continue;
        const double ratio = lambda / (lambda + mu[k]);
        sum += ratio * ratio * std::pow(mu[k], 2.0 * theta) * gamma0[k] * gamma0[k];
    }
    return sum;
}

double excess_risk_spectral(const Eigen::VectorXd& b_hat, const Scenario& scenario) {
    require(b_hat.size() == scenario.modes(), Errc::invalid_argument, "coefficient count differs from the scenario");
    return (b_hat - scenario.b0).array().square().matrix().dot(scenario.lam);
}

double excess_risk_monte_carlo(const Eigen::VectorXd& b_hat, const Scenario& scenario, int draws, std::uint64_t seed) {
    require(draws >= 1, Errc::invalid_argument, "Monte Carlo needs at least one draw");
    require(b_hat.size() == scenario.modes(), Errc::invalid_argument, "coefficient count differs from the scenario");
    const Eigen::VectorXd d = b_hat - scenario.b0;
    const std::uint64_t stream = derive_seed(seed, kMonteCarloStream);
    constexpr int chunk = 4096;
    double sum = 0.0;
    for (int start = 0; start < draws; start += chunk) {
        const int n = std::min(chunk, draws - start);
        const Eigen::MatrixXd x = sample_coefficients(scenario.spec, n, stream, static_cast<std::uint64_t>(start));
        sum += (x * d).squaredNorm();
    }
    return sum / draws;
}

double quadrature_risk(const GridFunction& beta_hat, const GridFunction& beta0, const DiscretizedOperator& LC) {
    check_same_grid(beta_hat.grid(), beta0.grid());
    check_same_grid(beta_hat.grid(), LC.grid());
    const Eigen::VectorXd d = beta_hat.grid().weights().cwiseSqrt().cwiseProduct(beta_hat.values() - beta0.values());
    return std::max(0.0, d.dot(LC.sym_matrix() * d));
}

double sample_error(const RlsModel& model, const Eigen::VectorXd& f_lambda, const Scenario& scenario) {
    require(model.f_coeffs.has_value(), Errc::method_unavailable, "model carries no basis coefficients for f_hat");
    require(f_lambda.size() == scenario.modes(), Errc::invalid_argument, "f_lambda size differs from the scenario");
    return (*model.f_coeffs - f_lambda).array().square().matrix().dot(scenario.mu);
}

double sample_error(const GridFunction& f_bar, const GridFunction& f_lambda, const DiscretizedOperator& T) {
    check_same_grid(f_bar.grid(), f_lambda.grid());
    check_same_grid(f_bar.grid(), T.grid());
    const Eigen::VectorXd d = f_bar.grid().weights().cwiseSqrt().cwiseProduct(f_bar.values() - f_lambda.values());
    return std::max(0.0, d.dot(T.sym_matrix() * d));
}

RiskReport excess_risk(const RlsModel& model, const Scenario& scenario, RiskMethod method, int mc_draws,
                       std::uint64_t seed) {
    RiskReport report;
    report.method = method;
    const Eigen::VectorXd f_lambda = f_lambda_coeffs(scenario, model.lambda);
    const EigenSystem diagonal = EigenSystem::from_eigenvalues({scenario.mu.data(), scenario.mu.data() + scenario.modes()});
    report.approx_error = approximation_error(model.lambda, scenario.spec.theta, scenario.gamma0, diagonal);
    if (method == RiskMethod::spectral) {
        require(model.basis_coeffs.has_value(), Errc::method_unavailable,
                "spectral risk needs the model's basis coefficients");
        report.excess_risk = excess_risk_spectral(*model.basis_coeffs, scenario);
    } else {
        const Eigen::VectorXd b = model.basis_coeffs ? *model.basis_coeffs : scenario.basis.project(model.beta_hat);
        report.excess_risk = excess_risk_monte_carlo(b, scenario, mc_draws, seed);
        report.mc_draws = mc_draws;
    }
    if (model.f_coeffs) report.sample_error = sample_error(model, f_lambda, scenario);
    return report;
}

double kurtosis_constant(Design design) { return design == Design::gaussian ? 3.0 : 9.0 / 5.0; }

DeviationReport deviation_probability(const ScenarioSpec& spec, double lambda, int n_block, int trials,
                                      std::uint64_t seed) {
    check_lambda(lambda);
    require(n_block >= 1, Errc::invalid_argument, "block size must be >= 1");
    require(trials >= 100, Errc::invalid_argument, "deviation probability needs at least 100 trials");
    validate(spec);
    const int m = spec.truncation;
    Eigen::VectorXd mu(m);
    for (int k = 1; k <= m; ++k) mu[k - 1] = std::pow(static_cast<double>(k), -1.0 / spec.p);
    const Eigen::VectorXd w = (mu.array() / (mu.array() + lambda)).sqrt().matrix();

    DeviationReport report;
    report.lambda = lambda;
    report.n_block = n_block;
    report.trials = trials;
    report.effective_dimension = effective_dimension(EigenSystem::from_eigenvalues({mu.data(), mu.data() + m}), lambda);
    report.c1 = kurtosis_constant(spec.design);
    report.bound = 4.0 * report.c1 * report.effective_dimension * report.effective_dimension / n_block;

    const std::uint64_t stream = derive_seed(seed, kDeviationStream);
    Eigen::MatrixXd d(m, m);
    for (int trial = 0; trial < trials; ++trial) {
        // In the eigenbasis of T the coordinates of L_K^{1/2} X are sqrt(mu_k) zeta_k,
        // so the normalized deviation is W (Z^T Z / n - I) W with W = sqrt(mu / (lambda + mu)).
        const Eigen::MatrixXd z = sample_scores(spec, n_block, derive_seed(stream, static_cast<std::uint64_t>(trial)))
                                  * w.asDiagonal();
        d.setZero();
        d.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), 1.0 / n_block);
        d.diagonal() -= w.cwiseAbs2();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
        require(es.info() == Eigen::Success, Errc::numerical_failure, "eigensolver failed on deviation matrix");
        const double norm = std::max(-es.eigenvalues()[0], es.eigenvalues()[m - 1]);
        if (norm >= 0.5) ++report.exceed;
    }
    report.probability = static_cast<double>(report.exceed) / trials;
    report.std_error = std::sqrt(report.probability * (1.0 - report.probability) / trials);
    return report;
}

void write_risk_csv_header(std::ostream& out) {
    out << "N,m,lambda,theta,p,sigma,excess_risk,approx_error,sample_error,method\n";
}

void write_risk_csv_row(std::ostream& out, int N, int m, double lambda, const ScenarioSpec& spec,
                        const RiskReport& report) {
    out << std::setprecision(17) << N << ',' << m << ',' << lambda << ',' << spec.theta << ',' << spec.p << ','
        << spec.sigma << ',' << report.excess_risk << ',' << report.approx_error << ',' << report.sample_error << ','
        << to_string(report.method) << '\n';
}

} // namespace dcflr
