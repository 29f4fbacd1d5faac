#pragma once

#include "dcflr/estimator.hpp"
#include "dcflr/operators.hpp"
#include "dcflr/synth.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace dcflr {

enum class RiskMethod { spectral, monte_carlo };

std::string to_string(RiskMethod method);

struct RiskReport {
    double excess_risk = 0.0;
    double approx_error = 0.0;
    double sample_error = 0.0;
    RiskMethod method = RiskMethod::spectral;
    int mc_draws = 0;
};

/// Basis coefficients of f_lambda: mu^{theta + 1/2} g / (lambda + mu).
Eigen::VectorXd f_lambda_coeffs(const Scenario& scenario, double lambda);

/// f_lambda = (lambda I + T)^{-1} L_K^{1/2} L_C beta0, solved in the retained
/// eigenframe of T on the grid.
GridFunction compute_f_lambda(const GridFunction& beta0, const DiscretizedOperator& LK, const DiscretizedOperator& LC,
                              const EigenSystem& system_T, double lambda);

/// sum_k lambda^2 mu_k^{2 theta} g_k^2 / (lambda + mu_k)^2, pairing g_k with the
/// k-th largest eigenvalue.
double approximation_error(double lambda, double theta, const Eigen::VectorXd& gamma0, const EigenSystem& system);

/// sum_k lambda_k (b_k - b0_k)^2.
double excess_risk_spectral(const Eigen::VectorXd& b_hat, const Scenario& scenario);

/// Mean of <X, beta_hat - beta0>^2 over fresh draws. Draws are indexed from
/// a stream family separate from dataset generation.
double excess_risk_monte_carlo(const Eigen::VectorXd& b_hat, const Scenario& scenario, int draws, std::uint64_t seed);

/// ||L_C^{1/2}(beta_hat - beta0)||^2 by quadrature against the discretized L_C.
double quadrature_risk(const GridFunction& beta_hat, const GridFunction& beta0, const DiscretizedOperator& LC);

/// sum_k mu_k (f_k - f_lambda_k)^2.
double sample_error(const RlsModel& model, const Eigen::VectorXd& f_lambda, const Scenario& scenario);

/// ||L_C^{1/2} L_K^{1/2} (f_bar - f_lambda)||^2 on the grid, as <d, T d>.
double sample_error(const GridFunction& f_bar, const GridFunction& f_lambda, const DiscretizedOperator& T);

/// Full report for a model fitted in the scenario basis. Monte Carlo uses
/// the model's basis coefficients, or projects beta_hat when they are absent.
RiskReport excess_risk(const RlsModel& model, const Scenario& scenario, RiskMethod method, int mc_draws = 100000,
                       std::uint64_t seed = 0);

/// Fourth-moment constant used in bound reports: 3 for Gaussian, 9/5 for
/// the uniform design.
double kurtosis_constant(Design design);

struct DeviationReport {
    double lambda = 0.0;
    int n_block = 0;
    int trials = 0;
    int exceed = 0;
    double probability = 0.0;
    double std_error = 0.0;
    double effective_dimension = 0.0;
    double c1 = 0.0;
    double bound = 0.0; // 4 c1 N(lambda)^2 / n_block
};

/// Fraction of trials with ||(lambda + T)^{-1/2} (T_X - T) (lambda + T)^{-1/2}|| >= 1/2.
DeviationReport deviation_probability(const ScenarioSpec& spec, double lambda, int n_block, int trials,
                                      std::uint64_t seed);

void write_risk_csv_header(std::ostream& out);
void write_risk_csv_row(std::ostream& out, int N, int m, double lambda, const ScenarioSpec& spec,
                        const RiskReport& report);

} // namespace dcflr
