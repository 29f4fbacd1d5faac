#pragma once

#include "dcflr/grid.hpp"
#include "dcflr/kernels.hpp"
#include "dcflr/operators.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dcflr {

enum class Design { gaussian, bounded_uniform };

std::string to_string(Design design);
Design design_from_string(const std::string& name);

/// Diagonal scenario: rho_k = k^-omega_exp, lambda_k = k^-tau_exp over the
/// cosine basis, so mu_k = k^-(omega_exp + tau_exp) = k^-1/p.
struct ScenarioSpec {
    double p = 0.5;
    double omega_exp = 0.75;
    double tau_exp = 1.25;
    double theta = 0.5;
    Eigen::VectorXd gamma0;
    double sigma = 0.5;
    Design design = Design::gaussian;
    int truncation = 200;
};

/// g_k proportional to k^-0.51, unit norm.
Eigen::VectorXd default_gamma0(int count);

/// Default exponent split for a given p: 1/(2p) each when that exceeds 1,
/// otherwise omega at the middle of (1/2, 1/p - 1).
std::pair<double, double> default_split(double p);

ScenarioSpec make_scenario_spec(double p, double theta, double sigma, Design design, int truncation = 200);

void validate(const ScenarioSpec& spec);

void to_json(nlohmann::json& j, const ScenarioSpec& spec);
void from_json(const nlohmann::json& j, ScenarioSpec& spec);

/// Everything derived from a ScenarioSpec on a grid. The diagonal-frame
/// vectors are indexed by k - 1.
struct Scenario {
    ScenarioSpec spec;
    GridPtr grid;
    CosineBasis basis;
    Eigen::VectorXd rho;
    Eigen::VectorXd lam;
    Eigen::VectorXd mu;
    Eigen::VectorXd gamma0; // padded or cut to the truncation
    Eigen::VectorXd b0;
    GridFunction beta0;
    DiscretizedOperator LK;
    DiscretizedOperator LC;
    Composites composites;

    int modes() const noexcept { return spec.truncation; }
    SpectralDecay kernel_K() const { return {spec.omega_exp, spec.truncation, false}; }
    SpectralDecay kernel_C() const { return {spec.tau_exp, spec.truncation, false}; }
};

Scenario build_scenario(const ScenarioSpec& spec, GridPtr grid);

/// Standardized scores zeta (n x M): unit variance, Gaussian or uniform on
/// [-sqrt 3, sqrt 3]. Row i uses its own stream derived from (seed, first_index + i).
Eigen::MatrixXd sample_scores(const ScenarioSpec& spec, int n, std::uint64_t seed, std::uint64_t first_index = 0);

/// Basis coefficients of X: sqrt(lambda_k) zeta_k.
Eigen::MatrixXd sample_coefficients(const ScenarioSpec& spec, int n, std::uint64_t seed,
                                    std::uint64_t first_index = 0);

/// The same draws synthesized on the grid.
std::vector<GridFunction> sample_X(const Scenario& scenario, int n, std::uint64_t seed);

struct DatasetMeta {
    std::uint64_t seed = 0;
    double sigma = 0.0;
    Design design = Design::gaussian;
    nlohmann::json scenario;
};

/// N samples in basis coordinates.
struct Dataset {
    Eigen::MatrixXd X; // N x M
    Eigen::VectorXd y;
    DatasetMeta meta;

    int size() const noexcept { return static_cast<int>(y.size()); }
};

/// Y_i = <X_i, beta0> + sigma eps_i with Gaussian eps. b0 holds the basis
/// coefficients of beta0.
Dataset generate_dataset(const ScenarioSpec& spec, const Eigen::VectorXd& b0, int N, std::uint64_t seed);

/// Samples stored as grid values.
struct GridDataset {
    GridPtr grid;
    Eigen::MatrixXd X; // N x G
    Eigen::VectorXd y;

    int size() const noexcept { return static_cast<int>(y.size()); }
    std::vector<GridFunction> samples() const;
};

GridDataset to_grid(const Dataset& data, const CosineBasis& basis);

/// JSON meta line, then CSV `i,y,c_1,...,c_M` at 17 significant digits.
void save_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);

} // namespace dcflr
