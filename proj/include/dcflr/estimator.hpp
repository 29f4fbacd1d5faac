#pragma once

#include "dcflr/grid.hpp"
#include "dcflr/kernels.hpp"
#include "dcflr/operators.hpp"
#include "dcflr/synth.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dcflr {

/// One regularized least-squares solution.
struct RlsModel {
    double lambda = 0.0;
    GridFunction beta_hat;
    std::optional<Eigen::VectorXd> representer_coeffs; // c, gram form only
    std::optional<Eigen::VectorXd> basis_coeffs;       // beta_hat in the scenario basis
    std::optional<Eigen::VectorXd> f_coeffs;           // f_hat in the scenario basis
    std::optional<GridFunction> f_hat;                 // f_hat on the grid, grid operator form only
};

struct DacModel {
    int m = 1;
    std::uint64_t seed = 0;
    std::vector<RlsModel> locals;
    RlsModel averaged; // mean of the locals, no representer coefficients
    std::vector<int> permutation;
};

enum class FitMode { gram, operator_form };

std::string to_string(FitMode mode);
FitMode fit_mode_from_string(const std::string& name);

// Grid routes: samples stored as grid values, any kernel.

/// Solves (lambda N I + K_X) c = Y and sets beta_hat = sum_i c_i L_K X_i.
RlsModel rls_fit_gram(const GridDataset& data, const KernelSpec& kernel, double lambda);

/// Solves (lambda I + T_X) f = (1/N) sum_i L_K^{1/2} X_i Y_i on the grid and
/// sets beta_hat = L_K^{1/2} f. `LK_sqrt` is operator_sqrt(L_K).
RlsModel rls_fit_operator(const GridDataset& data, const DiscretizedOperator& LK_sqrt, double lambda);

// Basis routes: samples stored as scenario-basis coefficients.

RlsModel rls_fit_gram(const Dataset& data, const Scenario& scenario, double lambda);
RlsModel rls_fit_operator(const Dataset& data, const Scenario& scenario, double lambda);

struct DacOptions {
    FitMode mode = FitMode::operator_form;
    std::uint64_t seed = 0;
    int threads = 1;
    bool keep_locals = true;
};

/// Seeded shuffle, m contiguous blocks, independent local fits, averaged in
/// block order. m = 1 skips the shuffle and returns the global fit.
DacModel dac_fit(const Dataset& data, const Scenario& scenario, double lambda, int m, const DacOptions& options);
DacModel dac_fit(const GridDataset& data, const KernelSpec& kernel, const DiscretizedOperator& LK_sqrt, double lambda,
                 int m, const DacOptions& options);

/// Throws invalid-partition unless 1 <= m <= n and m divides n.
void check_partition(int n, int m);

/// Permutation of 0..n-1 drawn from the seed; identity for m = 1.
std::vector<int> partition_order(int n, int m, std::uint64_t seed);

double predict(const RlsModel& model, const GridFunction& x);
double predict(const DacModel& model, const GridFunction& x);

/// beta_hat in grid-function text format plus a JSON sidecar
/// {lambda, m, n_per_block, seed}.
void export_model(const std::string& beta_path, const std::string& sidecar_path, const DacModel& model, int n_total);

} // namespace dcflr
