#pragma once

#include "dcflr/grid.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <variant>
#include <vector>

namespace dcflr {

struct Brownian {};

struct SquaredExponential {
    double gamma = 1.0;
};

/// K(s,t) = sum_{k=1}^{truncation} k^-exponent phi_k(s) phi_k(t) over the
/// cosine basis, plus phi_0 = 1 with weight 1 when include_constant is set.
struct SpectralDecay {
    double exponent = 2.0;
    int truncation = 200;
    bool include_constant = false;
};

using KernelSpec = std::variant<Brownian, SquaredExponential, SpectralDecay>;

/// Throws invalid-argument on gamma <= 0, exponent <= 1/2 or truncation < 1.
void validate(const KernelSpec& spec);

/// Eigenvalue attached to cosine mode k (k = 0 is the constant mode).
double spectral_weight(const SpectralDecay& spec, int k);

/// phi_k(t) = sqrt(2) cos(k pi t) for k >= 1, phi_0 = 1.
double cosine_mode(int k, double t);

/// G x count matrix of cosine modes first_mode, first_mode + 1, ... on the grid.
Eigen::MatrixXd cosine_mode_matrix(const Grid& grid, int count, int first_mode = 1);

/// Cosine modes sampled on a grid. Column j holds mode first_mode + j.
/// On a uniform trapezoid grid of size G the modes are exactly orthonormal
/// as long as j + k < 2 (G - 1).
class CosineBasis {
public:
    CosineBasis(GridPtr grid, int count, int first_mode = 1);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    int count() const noexcept { return static_cast<int>(values_.cols()); }
    int first_mode() const noexcept { return first_mode_; }
    /// G x count matrix of mode values.
    const Eigen::MatrixXd& values() const noexcept { return values_; }

    /// Quadrature coefficients <f, phi_k> for every mode.
    Eigen::VectorXd project(const GridFunction& f) const;
    /// Rows of `samples` (n x G) projected onto the modes (n x count).
    Eigen::MatrixXd project_rows(const Eigen::MatrixXd& samples) const;
    /// sum_k coeffs[k] phi_k.
    GridFunction synthesize(const Eigen::VectorXd& coeffs) const;

private:
    GridPtr grid_;
    int first_mode_;
    Eigen::MatrixXd values_;
};

enum class GramRole { pointwise, functional };

struct GramMatrix {
    Eigen::MatrixXd entries;
    GramRole role = GramRole::pointwise;
};

/// Throws invalid-argument unless s and t lie in [0, 1].
double eval_kernel(const KernelSpec& spec, double s, double t);

/// K(t_i, t_j) over the grid; exactly symmetric.
GramMatrix gram_on_grid(const KernelSpec& spec, const Grid& grid);

/// Entries int int X_i(s) K(s,t) X_j(t) ds dt by quadrature.
GramMatrix functional_gram(const std::vector<GridFunction>& samples, const KernelSpec& spec);
/// Same, with the samples stacked as rows of an n x G matrix.
GramMatrix functional_gram(const Eigen::MatrixXd& samples, const Grid& grid, const KernelSpec& spec);

/// Spectral route for SpectralDecay kernels:
/// sum_k rho_k <X_i, phi_k> <X_j, phi_k>.
GramMatrix functional_gram_spectral(const std::vector<GridFunction>& samples, const SpectralDecay& spec);

/// Smallest eigenvalue divided by the largest in magnitude (0 for a zero matrix).
double min_eigen_ratio(const Eigen::MatrixXd& sym);

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);

} // namespace dcflr
