#pragma once

#include "dcflr/grid.hpp"
#include "dcflr/kernels.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <vector>

namespace dcflr {

/// Integral operator (A f)(t_i) = sum_j w_j k(t_i, t_j) f(t_j), stored in the
/// symmetric form W^{1/2} A W^{1/2}.
class DiscretizedOperator {
public:
    /// Wraps an already symmetrized matrix.
    DiscretizedOperator(GridPtr grid, Eigen::MatrixXd sym_matrix);

    /// Builds the symmetric form from pointwise kernel values A.
    static DiscretizedOperator from_pointwise(GridPtr grid, const Eigen::MatrixXd& pointwise);

    const Grid& grid() const noexcept { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const Eigen::MatrixXd& sym_matrix() const noexcept { return sym_; }
    int size() const noexcept { return static_cast<int>(sym_.rows()); }

    GridFunction apply(const GridFunction& f) const;
    /// Largest eigenvalue magnitude.
    double norm() const;

private:
    GridPtr grid_;
    Eigen::MatrixXd sym_;
};

/// Descending spectrum with W-orthonormal eigenfunctions. Eigenvalues below
/// 1e-12 times the largest are stored as zero.
class EigenSystem {
public:
    static constexpr double kRetention = 1e-12;

    explicit EigenSystem(const DiscretizedOperator& op);
    /// Spectrum only; eigenfunctions are unavailable.
    static EigenSystem from_eigenvalues(std::vector<double> eigenvalues);

    const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
    bool has_eigenfunctions() const noexcept { return grid_ != nullptr; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    /// Unit Euclidean eigenvectors of the symmetric form, one per column.
    const Eigen::MatrixXd& sym_vectors() const noexcept { return vectors_; }
    GridFunction eigenfunction(int k) const;
    /// Number of nonzero retained eigenvalues.
    int rank() const noexcept;

private:
    EigenSystem() = default;

    GridPtr grid_;
    Eigen::VectorXd values_;
    Eigen::MatrixXd vectors_;
};

DiscretizedOperator discretize_operator(const KernelSpec& spec, GridPtr grid);

/// Symmetric square root with negative eigenvalues clamped to zero.
DiscretizedOperator operator_sqrt(const DiscretizedOperator& op);

struct Composites {
    DiscretizedOperator T;
    DiscretizedOperator T_star;
    EigenSystem system;
};

/// T = LK^{1/2} LC LK^{1/2}, T_* = LC^{1/2} LK LC^{1/2} and the spectrum of T.
Composites compose_T(const DiscretizedOperator& LK, const DiscretizedOperator& LC);

double effective_dimension(const EigenSystem& system, double lambda);
double trace_of(const EigenSystem& system);

/// Recomposes the operator with eigenvalues raised to r in (0, 1].
DiscretizedOperator spectral_power(const EigenSystem& system, double r);

struct DominanceReport {
    bool holds = true;
    std::vector<double> lhs; // rho_k(A^{1/2} B A^{1/2})
    std::vector<double> rhs; // rho_k(B) ||A||
};

/// Checks rho_k(A^{1/2} B A^{1/2}) <= rho_k(B) ||A|| for k = 1..k_max.
DominanceReport eigen_dominance_check(const DiscretizedOperator& LA, const DiscretizedOperator& LB, int k_max);

/// CSV with header `k,mu_k`.
void write_spectrum_csv(std::ostream& out, const EigenSystem& system);

} // namespace dcflr
