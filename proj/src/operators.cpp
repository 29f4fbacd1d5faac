#include "dcflr/operators.hpp"

#include "dcflr/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace dcflr {

namespace {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

struct Decomposition {
    Eigen::VectorXd values; // descending
    Eigen::MatrixXd vectors;
};

Decomposition decompose(const Eigen::MatrixXd& sym) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    require(es.info() == Eigen::Success, Errc::numerical_failure, "symmetric eigensolver did not converge");
    // Eigen returns ascending order.
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

Eigen::MatrixXd recompose(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& values) {
    return symmetrized(vectors * values.asDiagonal() * vectors.transpose());
}

Eigen::VectorXd top_eigenvalues(const Eigen::MatrixXd& sym) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    require(es.info() == Eigen::Success, Errc::numerical_failure, "symmetric eigensolver did not converge");
    return es.eigenvalues().reverse();
}

} // namespace

DiscretizedOperator::DiscretizedOperator(GridPtr grid, Eigen::MatrixXd sym_matrix)
    : grid_(std::move(grid)), sym_(std::move(sym_matrix)) {
    require(grid_ != nullptr, Errc::invalid_argument, "operator without grid");
    require(sym_.rows() == grid_->size() && sym_.cols() == grid_->size(), Errc::grid_mismatch,
            "operator matrix does not match grid size");
}

DiscretizedOperator DiscretizedOperator::from_pointwise(GridPtr grid, const Eigen::MatrixXd& pointwise) {
    const Eigen::VectorXd sw = grid->weights().cwiseSqrt();
    Eigen::MatrixXd sym = sw.asDiagonal() * pointwise * sw.asDiagonal();
    return DiscretizedOperator(std::move(grid), symmetrized(sym));
}

GridFunction DiscretizedOperator::apply(const GridFunction& f) const {
    check_same_grid(*grid_, f.grid());
    const Eigen::VectorXd sw = grid_->weights().cwiseSqrt();
    Eigen::VectorXd v = sym_ * sw.cwiseProduct(f.values());
    return GridFunction(grid_, v.cwiseQuotient(sw));
}

double DiscretizedOperator::norm() const { return top_eigenvalues(sym_).cwiseAbs().maxCoeff(); }

EigenSystem::EigenSystem(const DiscretizedOperator& op) : grid_(op.grid_ptr()) {
    auto d = decompose(op.sym_matrix());
    const double top = std::max(d.values[0], 0.0);
    for (Eigen::Index k = 0; k < d.values.size(); ++k)
        if (d.values[k] < kRetention * top) d.values[k] = 0.0;
    values_ = std::move(d.values);
    vectors_ = std::move(d.vectors);
}

EigenSystem EigenSystem::from_eigenvalues(std::vector<double> eigenvalues) {
    for (double v : eigenvalues)
        require(std::isfinite(v) && v >= 0.0, Errc::invalid_argument, "eigenvalues must be finite and >= 0");
    std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
    EigenSystem s;
    s.values_ = Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(), static_cast<Eigen::Index>(eigenvalues.size()));
    const double top = eigenvalues.empty() ? 0.0 : eigenvalues.front();
    for (Eigen::Index k = 0; k < s.values_.size(); ++k)
        if (s.values_[k] < kRetention * top) s.values_[k] = 0.0;
    return s;
}

GridFunction EigenSystem::eigenfunction(int k) const {
    require(has_eigenfunctions(), Errc::method_unavailable, "eigen system carries no eigenfunctions");
    require(k >= 0 && k < values_.size(), Errc::invalid_argument, "eigenfunction index out of range");
    return GridFunction(grid_, vectors_.col(k).cwiseQuotient(grid_->weights().cwiseSqrt()));
}

int EigenSystem::rank() const noexcept { return static_cast<int>((values_.array() > 0.0).count()); }

DiscretizedOperator discretize_operator(const KernelSpec& spec, GridPtr grid) {
    const Eigen::MatrixXd a = gram_on_grid(spec, *grid).entries;
    return DiscretizedOperator::from_pointwise(std::move(grid), a);
}

DiscretizedOperator operator_sqrt(const DiscretizedOperator& op) {
    const auto d = decompose(op.sym_matrix());
    const Eigen::VectorXd roots = d.values.cwiseMax(0.0).cwiseSqrt();
    return DiscretizedOperator(op.grid_ptr(), recompose(d.vectors, roots));
}

Composites compose_T(const DiscretizedOperator& LK, const DiscretizedOperator& LC) {
    check_same_grid(LK.grid(), LC.grid());
    const Eigen::MatrixXd k_half = operator_sqrt(LK).sym_matrix();
    const Eigen::MatrixXd c_half = operator_sqrt(LC).sym_matrix();
    DiscretizedOperator t(LK.grid_ptr(), symmetrized(k_half * LC.sym_matrix() * k_half));
    DiscretizedOperator t_star(LK.grid_ptr(), symmetrized(c_half * LK.sym_matrix() * c_half));
    EigenSystem system(t);
    return {std::move(t), std::move(t_star), std::move(system)};
}

double effective_dimension(const EigenSystem& system, double lambda) {
    require(lambda > 0.0 && std::isfinite(lambda), Errc::invalid_argument, "lambda must be > 0");
    double sum = 0.0;
    for (double mu : system.eigenvalues()) sum += mu / (lambda + mu);
    return sum;
}

double trace_of(const EigenSystem& system) { return system.eigenvalues().sum(); }

DiscretizedOperator spectral_power(const EigenSystem& system, double r) {
    require(r > 0.0 && r <= 1.0, Errc::invalid_argument, "spectral power must lie in (0, 1]");
    require(system.has_eigenfunctions(), Errc::method_unavailable, "spectral power needs eigenvectors");
    const Eigen::VectorXd powered = system.eigenvalues().array().pow(r);
    return DiscretizedOperator(system.grid_ptr(), recompose(system.sym_vectors(), powered));
}

DominanceReport eigen_dominance_check(const DiscretizedOperator& LA, const DiscretizedOperator& LB, int k_max) {
    check_same_grid(LA.grid(), LB.grid());
    require(k_max >= 1 && k_max <= LA.size(), Errc::invalid_argument, "k_max out of range");
    const Eigen::MatrixXd a_half = operator_sqrt(LA).sym_matrix();
    const Eigen::VectorXd lhs = top_eigenvalues(symmetrized(a_half * LB.sym_matrix() * a_half));
    const Eigen::VectorXd b = top_eigenvalues(LB.sym_matrix());
    const double a_norm = top_eigenvalues(LA.sym_matrix()).cwiseMax(0.0).maxCoeff();
    DominanceReport report;
    const double slack = 1e-8 * std::max(b[0] * a_norm, 0.0);
    for (int k = 0; k < k_max; ++k) {
        report.lhs.push_back(lhs[k]);
        report.rhs.push_back(std::max(b[k], 0.0) * a_norm);
        if (report.lhs.back() > report.rhs.back() * (1.0 + 1e-8) + slack) report.holds = false;
    }
    return report;
}

void write_spectrum_csv(std::ostream& out, const EigenSystem& system) {
    out << "k,mu_k\n" << std::setprecision(17);
    for (Eigen::Index k = 0; k < system.eigenvalues().size(); ++k) out << k + 1 << ',' << system.eigenvalues()[k] << '\n';
}

} // namespace dcflr
