#include "dcflr/kernels.hpp"

#include "dcflr/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <string>

namespace dcflr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_unit_interval(double x) {
    require(x >= 0.0 && x <= 1.0, Errc::invalid_argument, "kernel argument " + std::to_string(x) + " outside [0, 1]");
}

int first_spectral_mode(const SpectralDecay& spec) { return spec.include_constant ? 0 : 1; }

Eigen::VectorXd spectral_weights(const SpectralDecay& spec) {
    const int first = first_spectral_mode(spec);
    Eigen::VectorXd w(spec.truncation + 1 - first);
    for (int k = first; k <= spec.truncation; ++k) w[k - first] = spectral_weight(spec, k);
    return w;
}

void symmetrize_upper(Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = j + 1; i < m.rows(); ++i) m(i, j) = m(j, i);
}

Eigen::MatrixXd stack_samples(const std::vector<GridFunction>& samples) {
    require(!samples.empty(), Errc::invalid_argument, "functional gram needs at least one sample");
    const Grid& grid = samples.front().grid();
    Eigen::MatrixXd x(samples.size(), grid.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        check_same_grid(grid, samples[i].grid());
        x.row(static_cast<Eigen::Index>(i)) = samples[i].values().transpose();
    }
    return x;
}

} // namespace

void validate(const KernelSpec& spec) {
    std::visit(overloaded{
                   [](const Brownian&) {},
                   [](const SquaredExponential& k) {
                       require(k.gamma > 0.0 && std::isfinite(k.gamma), Errc::invalid_argument, "gamma must be > 0");
                   },
                   [](const SpectralDecay& k) {
                       require(k.exponent > 0.5 && std::isfinite(k.exponent), Errc::invalid_argument,
                               "spectral exponent must exceed 1/2");
                       require(k.truncation >= 1, Errc::invalid_argument, "truncation must be >= 1");
                   },
               },
               spec);
}

double spectral_weight(const SpectralDecay& spec, int k) {
    if (k == 0) return spec.include_constant ? 1.0 : 0.0;
    return std::pow(static_cast<double>(k), -spec.exponent);
}

double cosine_mode(int k, double t) {
    if (k == 0) return 1.0;
    return std::numbers::sqrt2 * std::cos(k * std::numbers::pi * t);
}

Eigen::MatrixXd cosine_mode_matrix(const Grid& grid, int count, int first_mode) {
    require(count >= 1 && first_mode >= 0, Errc::invalid_argument, "cosine basis needs count >= 1");
    const int g = grid.size();
    const long period = 2L * (g - 1);
    Eigen::MatrixXd values(g, count);
    for (int j = 0; j < count; ++j) {
        const long k = first_mode + j;
        for (int i = 0; i < g; ++i) {
            if (k == 0) {
                values(i, j) = 1.0;
                continue;
            }
            // Reduce k*i modulo the period so every grid value is an exact DCT-I node.
            const long r = (k * i) % period;
            values(i, j) = std::numbers::sqrt2 * std::cos(std::numbers::pi * static_cast<double>(r) / (g - 1));
        }
    }
    return values;
}

CosineBasis::CosineBasis(GridPtr grid, int count, int first_mode)
    : grid_(std::move(grid)), first_mode_(first_mode), values_(cosine_mode_matrix(*grid_, count, first_mode)) {}

Eigen::VectorXd CosineBasis::project(const GridFunction& f) const {
    check_same_grid(*grid_, f.grid());
    return values_.transpose() * grid_->weights().cwiseProduct(f.values());
}

Eigen::MatrixXd CosineBasis::project_rows(const Eigen::MatrixXd& samples) const {
    require(samples.cols() == grid_->size(), Errc::grid_mismatch, "sample width differs from grid size");
    return samples * grid_->weights().asDiagonal() * values_;
}

GridFunction CosineBasis::synthesize(const Eigen::VectorXd& coeffs) const {
    require(coeffs.size() == count(), Errc::invalid_argument, "coefficient count differs from basis size");
    return GridFunction(grid_, values_ * coeffs);
}

double eval_kernel(const KernelSpec& spec, double s, double t) {
    require_unit_interval(s);
    require_unit_interval(t);
    return std::visit(overloaded{
                          [&](const Brownian&) { return std::min(s, t); },
                          [&](const SquaredExponential& k) {
                              const double d = (s - t) / k.gamma;
                              return std::exp(-d * d);
                          },
                          [&](const SpectralDecay& k) {
                              double sum = 0.0;
                              for (int m = first_spectral_mode(k); m <= k.truncation; ++m)
                                  sum += spectral_weight(k, m) * (cosine_mode(m, s) * cosine_mode(m, t));
                              return sum;
                          },
                      },
                      spec);
}

GramMatrix gram_on_grid(const KernelSpec& spec, const Grid& grid) {
    validate(spec);
    const int g = grid.size();
    const auto& t = grid.points();
    Eigen::MatrixXd a(g, g);
    if (const auto* k = std::get_if<SpectralDecay>(&spec)) {
        // Low-rank assembly; the pointwise sum gives the same values up to rounding.
        const Eigen::MatrixXd phi = cosine_mode_matrix(grid, k->truncation + 1 - first_spectral_mode(*k),
                                                       first_spectral_mode(*k));
        a.noalias() = phi * spectral_weights(*k).asDiagonal() * phi.transpose();
        symmetrize_upper(a);
        return {std::move(a), GramRole::pointwise};
    }
    for (int j = 0; j < g; ++j)
        for (int i = 0; i <= j; ++i) a(i, j) = a(j, i) = eval_kernel(spec, t[i], t[j]);
    return {std::move(a), GramRole::pointwise};
}

GramMatrix functional_gram(const Eigen::MatrixXd& samples, const Grid& grid, const KernelSpec& spec) {
    require(samples.rows() >= 1, Errc::invalid_argument, "functional gram needs at least one sample");
    require(samples.cols() == grid.size(), Errc::grid_mismatch, "sample width differs from grid size");
    const Eigen::MatrixXd a = gram_on_grid(spec, grid).entries;
    const Eigen::MatrixXd xw = samples * grid.weights().asDiagonal();
    Eigen::MatrixXd k = xw * a * xw.transpose();
    symmetrize_upper(k);
    return {std::move(k), GramRole::functional};
}

GramMatrix functional_gram(const std::vector<GridFunction>& samples, const KernelSpec& spec) {
    const Eigen::MatrixXd x = stack_samples(samples);
    return functional_gram(x, samples.front().grid(), spec);
}

GramMatrix functional_gram_spectral(const std::vector<GridFunction>& samples, const SpectralDecay& spec) {
    validate(spec);
    const Eigen::MatrixXd x = stack_samples(samples);
    const CosineBasis basis(samples.front().grid_ptr(), spec.truncation + 1 - first_spectral_mode(spec),
                            first_spectral_mode(spec));
    const Eigen::MatrixXd coeffs = basis.project_rows(x);
    Eigen::MatrixXd k = coeffs * spectral_weights(spec).asDiagonal() * coeffs.transpose();
    symmetrize_upper(k);
    return {std::move(k), GramRole::functional};
}

double min_eigen_ratio(const Eigen::MatrixXd& sym) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    return scale == 0.0 ? 0.0 : ev.minCoeff() / scale;
}

void to_json(nlohmann::json& j, const KernelSpec& spec) {
    std::visit(overloaded{
                   [&](const Brownian&) { j = {{"kind", "brownian"}}; },
                   [&](const SquaredExponential& k) { j = {{"kind", "sqexp"}, {"gamma", k.gamma}}; },
                   [&](const SpectralDecay& k) {
                       j = {{"kind", "spectral"},
                            {"exponent", k.exponent},
                            {"truncation", k.truncation},
                            {"include_constant", k.include_constant}};
                   },
               },
               spec);
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "brownian") {
        spec = Brownian{};
    } else if (kind == "sqexp") {
        spec = SquaredExponential{j.at("gamma").get<double>()};
    } else if (kind == "spectral") {
        SpectralDecay k;
        k.exponent = j.at("exponent").get<double>();
        k.truncation = j.value("truncation", 200);
        k.include_constant = j.value("include_constant", false);
        spec = k;
    } else {
        fail(Errc::parse_error, "unknown kernel kind '" + kind + "'");
    }
    validate(spec);
}

} // namespace dcflr
