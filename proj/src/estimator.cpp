#include "dcflr/estimator.hpp"

#include "dcflr/error.hpp"
#include "dcflr/rng.hpp"

#include <Eigen/Cholesky>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <thread>

namespace dcflr {

std::string to_string(FitMode mode) { return mode == FitMode::gram ? "gram" : "operator"; }

FitMode fit_mode_from_string(const std::string& name) {
    if (name == "gram") return FitMode::gram;
    if (name == "operator") return FitMode::operator_form;
    fail(Errc::parse_error, "unknown fit mode '" + name + "'");
}

namespace {

void check_lambda(double lambda) {
    require(lambda > 0.0 && std::isfinite(lambda), Errc::invalid_argument, "lambda must be > 0");
}

// Cholesky solve of an SPD system with up to two refinement steps.
Eigen::VectorXd spd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    const Eigen::LLT<Eigen::MatrixXd> llt(a);
    require(llt.info() == Eigen::Success, Errc::numerical_failure, "regularized system is not positive definite");
    Eigen::VectorXd x = llt.solve(b);
    const double target = 1e-10 * b.norm();
    for (int step = 0; step < 2; ++step) {
        const Eigen::VectorXd r = b - a * x;
        if (r.norm() <= target) break;
        x += llt.solve(r);
    }
    return x;
}

// Lower triangle of (Z^T Z) / n + lambda I, which is all LLT reads.
Eigen::MatrixXd regularized_cross(const Eigen::MatrixXd& z, double lambda) {
    const Eigen::Index d = z.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    a.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose(), 1.0 / static_cast<double>(z.rows()));
    a.diagonal().array() += lambda;
    return a.selfadjointView<Eigen::Lower>();
}

void check_dataset(const Dataset& data, const Scenario& scenario) {
    require(data.size() >= 1, Errc::invalid_argument, "dataset is empty");
    require(data.X.cols() == scenario.modes(), Errc::invalid_argument, "dataset width differs from the scenario basis");
}

void check_dataset(const GridDataset& data) {
    require(data.size() >= 1, Errc::invalid_argument, "dataset is empty");
    require(data.grid && data.X.cols() == data.grid->size(), Errc::grid_mismatch, "dataset width differs from grid");
    require(data.X.rows() == data.size(), Errc::invalid_argument, "dataset rows and responses disagree");
}

RlsModel average(const std::vector<RlsModel>& locals) {
    const double m = static_cast<double>(locals.size());
    const RlsModel& first = locals.front();
    Eigen::VectorXd beta = first.beta_hat.values();
    std::optional<Eigen::VectorXd> basis = first.basis_coeffs;
    std::optional<Eigen::VectorXd> f = first.f_coeffs;
    std::optional<Eigen::VectorXd> f_grid;
    if (first.f_hat) f_grid = first.f_hat->values();
    for (std::size_t j = 1; j < locals.size(); ++j) {
        beta += locals[j].beta_hat.values();
        if (basis) *basis += *locals[j].basis_coeffs;
        if (f) *f += *locals[j].f_coeffs;
        if (f_grid) *f_grid += locals[j].f_hat->values();
    }
    RlsModel out{first.lambda, GridFunction(first.beta_hat.grid_ptr(), beta / m), std::nullopt, std::nullopt,
                 std::nullopt, std::nullopt};
    if (basis) out.basis_coeffs = *basis / m;
    if (f) out.f_coeffs = *f / m;
    if (f_grid) out.f_hat = GridFunction(first.beta_hat.grid_ptr(), *f_grid / m);
    return out;
}

// Runs fit(j) for every block, possibly on several threads, and averages in block order.
DacModel run_blocks(int n, int m, const DacOptions& options, const std::function<RlsModel(const std::vector<int>&)>& fit) {
    check_partition(n, m);
    std::vector<int> permutation = partition_order(n, m, options.seed);
    const int block = n / m;
    std::vector<std::optional<RlsModel>> slots(m);
    auto run = [&](int j) {
        std::vector<int> idx(permutation.begin() + j * block, permutation.begin() + (j + 1) * block);
        slots[j] = fit(idx);
    };
    const int threads = std::clamp(options.threads, 1, m);
    if (threads == 1) {
        for (int j = 0; j < m; ++j) run(j);
    } else {
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int j = next++; j < m; j = next++) run(j);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::vector<RlsModel> locals;
    locals.reserve(m);
    for (auto& s : slots) locals.push_back(std::move(*s));
    RlsModel averaged = average(locals);
    if (!options.keep_locals) locals.clear();
    return DacModel{m, options.seed, std::move(locals), std::move(averaged), std::move(permutation)};
}

template <class Rows>
Eigen::MatrixXd gather_rows(const Rows& x, const std::vector<int>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& y, const std::vector<int>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[idx[i]];
    return out;
}

} // namespace

RlsModel rls_fit_gram(const GridDataset& data, const KernelSpec& kernel, double lambda) {
    check_lambda(lambda);
    check_dataset(data);
    const double n = static_cast<double>(data.size());
    const Eigen::MatrixXd a = gram_on_grid(kernel, *data.grid).entries;
    const Eigen::MatrixXd xw = data.X * data.grid->weights().asDiagonal();
    const Eigen::MatrixXd kx_features = a * xw.transpose(); // column i is (L_K X_i)(t)
    Eigen::MatrixXd system = xw * kx_features;
    system = 0.5 * (system + system.transpose()).eval();
    system.diagonal().array() += lambda * n;
    Eigen::VectorXd c = spd_solve(system, data.y);
    GridFunction beta(data.grid, kx_features * c);
    return RlsModel{lambda, std::move(beta), std::move(c), std::nullopt, std::nullopt, std::nullopt};
}

RlsModel rls_fit_operator(const GridDataset& data, const DiscretizedOperator& LK_sqrt, double lambda) {
    check_lambda(lambda);
    check_dataset(data);
    check_same_grid(*data.grid, LK_sqrt.grid());
    const double n = static_cast<double>(data.size());
    const Eigen::VectorXd sw = data.grid->weights().cwiseSqrt();
    // Rows of z are the symmetric-frame images of L_K^{1/2} X_i.
    const Eigen::MatrixXd z = data.X * sw.asDiagonal() * LK_sqrt.sym_matrix();
    const Eigen::VectorXd rhs = z.transpose() * data.y / n;
    const Eigen::VectorXd f = spd_solve(regularized_cross(z, lambda), rhs);
    const Eigen::VectorXd beta = LK_sqrt.sym_matrix() * f;
    RlsModel model{lambda, GridFunction(data.grid, beta.cwiseQuotient(sw)), std::nullopt, std::nullopt, std::nullopt,
                   GridFunction(data.grid, f.cwiseQuotient(sw))};
    return model;
}

RlsModel rls_fit_gram(const Dataset& data, const Scenario& scenario, double lambda) {
    check_lambda(lambda);
    check_dataset(data, scenario);
    const double n = static_cast<double>(data.size());
    const Eigen::VectorXd root_rho = scenario.rho.cwiseSqrt();
    const Eigen::MatrixXd z = data.X * root_rho.asDiagonal();
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(data.size(), data.size());
    system.selfadjointView<Eigen::Lower>().rankUpdate(z);
    system = system.selfadjointView<Eigen::Lower>();
    system.diagonal().array() += lambda * n;
    Eigen::VectorXd c = spd_solve(system, data.y);
    Eigen::VectorXd f = z.transpose() * c;
    Eigen::VectorXd b = root_rho.cwiseProduct(f);
    return RlsModel{lambda, scenario.basis.synthesize(b), std::move(c), std::move(b), std::move(f), std::nullopt};
}

RlsModel rls_fit_operator(const Dataset& data, const Scenario& scenario, double lambda) {
    check_lambda(lambda);
    check_dataset(data, scenario);
    const double n = static_cast<double>(data.size());
    const Eigen::VectorXd root_rho = scenario.rho.cwiseSqrt();
    const Eigen::MatrixXd z = data.X * root_rho.asDiagonal();
    const Eigen::VectorXd rhs = z.transpose() * data.y / n;
    Eigen::VectorXd f = spd_solve(regularized_cross(z, lambda), rhs);
    Eigen::VectorXd b = root_rho.cwiseProduct(f);
    return RlsModel{lambda, scenario.basis.synthesize(b), std::nullopt, std::move(b), std::move(f), std::nullopt};
}

void check_partition(int n, int m) {
    require(m >= 1 && m <= n, Errc::invalid_partition,
            "m = " + std::to_string(m) + " is outside [1, " + std::to_string(n) + "]");
    require(n % m == 0, Errc::invalid_partition, std::to_string(m) + " does not divide " + std::to_string(n));
}

std::vector<int> partition_order(int n, int m, std::uint64_t seed) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (m == 1) return order;
    // Fisher-Yates with an explicit bounded draw so the order does not depend
    // on the standard library's shuffle implementation.
    Engine engine = make_engine(seed, 0x7061727469746eULL);
    for (int i = n - 1; i > 0; --i) {
        const std::uint64_t bound = static_cast<std::uint64_t>(i) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t draw = engine();
        while (draw >= limit) draw = engine();
        std::swap(order[i], order[static_cast<int>(draw % bound)]);
    }
    return order;
}

DacModel dac_fit(const Dataset& data, const Scenario& scenario, double lambda, int m, const DacOptions& options) {
    check_dataset(data, scenario);
    return run_blocks(data.size(), m, options, [&](const std::vector<int>& idx) {
        Dataset part;
        part.X = gather_rows(data.X, idx);
        part.y = gather(data.y, idx);
        part.meta = data.meta;
        return options.mode == FitMode::gram ? rls_fit_gram(part, scenario, lambda)
                                             : rls_fit_operator(part, scenario, lambda);
    });
}

DacModel dac_fit(const GridDataset& data, const KernelSpec& kernel, const DiscretizedOperator& LK_sqrt, double lambda,
                 int m, const DacOptions& options) {
    check_dataset(data);
    return run_blocks(data.size(), m, options, [&](const std::vector<int>& idx) {
        GridDataset part{data.grid, gather_rows(data.X, idx), gather(data.y, idx)};
        return options.mode == FitMode::gram ? rls_fit_gram(part, kernel, lambda)
                                             : rls_fit_operator(part, LK_sqrt, lambda);
    });
}

double predict(const RlsModel& model, const GridFunction& x) { return l2_inner(model.beta_hat, x); }

double predict(const DacModel& model, const GridFunction& x) { return predict(model.averaged, x); }

void export_model(const std::string& beta_path, const std::string& sidecar_path, const DacModel& model, int n_total) {
    std::ofstream beta(beta_path);
    require(static_cast<bool>(beta), Errc::invalid_argument, "cannot open '" + beta_path + "' for writing");
    write_grid_function(beta, model.averaged.beta_hat);
    std::ofstream side(sidecar_path);
    require(static_cast<bool>(side), Errc::invalid_argument, "cannot open '" + sidecar_path + "' for writing");
    const nlohmann::json j = {
        {"lambda", model.averaged.lambda}, {"m", model.m}, {"n_per_block", n_total / model.m}, {"seed", model.seed}};
    side << j.dump(2) << '\n';
}

} // namespace dcflr
