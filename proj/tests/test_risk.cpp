#include "dcflr/error.hpp"
#include "dcflr/risk.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace dcflr;

namespace {

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected dcflr::Error";
    return Errc::numerical_failure;
}

const Scenario& scenario() {
    static const Scenario s = build_scenario(make_scenario_spec(0.5, 0.5, 0.5, Design::gaussian), make_uniform_grid());
    return s;
}

Scenario single_mode(double sigma = 0.5) {
    auto spec = make_scenario_spec(0.5, 0.5, sigma, Design::gaussian, 1);
    spec.gamma0 = Eigen::VectorXd::Ones(1);
    return build_scenario(spec, make_uniform_grid(17));
}

} // namespace

TEST(FLambda, ZeroSlope) {
    const auto& s = scenario();
    auto f = compute_f_lambda(GridFunction::zero(s.grid), s.LK, s.LC, s.composites.system, 0.1);
    EXPECT_EQ(f.values().cwiseAbs().maxCoeff(), 0.0);
}

TEST(FLambda, SingleMode) {
    auto s = single_mode();
    const double f = f_lambda_coeffs(s, 1.0)[0];
    // Image coefficient sqrt(mu) f = mu^{1 + theta} / (lambda + mu).
    EXPECT_NEAR(std::sqrt(s.mu[0]) * f, 0.5, 1e-15);
    EXPECT_NEAR(std::sqrt(s.mu[0]) * f_lambda_coeffs(s, 1e-8)[0], std::pow(s.mu[0], 0.5) * 1.0, 1e-6);
}

TEST(FLambda, SmallLambdaLimitAcrossModes) {
    const auto& s = scenario();
    const auto f = f_lambda_coeffs(s, 1e-8);
    for (int k = 0; k < 5; ++k)
        EXPECT_NEAR(std::sqrt(s.mu[k]) * f[k], std::pow(s.mu[k], s.spec.theta) * s.gamma0[k], 1e-6);
}

TEST(FLambda, GridRouteMatchesClosedForm) {
    const auto& s = scenario();
    for (double lambda : {1.0, 1e-2, 1e-3}) {
        auto grid = compute_f_lambda(s.beta0, s.LK, s.LC, s.composites.system, lambda);
        auto closed = s.basis.synthesize(f_lambda_coeffs(s, lambda));
        EXPECT_LE(l2_norm(grid - closed), 1e-6 * l2_norm(closed)) << lambda;
    }
}

TEST(ApproximationError, Examples) {
    auto one = EigenSystem::from_eigenvalues({1.0});
    EXPECT_DOUBLE_EQ(approximation_error(1.0, 0.5, Eigen::VectorXd::Ones(1), one), 0.25);
    EXPECT_EQ(approximation_error(0.1, 0.5, Eigen::VectorXd::Zero(1), one), 0.0);
    const auto& s = scenario();
    auto diag = EigenSystem::from_eigenvalues({s.mu.data(), s.mu.data() + s.modes()});
    double prev = INFINITY;
    for (double lambda = 1.0; lambda >= 1e-8; lambda /= 10) {
        const double a = approximation_error(lambda, 0.5, s.gamma0, diag);
        EXPECT_LT(a, prev);
        prev = a;
    }
    EXPECT_LT(prev, 1e-6);
}

TEST(ApproximationError, LemmaBound) {
    const auto& s = scenario();
    auto diag = EigenSystem::from_eigenvalues({s.mu.data(), s.mu.data() + s.modes()});
    for (double theta : {0.1, 0.25, 0.5})
        for (int e = -6; e <= 0; ++e) {
            const double lambda = std::pow(10.0, e);
            const double bound = std::pow(lambda, 2 * theta) * s.gamma0.squaredNorm();
            EXPECT_LE(approximation_error(lambda, theta, s.gamma0, diag), bound * (1 + 1e-12));
        }
}

TEST(ExcessRisk, Examples) {
    const auto& s = scenario();
    EXPECT_EQ(excess_risk_spectral(s.b0, s), 0.0);
    auto one = single_mode();
    EXPECT_DOUBLE_EQ(excess_risk_spectral(one.b0 + Eigen::VectorXd::Constant(1, 0.5), one), 0.25);
}

TEST(ExcessRisk, SpectralAgreesWithMonteCarlo) {
    const auto& s = scenario();
    auto d = generate_dataset(s.spec, s.b0, 128, 21);
    auto model = rls_fit_operator(d, s, 0.02);
    auto spectral = excess_risk(model, s, RiskMethod::spectral);
    auto mc = excess_risk(model, s, RiskMethod::monte_carlo, 100000, 5);
    EXPECT_EQ(mc.mc_draws, 100000);
    EXPECT_NEAR(mc.excess_risk / spectral.excess_risk, 1.0, 0.05);
    EXPECT_EQ(spectral.approx_error, mc.approx_error);
}

TEST(ExcessRisk, MonteCarloProjectsWhenCoefficientsMissing) {
    const auto& s = scenario();
    auto d = generate_dataset(s.spec, s.b0, 64, 22);
    auto grid_model = rls_fit_gram(to_grid(d, s.basis), s.kernel_K(), 0.05);
    EXPECT_EQ(code_of([&] { excess_risk(grid_model, s, RiskMethod::spectral); }), Errc::method_unavailable);
    auto basis_model = rls_fit_gram(d, s, 0.05);
    const double a = excess_risk(grid_model, s, RiskMethod::monte_carlo, 20000, 1).excess_risk;
    const double b = excess_risk(basis_model, s, RiskMethod::monte_carlo, 20000, 1).excess_risk;
    EXPECT_NEAR(a / b, 1.0, 1e-8);
}

TEST(ExcessRisk, QuadratureIdentity) {
    const auto& s = scenario();
    for (unsigned seed : {1u, 2u, 3u}) {
        auto d = generate_dataset(s.spec, s.b0, 64, seed);
        auto model = rls_fit_operator(d, s, 1e-2);
        const double spectral = excess_risk_spectral(*model.basis_coeffs, s);
        EXPECT_NEAR(quadrature_risk(model.beta_hat, s.beta0, s.LC), spectral, 1e-6);
    }
}

TEST(SampleError, Examples) {
    const auto& s = scenario();
    auto f = f_lambda_coeffs(s, 0.1);
    RlsModel exact{0.1, s.beta0, std::nullopt, s.b0, f, std::nullopt};
    EXPECT_EQ(sample_error(exact, f, s), 0.0);

    auto spec = s.spec;
    spec.sigma = 0.0;
    spec.gamma0 = Eigen::VectorXd::Zero(s.modes());
    auto zero = build_scenario(spec, s.grid);
    auto d = generate_dataset(spec, zero.b0, 16, 1);
    EXPECT_EQ(d.y.cwiseAbs().maxCoeff(), 0.0);
    auto model = rls_fit_operator(d, zero, 0.1);
    EXPECT_EQ(sample_error(model, f_lambda_coeffs(zero, 0.1), zero), 0.0);
}

TEST(SampleError, GridRouteMatchesBasisRoute) {
    const auto& s = scenario();
    auto d = generate_dataset(s.spec, s.b0, 48, 31);
    const double lambda = 0.02;
    auto basis_model = rls_fit_operator(d, s, lambda);
    auto grid_model = rls_fit_operator(to_grid(d, s.basis), operator_sqrt(s.LK), lambda);
    const double basis = sample_error(basis_model, f_lambda_coeffs(s, lambda), s);
    const double grid = sample_error(*grid_model.f_hat, compute_f_lambda(s.beta0, s.LK, s.LC, s.composites.system, lambda),
                                     s.composites.T);
    EXPECT_NEAR(grid / basis, 1.0, 1e-6);
}

TEST(RiskReport, DecompositionHolds) {
    const auto& s = scenario();
    for (unsigned seed = 0; seed < 20; ++seed) {
        auto d = generate_dataset(s.spec, s.b0, 32 + 8 * static_cast<int>(seed), 100 + seed);
        auto model = rls_fit_operator(d, s, 0.03);
        auto r = excess_risk(model, s, RiskMethod::spectral);
        EXPECT_GE(r.excess_risk, 0.0);
        EXPECT_GE(r.sample_error, 0.0);
        EXPECT_GE(r.approx_error, 0.0);
        EXPECT_LE(r.excess_risk, 2 * r.sample_error + 2 * r.approx_error + 1e-9);
    }
}

TEST(RiskCsv, Format) {
    std::ostringstream out;
    write_risk_csv_header(out);
    RiskReport r{0.5, 0.25, 0.125, RiskMethod::monte_carlo, 10};
    write_risk_csv_row(out, 256, 2, 0.01, scenario().spec, r);
    EXPECT_EQ(out.str(), "N,m,lambda,theta,p,sigma,excess_risk,approx_error,sample_error,method\n"
                         "256,2,0.01,0.5,0.5,0.5,0.5,0.25,0.125,monte_carlo\n");
}

TEST(Deviation, LargeBlockNeverDeviates) {
    auto r = deviation_probability(scenario().spec, 0.5, 10000, 100, 3);
    EXPECT_EQ(r.exceed, 0);
    EXPECT_EQ(r.probability, 0.0);
}

TEST(Deviation, BoundReport) {
    auto spec = scenario().spec;
    auto r = deviation_probability(spec, 0.3, 64, 100, 4);
    std::vector<double> mu;
    for (int k = 1; k <= spec.truncation; ++k) mu.push_back(std::pow(k, -2.0));
    const double n = effective_dimension(EigenSystem::from_eigenvalues(mu), 0.3);
    EXPECT_NEAR(r.effective_dimension, n, 1e-12);
    EXPECT_NEAR(r.bound, 4 * 3 * n * n / 64, 1e-12);
    EXPECT_EQ(r.c1, 3.0);
    spec.design = Design::bounded_uniform;
    EXPECT_EQ(deviation_probability(spec, 0.3, 64, 100, 4).c1, 9.0 / 5.0);
    EXPECT_EQ(code_of([&] { deviation_probability(spec, 0.3, 64, 99, 4); }), Errc::invalid_argument);
}

TEST(Deviation, NonIncreasingInBlockSize) {
    const auto& spec = scenario().spec;
    for (double lambda : {0.05, 0.1}) {
        DeviationReport prev{};
        bool first = true;
        for (int n : {32, 128, 512}) {
            auto r = deviation_probability(spec, lambda, n, 400, 6);
            if (!first) {
                EXPECT_LE(r.probability, prev.probability + 2 * std::hypot(r.std_error, prev.std_error) + 1e-12);
            }
            prev = r;
            first = false;
        }
    }
}
