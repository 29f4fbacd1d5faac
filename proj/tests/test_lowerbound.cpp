#include "dcflr/error.hpp"
#include "dcflr/lowerbound.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

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

double power_mu(int k) { return std::pow(static_cast<double>(k), -2.0); }

} // namespace

TEST(Packing, EightCoordinates) {
    auto p = gv_packing(8, PackingStrategy::brute_force);
    EXPECT_GE(p.size(), 3);
    auto check = check_packing(p);
    EXPECT_GE(check.min_disagreement, 4);
    EXPECT_TRUE(check.ok());
    EXPECT_TRUE(packing_is_maximal(p));
}

TEST(Packing, BruteForceSizes) {
    for (int M = 8; M <= 16; ++M) {
        auto p = gv_packing(M, PackingStrategy::brute_force);
        auto check = check_packing(p);
        EXPECT_TRUE(check.ok()) << M;
        EXPECT_GE(static_cast<double>(p.size()), std::exp(M / 8.0)) << M;
        EXPECT_GE(4 * check.min_disagreement, M) << M;
        EXPECT_GE(check.min_disagreement, p.separation) << M;
    }
}

TEST(Packing, GreedyLargeM) {
    for (int M : {24, 40, 64}) {
        auto p = gv_packing(M, PackingStrategy::greedy, 11);
        EXPECT_TRUE(check_packing(p).ok()) << M;
    }
    EXPECT_EQ(gv_packing(32, PackingStrategy::greedy, 4).words, gv_packing(32, PackingStrategy::greedy, 4).words);
}

TEST(Packing, Errors) {
    EXPECT_EQ(code_of([] { gv_packing(7, PackingStrategy::brute_force); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { gv_packing(17, PackingStrategy::brute_force); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { gv_packing(65, PackingStrategy::greedy); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { packing_strategy_from_string("annealing"); }), Errc::parse_error);
}

TEST(Packing, GlobalSignFlipPreservesCheck) {
    auto p = gv_packing(12, PackingStrategy::brute_force);
    auto flipped = p;
    for (auto& w : flipped.words) w ^= (1ULL << 12) - 1;
    auto a = check_packing(p);
    auto b = check_packing(flipped);
    EXPECT_EQ(a.min_disagreement, b.min_disagreement);
    EXPECT_EQ(a.ok(), b.ok());
}

TEST(Packing, DuplicateWordsFailSeparation) {
    PackingSet p{8, 2, {0b10110100, 0b10110100, 0b01001011}};
    auto check = check_packing(p);
    EXPECT_EQ(check.min_disagreement, 0);
    EXPECT_FALSE(check.separated);
}

TEST(Packing, NonMaximalSetDetected) {
    PackingSet p{8, 4, {0x00}};
    EXPECT_FALSE(packing_is_maximal(p));
}

TEST(Hypotheses, OppositeWordsDistance) {
    const auto& s = scenario();
    const int M = 8;
    PackingSet p{M, 4, {0x00, 0xFF}};
    auto family = build_hypotheses(s, p);
    double oracle = 0.0;
    for (int k = M + 1; k <= 2 * M; ++k) oracle += 4.0 / M * std::pow(power_mu(k), 2 * s.spec.theta);
    const double dist2 = 2 * s.spec.sigma * s.spec.sigma * kl_gaussian(family.betas[0], family.betas[1], s.spec.sigma, s.lam);
    EXPECT_NEAR(dist2 / oracle, 1.0, 1e-12);
    EXPECT_NEAR(4 * family.r * family.r / oracle, 1.0, 1e-12);
}

TEST(Hypotheses, IdenticalWordsCollapse) {
    PackingSet p{8, 4, {0x0F, 0x0F}};
    auto family = build_hypotheses(scenario(), p);
    EXPECT_EQ(family.r, 0.0);
    EXPECT_FALSE(check_packing(p).separated);
}

TEST(Hypotheses, BruteForceFamiliesPassChecks) {
    const auto& s = scenario();
    for (int M : {8, 12, 16}) {
        auto family = build_hypotheses(s, gv_packing(M, PackingStrategy::brute_force));
        auto check = check_hypotheses(family, s);
        EXPECT_TRUE(check.ok()) << M;
        EXPECT_LE(check.max_gamma_error, 1e-12);
        // c = min mu_k k^{1/p} is 1 for this spectrum.
        const double floor = 0.25 * std::pow(2.0, -2 * s.spec.theta / s.spec.p) * std::pow(M, -2 * s.spec.theta / s.spec.p);
        EXPECT_GE(family.r * family.r, floor * (1 - 1e-12)) << M;
    }
}

TEST(Hypotheses, GridQuadratureAgrees) {
    const auto& s = scenario();
    auto family = build_hypotheses(s, gv_packing(8, PackingStrategy::brute_force));
    for (std::size_t j = 1; j < 4; ++j) {
        const double coeff = kl_gaussian(family.betas[0], family.betas[j], 0.5, s.lam);
        const double grid =
            kl_gaussian(s.basis.synthesize(family.betas[0]), s.basis.synthesize(family.betas[j]), 0.5, s.LC);
        EXPECT_NEAR(grid / coeff, 1.0, 1e-8);
    }
}

TEST(Hypotheses, Errors) {
    auto spec = make_scenario_spec(0.5, 0.5, 0.5, Design::gaussian, 20);
    auto small = build_scenario(spec, make_uniform_grid(65));
    EXPECT_EQ(code_of([&] { build_hypotheses(small, gv_packing(12, PackingStrategy::brute_force)); }), Errc::invalid_argument);
    spec.sigma = 0.0;
    auto quiet = build_scenario(spec, make_uniform_grid(65));
    EXPECT_EQ(code_of([&] { build_hypotheses(quiet, gv_packing(8, PackingStrategy::brute_force)); }), Errc::invalid_argument);
}

TEST(KlGaussian, Examples) {
    const auto& s = scenario();
    EXPECT_EQ(kl_gaussian(s.b0, s.b0, 0.5, s.lam), 0.0);
    EXPECT_DOUBLE_EQ(kl_gaussian(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 1.0, Eigen::VectorXd::Ones(1)), 0.5);
    EXPECT_EQ(code_of([&] { kl_gaussian(s.b0, s.b0, 0.0, s.lam); }), Errc::invalid_argument);
}

TEST(KlGaussian, MatchesMonteCarlo) {
    const auto& s = scenario();
    auto family = build_hypotheses(s, gv_packing(12, PackingStrategy::brute_force));
    const double exact = kl_gaussian(family.betas[0], family.betas[1], 0.5, s.lam);
    const double mc = kl_monte_carlo(family.betas[0], family.betas[1], 0.5, s, 100000, 3);
    EXPECT_NEAR(mc / exact, 1.0, 0.05);
}

TEST(Fano, Examples) {
    EXPECT_NEAR(fano_certificate(3, 0.0, 100), 1 - std::log(2.0) / std::log(3.0), 1e-15);
    EXPECT_NEAR(fano_certificate(3, 0.0, 100), 0.3691, 1e-4);
    EXPECT_EQ(fano_certificate(1000, 1e9, 1000000), 0.0);
    EXPECT_EQ(code_of([] { fano_certificate(1, 0.0, 10); }), Errc::invalid_argument);
}

TEST(Fano, RangeAndMonotonicity) {
    double prev_n = 2.0, prev_r = 2.0;
    for (int i = 0; i < 30; ++i) {
        const double by_n = fano_certificate(1000, 0.01, 1LL << i);
        const double by_r = fano_certificate(1000, 1e-6 * std::pow(2.0, i), 64);
        for (double v : {by_n, by_r}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_LE(by_n, prev_n);
        EXPECT_LE(by_r, prev_r);
        prev_n = by_n;
        prev_r = by_r;
    }
}

TEST(Theorem1, AcceptanceRegime) {
    auto cert = theorem1_certificate(256, 4096, 0.5, 0.5, 0.5, power_mu);
    EXPECT_EQ(cert.M, 4096);
    EXPECT_NEAR(cert.c, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(cert.log_L, 512.0);
    EXPECT_GT(cert.probability_bound, 0.9);
    // Closed form: 1 - (N R + ln 2) / (M / 8) with R = 8 M^-2.
    const double R = 8.0 / (4096.0 * 4096.0);
    EXPECT_NEAR(cert.probability_bound, 1 - (4096 * R + std::numbers::ln2) / 512.0, 1e-14);
}

TEST(Theorem1, ImprovesWithA) {
    double prev = -1.0;
    for (double a : {16.0, 64.0, 256.0}) {
        const double v = theorem1_certificate(a, 4096, 0.5, 0.5, 0.5, power_mu).probability_bound;
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Theorem1, ApproachesLimit) {
    // With a = 16 the limit tends to 1 - 1/64; rounding M up moves the bound by at most 3/64 per unit of M.
    double prev_limit = 0.0;
    for (long long N : {100LL, 10000LL, 1000000LL, 100000000LL}) {
        auto cert = theorem1_certificate(16, N, 0.5, 0.5, 0.5, power_mu);
        const double raw = 16 * std::cbrt(static_cast<double>(N));
        const double limit = theorem1_limit(16, 0.5, 0.5, 0.5, cert.c, cert.M);
        EXPECT_GT(limit, prev_limit);
        EXPECT_LT(limit, 1.0 - 1.0 / 64);
        prev_limit = limit;
        EXPECT_LE(std::abs(cert.probability_bound - limit), 0.05 / raw + 1e-12) << N;
    }
}

TEST(Theorem1, SmallMUsesExactCeiling) {
    auto cert = theorem1_certificate(1, 64, 0.5, 0.5, 0.5, power_mu);
    EXPECT_EQ(cert.M, 8);
    EXPECT_EQ(cert.L, 3.0);
    EXPECT_EQ(to_json(cert)["L"], 3.0);
}
