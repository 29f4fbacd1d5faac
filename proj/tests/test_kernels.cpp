#include "dcflr/error.hpp"
#include "dcflr/kernels.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

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

std::vector<GridFunction> random_samples(const GridPtr& g, int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<GridFunction> out;
    for (int i = 0; i < n; ++i) {
        const double a = normal(rng), b = normal(rng), c = normal(rng);
        out.push_back(GridFunction::sample(g, [&](double t) { return a + b * std::sin(3 * t) + c * t * t; }));
    }
    return out;
}

} // namespace

TEST(EvalKernel, Examples) {
    EXPECT_EQ(eval_kernel(Brownian{}, 0.3, 0.7), 0.3);
    EXPECT_EQ(eval_kernel(SquaredExponential{1.0}, 0.42, 0.42), 1.0);
    EXPECT_NEAR(eval_kernel(SpectralDecay{2.0, 1, false}, 0.0, 0.0), 2.0, 1e-15);
}

TEST(EvalKernel, RejectsOutsideUnitInterval) {
    EXPECT_EQ(code_of([] { eval_kernel(Brownian{}, -0.1, 0.5); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { eval_kernel(SquaredExponential{}, 0.5, 1.01); }), Errc::invalid_argument);
}

TEST(EvalKernel, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<KernelSpec> specs{Brownian{}, SquaredExponential{0.2}, SpectralDecay{1.5, 50, true}};
    for (const auto& spec : specs) {
        for (int i = 0; i < 1000; ++i) {
            const double s = u(rng), t = u(rng);
            EXPECT_EQ(eval_kernel(spec, s, t), eval_kernel(spec, t, s));
        }
    }
}

TEST(KernelSpec, Validation) {
    EXPECT_EQ(code_of([] { validate(SquaredExponential{0.0}); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { validate(SpectralDecay{0.5, 10, false}); }), Errc::invalid_argument);
    EXPECT_EQ(code_of([] { validate(SpectralDecay{2.0, 0, false}); }), Errc::invalid_argument);
    EXPECT_NO_THROW(validate(SpectralDecay{0.75, 200, false}));
}

TEST(KernelSpec, JsonRoundTrip) {
    const std::vector<KernelSpec> specs{Brownian{}, SquaredExponential{0.2}, SpectralDecay{2.0, 200, false}};
    for (const auto& spec : specs) {
        nlohmann::json j = spec;
        KernelSpec back = j.get<KernelSpec>();
        EXPECT_EQ(back.index(), spec.index());
        EXPECT_EQ(nlohmann::json(back), j);
    }
    EXPECT_EQ(nlohmann::json(KernelSpec{SquaredExponential{0.2}}), nlohmann::json::parse(R"({"kind":"sqexp","gamma":0.2})"));
    EXPECT_EQ(code_of([] { nlohmann::json::parse(R"({"kind":"matern"})").get<KernelSpec>(); }), Errc::parse_error);
}

TEST(CosineBasis, OrthonormalOnDefaultGrid) {
    CosineBasis basis(make_uniform_grid(), 200);
    const Eigen::MatrixXd gram = basis.values().transpose() * basis.grid().weights().asDiagonal() * basis.values();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(200, 200)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GramOnGrid, BrownianThreePoints) {
    auto gm = gram_on_grid(Brownian{}, *make_uniform_grid(3));
    Eigen::Matrix3d expected;
    expected << 0, 0, 0, 0, 0.5, 0.5, 0, 0.5, 1;
    EXPECT_EQ(gm.role, GramRole::pointwise);
    EXPECT_EQ((gm.entries - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GramOnGrid, MatchesPointwiseEvaluation) {
    auto g = make_uniform_grid(33);
    const std::vector<KernelSpec> specs{Brownian{}, SquaredExponential{0.2}, SpectralDecay{2.0, 40, true}};
    for (const auto& spec : specs) {
        auto gm = gram_on_grid(spec, *g);
        EXPECT_TRUE(gm.entries.isApprox(gm.entries.transpose(), 0.0));
        for (int i = 0; i < g->size(); ++i)
            for (int j = 0; j < g->size(); ++j)
                EXPECT_NEAR(gm.entries(i, j), eval_kernel(spec, g->points()[i], g->points()[j]), 1e-12);
    }
}

TEST(GramOnGrid, SquaredExponentialIsPsd) {
    auto gm = gram_on_grid(SquaredExponential{0.2}, *make_uniform_grid());
    EXPECT_GE(min_eigen_ratio(gm.entries), -1e-8);
    EXPECT_GE(min_eigen_ratio(gram_on_grid(Brownian{}, *make_uniform_grid()).entries), -1e-8);
}

TEST(FunctionalGram, ConstantSampleBrownian) {
    auto g = make_uniform_grid();
    auto gm = functional_gram(std::vector{GridFunction::constant(g, 1.0)}, Brownian{});
    EXPECT_EQ(gm.role, GramRole::functional);
    EXPECT_NEAR(gm.entries(0, 0), 1.0 / 3.0, 1e-4);
}

TEST(FunctionalGram, ZeroAndDuplicateSamples) {
    auto g = make_uniform_grid(65);
    auto z = functional_gram(std::vector{GridFunction::zero(g), GridFunction::zero(g)}, SquaredExponential{0.5});
    EXPECT_EQ(z.entries.cwiseAbs().maxCoeff(), 0.0);
    auto x = random_samples(g, 1, 3).front();
    auto d = functional_gram(std::vector{x, x}, Brownian{});
    EXPECT_EQ(d.entries(0, 0), d.entries(0, 1));
    EXPECT_EQ(d.entries(0, 1), d.entries(1, 1));
}

TEST(FunctionalGram, Errors) {
    EXPECT_EQ(code_of([] { functional_gram(std::vector<GridFunction>{}, Brownian{}); }), Errc::invalid_argument);
    std::vector<GridFunction> mixed{GridFunction::zero(make_uniform_grid(5)), GridFunction::zero(make_uniform_grid(7))};
    EXPECT_EQ(code_of([&] { functional_gram(mixed, Brownian{}); }), Errc::grid_mismatch);
}

TEST(FunctionalGram, PermutationCovariant) {
    auto g = make_uniform_grid(129);
    auto xs = random_samples(g, 7, 11);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(5));
    std::vector<GridFunction> shuffled;
    for (int i : perm) shuffled.push_back(xs[i]);
    for (const KernelSpec& spec : {KernelSpec{Brownian{}}, KernelSpec{SquaredExponential{0.3}}}) {
        auto a = functional_gram(xs, spec).entries;
        auto b = functional_gram(shuffled, spec).entries;
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) EXPECT_NEAR(b(i, j), a(perm[i], perm[j]), 1e-14 * (1 + std::abs(a(perm[i], perm[j]))));
    }
}

TEST(FunctionalGram, SpectralShortcutAgrees) {
    auto g = make_uniform_grid();
    auto xs = random_samples(g, 6, 19);
    for (const SpectralDecay& spec : {SpectralDecay{2.0, 200, false}, SpectralDecay{0.75, 120, true}}) {
        auto direct = functional_gram(xs, spec).entries;
        auto shortcut = functional_gram_spectral(xs, spec).entries;
        EXPECT_LT((direct - shortcut).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(FunctionalGram, MatrixOverloadMatchesList) {
    auto g = make_uniform_grid(65);
    auto xs = random_samples(g, 4, 23);
    Eigen::MatrixXd rows(4, g->size());
    for (int i = 0; i < 4; ++i) rows.row(i) = xs[i].values().transpose();
    auto a = functional_gram(xs, SquaredExponential{0.2}).entries;
    auto b = functional_gram(rows, *g, SquaredExponential{0.2}).entries;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
}
