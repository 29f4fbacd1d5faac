#pragma once

#include "dcflr/synth.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dcflr {

enum class PackingStrategy { brute_force, greedy };

PackingStrategy packing_strategy_from_string(const std::string& name);

/// Sign vectors in {-1, +1}^M stored as bit masks (bit j set means +1 at j).
struct PackingSet {
    int M = 0;
    int separation = 0; // disagreement count enforced during construction
    std::vector<std::uint64_t> words;

    int size() const noexcept { return static_cast<int>(words.size()); }
    Eigen::VectorXd signs(int i) const;
};

struct PackingCheck {
    int min_disagreement = 0; // over distinct pairs; M when the set has one word
    bool separated = false;   // 4 * min_disagreement >= M
    bool large_enough = false; // size >= exp(M / 8)
    bool ok() const noexcept { return separated && large_enough; }
};

int disagreements(std::uint64_t a, std::uint64_t b) noexcept;

PackingCheck check_packing(const PackingSet& packing);

/// Brute force (M <= 16): lexicographic greedy over all of {-1, +1}^M at
/// separation ceil(M/2), falling back to ceil(M/4) if that is too small, then a
/// second pass certifying that no further word can be added. Greedy (M <= 64):
/// random insertion at separation ceil(M/4) until size >= exp(M / 8).
PackingSet gv_packing(int M, PackingStrategy strategy, std::uint64_t seed = 0);

/// True when no word outside the set keeps packing.separation.
bool packing_is_maximal(const PackingSet& packing);

/// Slopes beta_i with coefficients M^{-1/2} mu_k^theta iota_{k-M} / sqrt(lambda_k)
/// on modes M < k <= 2M, and their separation and KL radii.
struct HypothesisFamily {
    int M = 0;
    double theta = 0.0;
    double p = 0.0;
    double sigma = 0.0;
    std::vector<Eigen::VectorXd> betas; // scenario-basis coefficients
    double r = 0.0;                     // half the smallest pairwise risk distance
    double R = 0.0;                     // largest pairwise KL divergence
};

HypothesisFamily build_hypotheses(const Scenario& scenario, const PackingSet& packing);

struct HypothesisCheck {
    bool separated = false;  // every pair at risk distance >= 2r
    bool kl_bounded = false; // every pair has KL <= R
    bool unit_gamma = false; // every gamma_i has unit norm
    double max_gamma_error = 0.0;
    bool ok() const noexcept { return separated && kl_bounded && unit_gamma; }
};

/// Recomputes all pairwise quantities independently of build_hypotheses.
HypothesisCheck check_hypotheses(const HypothesisFamily& family, const Scenario& scenario);

/// (1 / (2 sigma^2)) sum_k lambda_k (b1_k - b2_k)^2.
double kl_gaussian(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, double sigma, const Eigen::VectorXd& lam);
/// Same quantity through the discretized L_C on grid functions.
double kl_gaussian(const GridFunction& beta1, const GridFunction& beta2, double sigma, const DiscretizedOperator& LC);
/// E_X <X, beta1 - beta2>^2 / (2 sigma^2) estimated from fresh draws.
double kl_monte_carlo(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, double sigma, const Scenario& scenario,
                      int draws, std::uint64_t seed);

/// max(0, 1 - (N R + log 2) / log L).
double fano_bound(double log_L, double R, long long N);
double fano_certificate(std::uint64_t L, double R, long long N);

struct FanoCertificate {
    int M = 0;
    double log_L = 0.0;
    double L = 0.0; // infinity when it overflows a double
    double r = 0.0;
    double R = 0.0;
    long long N = 0;
    double theta = 0.0;
    double p = 0.0;
    double sigma = 0.0;
    double c = 0.0;
    double probability_bound = 0.0;
    double risk_level = 0.0; // r^2
};

/// Certificate from an explicit family.
FanoCertificate family_certificate(const HypothesisFamily& family, int L, long long N);

/// Closed-form regime with M = ceil(a N^{p / (p + 2 theta)}), L = ceil(e^{M/8}),
/// c = min_{k <= 2M} mu_k k^{1/p}, R = 2 c^{-2 theta} M^{-2 theta / p} / sigma^2
/// and r^2 = c^{2 theta} 2^{-2 theta / p} M^{-2 theta / p} / 4.
FanoCertificate theorem1_certificate(double a, long long N, double theta, double p, double sigma,
                                     const std::function<double(int)>& mu);

/// Large-N limit of theorem1_certificate for a given M.
double theorem1_limit(double a, double theta, double p, double sigma, double c, int M);

nlohmann::json to_json(const FanoCertificate& cert);

} // namespace dcflr
