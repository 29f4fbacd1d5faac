#include "dcflr/lowerbound.hpp"

#include "dcflr/error.hpp"
#include "dcflr/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

namespace dcflr {

namespace {

constexpr std::uint64_t kPackingStream = 0x7061636b696e67ULL;
constexpr std::uint64_t kKlStream = 0x6b6c6d63ULL;

int min_separation(int M) { return (M + 3) / 4; }

double min_size(int M) { return std::exp(M / 8.0); }

std::uint64_t full_mask(int M) { return M == 64 ? ~0ULL : (1ULL << M) - 1; }

bool fits(const std::vector<std::uint64_t>& words, std::uint64_t w, int need) {
    for (std::uint64_t c : words)
        if (disagreements(c, w) < need) return false;
    return true;
}

} // namespace

PackingStrategy packing_strategy_from_string(const std::string& name) {
    if (name == "brute_force") return PackingStrategy::brute_force;
    if (name == "greedy") return PackingStrategy::greedy;
    fail(Errc::parse_error, "unknown packing strategy '" + name + "'");
}

Eigen::VectorXd PackingSet::signs(int i) const {
    require(i >= 0 && i < size(), Errc::invalid_argument, "codeword index out of range");
    Eigen::VectorXd s(M);
    for (int j = 0; j < M; ++j) s[j] = (words[i] >> j) & 1ULL ? 1.0 : -1.0;
    return s;
}

int disagreements(std::uint64_t a, std::uint64_t b) noexcept { return std::popcount(a ^ b); }

PackingCheck check_packing(const PackingSet& packing) {
    PackingCheck check;
    check.min_disagreement = packing.M;
    for (int i = 0; i < packing.size(); ++i)
        for (int j = i + 1; j < packing.size(); ++j)
            check.min_disagreement = std::min(check.min_disagreement, disagreements(packing.words[i], packing.words[j]));
    check.separated = 4 * check.min_disagreement >= packing.M;
    check.large_enough = static_cast<double>(packing.size()) >= min_size(packing.M);
    return check;
}

bool packing_is_maximal(const PackingSet& packing) {
    require(packing.M <= 24, Errc::invalid_argument, "maximality is only checked for M <= 24");
    const int need = packing.separation;
    std::vector<std::uint64_t> sorted = packing.words;
    std::sort(sorted.begin(), sorted.end());
    for (std::uint64_t w = 0; w <= full_mask(packing.M); ++w) {
        if (std::binary_search(sorted.begin(), sorted.end(), w)) continue;
        if (fits(packing.words, w, need)) return false;
    }
    return true;
}

PackingSet gv_packing(int M, PackingStrategy strategy, std::uint64_t seed) {
    require(M >= 8, Errc::invalid_argument, "packing needs M >= 8");
    PackingSet packing{M, min_separation(M), {}};
    if (strategy == PackingStrategy::brute_force) {
        require(M <= 16, Errc::invalid_argument, "brute force packing is limited to M <= 16");
        for (int need : {(M + 1) / 2, min_separation(M)}) {
            packing.separation = need;
            packing.words.clear();
            for (std::uint64_t w = 0; w <= full_mask(M); ++w)
                if (fits(packing.words, w, need)) packing.words.push_back(w);
            if (static_cast<double>(packing.size()) >= min_size(M)) break;
        }
        require(packing_is_maximal(packing), Errc::packing_not_found, "lexicographic packing failed maximality check");
    } else {
        require(M <= 64, Errc::invalid_argument, "greedy packing is limited to M <= 64");
        const double target = min_size(M);
        Engine engine = make_engine(seed, kPackingStream);
        for (int proposal = 0; proposal < 1000000 && packing.size() < target; ++proposal) {
            const std::uint64_t w = engine() & full_mask(M);
            if (fits(packing.words, w, packing.separation)) packing.words.push_back(w);
        }
    }
    require(static_cast<double>(packing.size()) >= min_size(M), Errc::packing_not_found,
            "found " + std::to_string(packing.size()) + " codewords, need exp(M/8)");
    return packing;
}

HypothesisFamily build_hypotheses(const Scenario& scenario, const PackingSet& packing) {
    const int M = packing.M;
    require(packing.size() >= 2, Errc::invalid_argument, "need at least two codewords");
    require(scenario.modes() >= 2 * M && scenario.mu[2 * M - 1] > 0.0, Errc::invalid_argument,
            "spectrum must retain at least 2M positive eigenvalues");
    require(scenario.spec.sigma > 0.0, Errc::invalid_argument, "KL radius needs sigma > 0");
    HypothesisFamily family;
    family.M = M;
    family.theta = scenario.spec.theta;
    family.p = scenario.spec.p;
    family.sigma = scenario.spec.sigma;
    const double scale = 1.0 / std::sqrt(static_cast<double>(M));
    Eigen::VectorXd amplitude(M); // coefficient magnitude on mode M + 1 + j
    for (int j = 0; j < M; ++j) {
        const int k = M + j;
        amplitude[j] = scale * std::pow(scenario.mu[k], family.theta) / std::sqrt(scenario.lam[k]);
    }
    for (int i = 0; i < packing.size(); ++i) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(scenario.modes());
        b.segment(M, M) = amplitude.cwiseProduct(packing.signs(i));
        family.betas.push_back(std::move(b));
    }
    // Pairwise risk distances live on the M active modes only.
    const Eigen::VectorXd lam = scenario.lam.segment(M, M);
    double min_dist2 = std::numeric_limits<double>::infinity();
    double max_dist2 = 0.0;
    for (std::size_t i = 0; i < family.betas.size(); ++i) {
        for (std::size_t j = i + 1; j < family.betas.size(); ++j) {
            const double d2 = (family.betas[i].segment(M, M) - family.betas[j].segment(M, M)).array().square().matrix().dot(lam);
            min_dist2 = std::min(min_dist2, d2);
            max_dist2 = std::max(max_dist2, d2);
        }
    }
    family.r = 0.5 * std::sqrt(min_dist2);
    family.R = max_dist2 / (2.0 * family.sigma * family.sigma);
    return family;
}

HypothesisCheck check_hypotheses(const HypothesisFamily& family, const Scenario& scenario) {
    HypothesisCheck check{true, true, true, 0.0};
    const double tol = 1e-12;
    for (std::size_t i = 0; i < family.betas.size(); ++i) {
        const auto& b = family.betas[i];
        double g2 = 0.0;
        for (int k = 0; k < scenario.modes(); ++k) {
            if (b[k] == 0.0) continue;
            const double g = std::sqrt(scenario.lam[k]) * b[k] / std::pow(scenario.mu[k], family.theta);
            g2 += g * g;
        }
        check.max_gamma_error = std::max(check.max_gamma_error, std::abs(g2 - 1.0));
        for (std::size_t j = i + 1; j < family.betas.size(); ++j) {
            const double kl = kl_gaussian(b, family.betas[j], family.sigma, scenario.lam);
            const double dist = std::sqrt(2.0 * family.sigma * family.sigma * kl);
            if (dist < 2.0 * family.r * (1.0 - tol)) check.separated = false;
            if (kl > family.R * (1.0 + tol)) check.kl_bounded = false;
        }
    }
    check.unit_gamma = check.max_gamma_error <= 1e-10;
    return check;
}

double kl_gaussian(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, double sigma, const Eigen::VectorXd& lam) {
    require(sigma > 0.0, Errc::invalid_argument, "sigma must be > 0");
    require(b1.size() == b2.size() && b1.size() <= lam.size(), Errc::invalid_argument, "coefficient sizes differ");
    return (b1 - b2).array().square().matrix().dot(lam.head(b1.size())) / (2.0 * sigma * sigma);
}

double kl_gaussian(const GridFunction& beta1, const GridFunction& beta2, double sigma, const DiscretizedOperator& LC) {
    require(sigma > 0.0, Errc::invalid_argument, "sigma must be > 0");
    check_same_grid(beta1.grid(), beta2.grid());
    check_same_grid(beta1.grid(), LC.grid());
    const Eigen::VectorXd d = beta1.grid().weights().cwiseSqrt().cwiseProduct(beta1.values() - beta2.values());
    return std::max(0.0, d.dot(LC.sym_matrix() * d)) / (2.0 * sigma * sigma);
}

double kl_monte_carlo(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, double sigma, const Scenario& scenario,
                      int draws, std::uint64_t seed) {
    require(sigma > 0.0, Errc::invalid_argument, "sigma must be > 0");
    require(draws >= 1, Errc::invalid_argument, "Monte Carlo needs at least one draw");
    const Eigen::VectorXd d = b1 - b2;
    const std::uint64_t stream = derive_seed(seed, kKlStream);
    constexpr int chunk = 4096;
    double sum = 0.0;
    for (int start = 0; start < draws; start += chunk) {
        const int n = std::min(chunk, draws - start);
        sum += (sample_coefficients(scenario.spec, n, stream, static_cast<std::uint64_t>(start)) * d).squaredNorm();
    }
    return sum / draws / (2.0 * sigma * sigma);
}

double fano_bound(double log_L, double R, long long N) {
    require(log_L >= std::numbers::ln2 * (1.0 - 1e-15), Errc::invalid_argument, "Fano bound needs L >= 2");
    require(R >= 0.0, Errc::invalid_argument, "KL radius must be >= 0");
    require(N >= 1, Errc::invalid_argument, "sample size must be >= 1");
    return std::clamp(1.0 - (static_cast<double>(N) * R + std::numbers::ln2) / log_L, 0.0, 1.0);
}

double fano_certificate(std::uint64_t L, double R, long long N) {
    require(L >= 2, Errc::invalid_argument, "Fano bound needs L >= 2");
    return fano_bound(std::log(static_cast<double>(L)), R, N);
}

FanoCertificate family_certificate(const HypothesisFamily& family, int L, long long N) {
    FanoCertificate cert;
    cert.M = family.M;
    cert.L = L;
    cert.log_L = std::log(static_cast<double>(L));
    cert.r = family.r;
    cert.R = family.R;
    cert.N = N;
    cert.theta = family.theta;
    cert.p = family.p;
    cert.sigma = family.sigma;
    cert.probability_bound = fano_certificate(static_cast<std::uint64_t>(L), family.R, N);
    cert.risk_level = family.r * family.r;
    return cert;
}

FanoCertificate theorem1_certificate(double a, long long N, double theta, double p, double sigma,
                                     const std::function<double(int)>& mu) {
    require(a > 0.0 && N >= 1, Errc::invalid_argument, "need a > 0 and N >= 1");
    require(theta > 0.0 && theta <= 0.5 && p > 0.0 && p <= 1.0, Errc::invalid_argument, "theta or p out of range");
    require(sigma > 0.0, Errc::invalid_argument, "sigma must be > 0");
    const double raw = a * std::pow(static_cast<double>(N), p / (p + 2.0 * theta));
    const int M = std::max(8, static_cast<int>(std::ceil(raw * (1.0 - 1e-12))));
    double c = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 2 * M; ++k) c = std::min(c, mu(k) * std::pow(static_cast<double>(k), 1.0 / p));
    require(c > 0.0, Errc::invalid_argument, "spectrum vanishes below 2M");

    FanoCertificate cert;
    cert.M = M;
    const double e = std::exp(M / 8.0);
    if (std::isfinite(e) && e < 9.0e15) {
        cert.L = std::ceil(e);
        cert.log_L = std::log(cert.L);
    } else {
        // ceil changes log L by less than e^{-M/8} here.
        cert.L = e;
        cert.log_L = M / 8.0;
    }
    const double decay = std::pow(static_cast<double>(M), -2.0 * theta / p);
    cert.R = 2.0 / (sigma * sigma) * std::pow(c, -2.0 * theta) * decay;
    cert.risk_level = 0.25 * std::pow(c, 2.0 * theta) * std::pow(2.0, -2.0 * theta / p) * decay;
    cert.r = std::sqrt(cert.risk_level);
    cert.N = N;
    cert.theta = theta;
    cert.p = p;
    cert.sigma = sigma;
    cert.c = c;
    cert.probability_bound = fano_bound(cert.log_L, cert.R, N);
    return cert;
}

double theorem1_limit(double a, double theta, double p, double sigma, double c, int M) {
    return 1.0 - std::pow(a, -(2.0 * theta + p) / p) * 16.0 / (sigma * sigma * std::pow(c, 2.0 * theta)) -
           8.0 * std::numbers::ln2 / M;
}

nlohmann::json to_json(const FanoCertificate& cert) {
    nlohmann::json j = {{"M", cert.M},         {"log_L", cert.log_L}, {"r", cert.r},
                        {"R", cert.R},         {"N", cert.N},         {"theta", cert.theta},
                        {"p", cert.p},         {"sigma", cert.sigma}, {"probability_bound", cert.probability_bound},
                        {"risk_level", cert.risk_level}};
    j["L"] = std::isfinite(cert.L) ? nlohmann::json(cert.L) : nlohmann::json(nullptr);
    if (cert.c > 0.0) j["c"] = cert.c;
    return j;
}

} // namespace dcflr
