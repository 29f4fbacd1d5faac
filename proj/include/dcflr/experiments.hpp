#pragma once

#include "dcflr/estimator.hpp"
#include "dcflr/risk.hpp"
#include "dcflr/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dcflr {

enum class ScheduleKind { T2a, T2b_log, T5_noiseless, T6, custom };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& name);

struct Schedule {
    ScheduleKind kind = ScheduleKind::T2a;
    double delta = 0.05;   // exponent slack for little-o caps
    double eta = 0.25;     // T5
    double r = 1.0;        // T2b_log
    double t = 1.0;        // T6
    double scale = 1.0;    // custom: lambda = scale * N^-exponent
    double exponent = 0.5; // custom
    int m = 1;             // custom
    std::optional<int> fixed_m; // overrides the cap; must divide every N
};

struct ExperimentConfig {
    ScenarioSpec scenario;
    int grid_size = kDefaultGridSize;
    std::vector<int> N_list{256, 512, 1024, 2048, 4096, 8192};
    int replicates = 50;
    Schedule schedule;
    std::uint64_t seed = 0;
    FitMode mode = FitMode::operator_form;
    int threads = 1;
};

/// Throws invalid-argument on an empty or unsorted N_list, replicates < 1 or
/// a fixed m that does not divide some N.
void validate(const ExperimentConfig& config);

void to_json(nlohmann::json& j, const Schedule& s);
void from_json(const nlohmann::json& j, Schedule& s);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

struct ScheduleParams {
    double lambda = 0.0;
    int m = 1;
    double m_cap = 1.0;
};

/// Largest divisor of n not exceeding cap, at least 1.
int largest_divisor_at_most(int n, double cap);

ScheduleParams schedule_params(const Schedule& schedule, int N, const ScenarioSpec& scenario);

/// Exponent of N in the rate the schedule targets (log factors dropped).
double theoretical_exponent(const Schedule& schedule, const ScenarioSpec& scenario);

struct RateFitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_ = 0.0;
    std::vector<std::pair<double, double>> points; // (log10 N, log10 mean risk)
    double theoretical_exponent = 0.0;
    bool degenerate = false; // some mean risk at or below the floating-point floor
};

/// Ordinary least squares; needs at least 4 points with distinct abscissae.
RateFitResult slope_fit(const std::vector<std::pair<double, double>>& points);

struct SweepRow {
    int N = 0;
    int replicate = 0;
    ScheduleParams params;
    RiskReport report;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<int> N_list;
    std::vector<double> mean_risk;
    std::vector<ScheduleParams> params;
    RateFitResult fit;
};

/// Fits every (N, replicate) cell with the scheduled (lambda, m) and records
/// the spectral excess risk. Cell seeds are derived from (seed, N, replicate).
SweepResult rate_sweep(const ExperimentConfig& config);
SweepResult rate_sweep(const ExperimentConfig& config, const Scenario& scenario);

/// results.csv, ratefit.json and plotdata.csv in `dir`.
void write_sweep_outputs(const SweepResult& result, const ExperimentConfig& config, const std::string& dir);

struct Theorem4Terms {
    double approximation = 0.0;   // 2 lambda^{2 theta} |gamma0|^2
    double variance = 0.0;        // 16 (N(lambda)/N)(c1 lambda^{2 theta} |gamma0|^2 + sigma^2)
    double partition = 0.0;       // 8 c1 (m/N) N(lambda) lambda^{2 theta} |gamma0|^2
    double tail_signal = 0.0;     // c3 c4 mu1 (4 + 2m) / (N lambda^{2 - 2 theta}) ...
    double tail_noise = 0.0;      // c4 mu1 rho^2 trace(T) 4 sigma^2 / (N lambda^2) ...
    double c1 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0, rho = 0.0;
    double total() const noexcept { return approximation + variance + partition + tail_signal + tail_noise; }
};

/// Right-hand side of the expectation bound for bounded designs, evaluated
/// on the scenario's truncated spectrum with c1 = 3 and rho = sqrt 3.
Theorem4Terms theorem4_terms(const ScenarioSpec& scenario, double lambda, int m, int N);
double theorem4_rhs(const ScenarioSpec& scenario, double lambda, int m, int N);

} // namespace dcflr
