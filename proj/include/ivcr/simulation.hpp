#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ivcr/cohort.hpp"

namespace ivcr {

enum class InstrumentKind { binary_half, standard_normal };

/// Data-generating scenario: G, then (X, U) | G bivariate normal, constant
/// additive cause-specific hazards in (X, U), and a two-part censoring scheme.
struct ScenarioConfig {
  InstrumentKind instrument_kind = InstrumentKind::binary_half;
  double rho = 0.3;  // target corr(X, G)
  std::size_t n = 1600;
  double exposure_mean_base = 0.5;
  double confounder_mean = 1.5;
  double exposure_variance = 0.25;
  double confounder_variance = 0.25;
  double covariance = -1.0 / 6.0;
  std::array<double, 3> hazard1{0.1, 0.0, 0.1};  // intercept, X, U
  std::array<double, 3> hazard2{0.1, 0.2, 0.1};
  double censor_probability = 0.2;  // share drawn from Uniform(0, censor_end)
  double censor_end = 3.5;          // everyone else is censored here
  std::uint64_t seed = 1;
};

/// Named scenarios: "binary-iv", "continuous-iv", "no-confounding".
ScenarioConfig scenario_preset(const std::string& name, std::size_t n, double rho);

/// gamma_G = 0.5 rho / (sd(G) sqrt(1 - rho^2)) with the conditional sd of X fixed at 0.5.
double solve_gamma_for_rho(const ScenarioConfig& config);

struct SimulatedCohort {
  CohortDataset data;
  std::vector<double> confounder;  // hidden U
  std::size_t clamped = 0;         // subjects with a cause-specific hazard clamped at 0
};

SimulatedCohort generate(const ScenarioConfig& config);
/// Generate with the engine of replicate `replicate` of `master_seed`.
SimulatedCohort generate(const ScenarioConfig& config, std::uint64_t master_seed,
                         std::uint64_t replicate);

/// True cumulative effects B_j(t) = (X coefficient of hazard j) * t.
struct TrueEffect {
  double slope1 = 0.0;
  double slope2 = 0.2;
  double cause1(double t) const { return slope1 * t; }
  double cause2(double t) const { return slope2 * t; }
  double cause(int j, double t) const { return j == 1 ? cause1(t) : cause2(t); }
};

TrueEffect true_effect(const ScenarioConfig& config);

struct MonteCarloOptions {
  std::size_t replications = 2000;
  std::vector<double> time_points{0.5, 1.5, 2.5};
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
  double level = 0.95;
};

/// Table layout: [cause-1][time index]. NaN marks a statistic that is not available.
struct MonteCarloSummary {
  std::vector<double> time_points;
  std::array<std::vector<double>, 2> bias;
  std::array<std::vector<double>, 2> empirical_sd;
  std::array<std::vector<double>, 2> mean_se;
  std::array<std::vector<double>, 2> coverage;
  std::array<std::vector<double>, 2> naive_bias;
  std::size_t replications = 0;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::size_t naive_failures = 0;
  std::size_t clamped = 0;
};

MonteCarloSummary run_monte_carlo(const ScenarioConfig& config, const MonteCarloOptions& options);

/**
 * Binary-exposure scenario for the relative-risk functional. G ~ Bernoulli(p_G),
 * U ~ Uniform(0, 1); subjects with G = 0 are unexposed and P(X = 1 | G = 1, U) =
 * compliance_intercept + compliance_slope * U. Cause-specific hazards are
 *   lambda1 = a1 + c1 U + beta1(t) X,  lambda2 = a2 + c2 U,
 * with beta1(t) = effect for t < change_time and 0 afterwards. Censoring is
 * Uniform(0, censor_max) with probability censor_probability, otherwise at censor_max.
 */
struct RrScenarioConfig {
  std::size_t n = 4000;
  double instrument_probability = 0.5;
  double compliance_intercept = 0.9;
  double compliance_slope = -0.6;
  double hazard1_intercept = 0.1;
  double hazard1_confounder = 0.2;
  double effect = -0.05;
  double change_time = 1e300;
  double hazard2_intercept = 0.1;
  double hazard2_confounder = 0.1;
  double censor_probability = 0.2;
  double censor_max = 4.0;
  std::uint64_t seed = 1;
};

/// Scenario with true RR(5) close to 2 and RR(10) close to 1.5.
RrScenarioConfig hip_analog_config(std::size_t n);

CohortDataset generate_rr_scenario(const RrScenarioConfig& config);
CohortDataset generate_rr_scenario(const RrScenarioConfig& config, std::uint64_t master_seed,
                                   std::uint64_t replicate);

}  // namespace ivcr
