#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ivcr/cohort.hpp"
#include "ivcr/estimator.hpp"
#include "ivcr/instrument_model.hpp"
#include "ivcr/step_curve.hpp"

namespace ivcr {

/// Nelson-Aalen and product-limit summaries within the subgroup X = x, G = g.
struct SubgroupHazards {
  double exposure_level = 1.0;
  double instrument_level = 1.0;
  std::size_t subject_count = 0;
  double horizon = 0.0;
  std::vector<double> event_times;  // distinct subgroup event times <= horizon
  StepCurve cumulative_hazard1;     // jumps at every event time (possibly by 0)
  StepCurve cumulative_hazard2;
  StepCurve survivor;               // all-cause product-limit
  StepCurve incidence1;             // sum S(s-) dLambda1(s)
  StepCurve incidence2;
  // Per event time: exact increments and the survivor just before it.
  std::vector<double> hazard1_increments;
  std::vector<double> hazard2_increments;
  std::vector<double> survivor_left;

  double last_event_time() const { return event_times.empty() ? 0.0 : event_times.back(); }
};

SubgroupHazards subgroup_hazards(const CohortDataset& data, double exposure_level,
                                 double instrument_level, std::optional<double> horizon = std::nullopt);

struct RrCurve {
  std::vector<double> times;
  std::vector<double> rr;          // NaN where undefined
  std::vector<bool> defined;
  std::vector<double> lower;       // empty without bootstrap
  std::vector<double> upper;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  bool has_band = false;
  bool assumes_zero_cause2_effect = true;
};

/**
 * RR(t) = num(t) / P(T <= t, cause 1 | X = x, G = g) with
 *   num(t) = sum_{s <= t} S(s-) exp{x B1(s-)} [dLambda1(s) - x dB1(s)]
 * over the merged jump grid of Lambda1 and B1. The counterfactual survivor
 * exp{-Lambda1 - Lambda2 + x B1} is plugged in as the product-limit S(s-) times
 * exp{x B1(s-)}, so B1 = 0 reproduces the denominator term by term. Times beyond
 * min(horizon, last subgroup event) or with zero incidence are flagged undefined.
 */
RrCurve relative_risk_curve(const SubgroupHazards& sub, const IvFitResult& iv,
                            std::span<const double> times);

/// RR numerator evaluated jump by jump without grid merging; used to cross-check.
double relative_risk_numerator_bruteforce(const SubgroupHazards& sub, const IvFitResult& iv,
                                          double t);

struct BootstrapOptions {
  std::size_t replicates = 500;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double level = 0.95;
  double min_success_fraction = 0.8;
  std::optional<double> horizon;
};

/// Point estimate on the original data plus percentile bands from subject resampling.
RrCurve bootstrap_rr(const CohortDataset& data, double exposure_level, double instrument_level,
                     const InstrumentModelSpec& iv_spec, std::span<const double> times,
                     const BootstrapOptions& options);

}  // namespace ivcr
