#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ivcr/cohort.hpp"
#include "ivcr/event_table.hpp"
#include "ivcr/instrument_model.hpp"
#include "ivcr/step_curve.hpp"

namespace ivcr {

/// State of the recursion at one event time.
struct JumpRecord {
  double time = 0.0;
  int cause = 1;
  std::size_t subject = 0;
  double left_sum = 0.0;     // a = B1(t-) + B2(t-)
  double numerator = 0.0;    // Gc_e exp(a X_e)
  double denominator = 0.0;  // sum_i Gc_i R_i exp(a X_i) X_i
  double increment = 0.0;
};

struct IvFitResult {
  StepCurve curve_cause1;
  StepCurve curve_cause2;
  double horizon = 0.0;
  std::size_t subject_count = 0;
  std::vector<JumpRecord> jumps;

  const StepCurve& curve(int cause) const { return cause == 1 ? curve_cause1 : curve_cause2; }
  /// B1(t) + B2(t) accumulated in event order, i.e. the `a` the recursion would use after t.
  double total_at(double t) const;
};

/// Relative tolerance of the denominator check; see fit_iv_competing.
inline constexpr double kDenominatorTolerance = 1e-10;

/**
 * Recursive IV estimator of the cause-specific cumulative exposure effects.
 *
 * Events are processed in EventTable order. At event k of cause j with event
 * subject e and a = B1(t-) + B2(t-),
 *   dB_j = Gc_e exp(a X_e) / sum_{i at risk} Gc_i exp(a X_i) X_i.
 * Tied events are processed one at a time, each seeing the left limits updated by
 * its predecessors. Throws SingularDenominator when |denominator| is below
 * kDenominatorTolerance times the mean of |Gc_i X_i exp(a X_i)| over the risk set.
 */
IvFitResult fit_iv_competing(const EventTable& events, const CohortDataset& data,
                             const FittedInstrumentModel& instrument);

/// Same recursion with an explicit centered instrument; used for refits at perturbed theta.
IvFitResult fit_iv_competing(const EventTable& events, std::span<const double> exposure,
                             std::span<const double> centered_instrument);

/// IV fit of the model with exposure-by-covariate interactions.
struct ExtendedIvFitResult {
  // Ordered B1, B2, B1xL_1..B1xL_p, B2xL_1..B2xL_p.
  std::vector<StepCurve> curves;
  std::vector<std::string> names;
  std::vector<std::size_t> interaction_covariates;
  std::vector<double> event_times;
  std::vector<Eigen::VectorXd> increments;  // one (2+2p) vector per event
  double max_condition_number = 1.0;
  double horizon = 0.0;

  std::size_t interaction_count() const noexcept { return interaction_covariates.size(); }
};

/**
 * Interaction model dLambda^j(x) - dLambda^j(0) = (dB_j + dB_jXL' L) x.
 *
 * Per event the increment solves the just-identified estimating equations
 *   sum_i w_i Q_i' (dN_i - X_i Q_i dB) = 0,  w_i = Gc_i exp{X_i (a + c' L_i)} R_i,
 * with Q_i the 2 x (2+2p) block [[1,0,L_i',0],[0,1,0,L_i']], a = B1(t-)+B2(t-) and
 * c = B1XL(t-)+B2XL(t-). Q_i'Q_i is block diagonal, so the (2+2p) system splits into
 * two copies of the (p+1) system M = sum_i w_i X_i (1,L_i)(1,L_i)'. With p = 0 this is
 * the recursion of fit_iv_competing.
 */
ExtendedIvFitResult fit_iv_extended(const EventTable& events, const CohortDataset& data,
                                    const FittedInstrumentModel& instrument,
                                    std::vector<std::size_t> interaction_covariates);

/// Naive Aalen additive-hazards fit per cause with design (1, X, G).
struct NaiveAalenResult {
  // coefficients[j-1][c]: c = 0 intercept, 1 exposure, 2 instrument.
  std::vector<std::vector<StepCurve>> coefficients;

  const StepCurve& exposure_curve(int cause) const { return coefficients[cause - 1][1]; }
};

NaiveAalenResult fit_naive_aalen(const EventTable& events, const CohortDataset& data);

}  // namespace ivcr
