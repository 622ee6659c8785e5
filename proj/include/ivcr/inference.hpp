#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ivcr/cohort.hpp"
#include "ivcr/estimator.hpp"
#include "ivcr/event_table.hpp"
#include "ivcr/instrument_model.hpp"

namespace ivcr {

using Matrix2 = Eigen::Matrix2d;
using Row2 = Eigen::RowVector2d;

/**
 * Weight process of the recursion, scaled by n.
 *
 *   h_i(t_k)    = n R_i(t_k) Gc_i exp(a_k X_i) / D_k
 *   hdot_i(t_k) = dh_i/da = h_i(t_k) (X_i - D'_k / D_k),  D'_k = sum_i Gc_i R_i exp(a_k X_i) X_i^2
 *
 * Entries are evaluated on demand from per-event scalars, so memory stays O(n + m).
 */
class WeightProcess {
 public:
  WeightProcess(const IvFitResult& fit, const EventTable& events, const CohortDataset& data,
                std::span<const double> centered_instrument);

  std::size_t event_count() const noexcept { return left_sum_.size(); }
  std::size_t subject_count() const noexcept { return exposure_.size(); }

  double h(std::size_t subject, std::size_t k) const;
  double hdot(std::size_t subject, std::size_t k) const;
  bool at_risk(std::size_t subject, std::size_t k) const { return time_[subject] >= event_time_[k]; }

  double left_sum(std::size_t k) const { return left_sum_[k]; }
  double denominator(std::size_t k) const { return denominator_[k]; }
  double denominator_slope(std::size_t k) const { return denominator_slope_[k]; }
  std::span<const double> exposure() const noexcept { return exposure_; }
  std::span<const double> centered_instrument() const noexcept { return centered_; }

 private:
  std::vector<double> exposure_;
  std::vector<double> centered_;
  std::vector<double> time_;
  std::vector<double> event_time_;
  std::vector<double> left_sum_;
  std::vector<double> denominator_;
  std::vector<double> denominator_slope_;
};

WeightProcess compute_weights(const IvFitResult& fit, const EventTable& events,
                              const CohortDataset& data, const FittedInstrumentModel& instrument);

/**
 * Factors A_k = I + b (hdot_e(t_k)/n) e_j' of the product integral
 * F(s, t) = prod_{(s,t]} (I + b Hdot dN), b = (1, 1)'. Products run in ascending
 * event order, left to right, acting on row vectors.
 */
class TransitionFactors {
 public:
  explicit TransitionFactors(std::vector<Matrix2> factors, std::vector<double> times);

  std::size_t size() const noexcept { return factors_.size(); }
  const Matrix2& factor(std::size_t k) const { return factors_[k]; }

  /// Product of factors first, ..., last - 1. F(t_k, t_l) = between(k + 1, l + 1).
  Matrix2 between(std::size_t first, std::size_t last) const;
  /// F(s, t) over event times in (s, t].
  Matrix2 product(double s, double t) const;
  /// F(t_k, t) for every k with t_k <= t, computed by one backward sweep.
  std::vector<Matrix2> suffix_products(double t) const;

 private:
  std::vector<Matrix2> factors_;
  std::vector<double> times_;
};

TransitionFactors accumulate_transitions(const WeightProcess& weights, const IvFitResult& fit);

/// d B_hat(t_k, theta) / d theta after each event, 2 x q.
struct ThetaJacobian {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> values;

  /// Jacobian at t (value after the last event <= t, zero before the first).
  Eigen::MatrixXd at(double t, std::size_t parameter_count) const;
};

/**
 * Differentiates the recursion in theta through Gc_i(theta) = G_i - mu(L_i; theta)
 * and through the carried left limit a(theta).
 */
ThetaJacobian theta_jacobian(const IvFitResult& fit, const EventTable& events,
                             const CohortDataset& data, const FittedInstrumentModel& instrument);

/// Per-subject iid residuals at each requested time; rows are subjects, columns causes.
struct IidResiduals {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> martingale;  // n x 2 per time
  std::vector<Eigen::MatrixXd> correction;  // n x 2 per time, D_theta B' eps_theta
  Eigen::MatrixXd total(std::size_t q) const { return martingale[q] + correction[q]; }
};

struct VarianceCurves {
  std::vector<double> times;
  double level = 0.95;
  std::size_t subject_count = 0;
  // Indexed [cause - 1][time index].
  std::array<std::vector<double>, 2> estimate;
  std::array<std::vector<double>, 2> sigma;  // Sigma_j(t) = n^{-1} sum_i eps_ij(t)^2
  std::array<std::vector<double>, 2> se;     // sqrt(Sigma_j(t) / n)
  std::array<std::vector<double>, 2> lower;
  std::array<std::vector<double>, 2> upper;
};

struct VarianceResult {
  VarianceCurves curves;
  IidResiduals residuals;
};

/**
 * eps_i(t) = sum_{t_k <= t} h_i(t_k) [dN_i(t_k) - X_i dB(t_k)] F(t_k, t) + D_theta B(t)' eps_i^theta,
 * normalised so that Var(B_j(t)) is estimated by Sigma_j(t) / n.
 */
VarianceResult variance_bands(const IvFitResult& fit, const EventTable& events,
                              const WeightProcess& weights, const TransitionFactors& transitions,
                              const ThetaJacobian& jacobian, const FittedInstrumentModel& instrument,
                              std::span<const double> times, double level = 0.95);

/// Convenience: weights, transitions, Jacobian and bands in one call.
VarianceResult infer(const IvFitResult& fit, const EventTable& events, const CohortDataset& data,
                     const FittedInstrumentModel& instrument, std::span<const double> times,
                     double level = 0.95);

/// Two-sided normal quantile for a confidence level, e.g. 1.959964 for 0.95.
double normal_critical_value(double level);

}  // namespace ivcr
