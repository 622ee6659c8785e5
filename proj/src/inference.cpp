#include "ivcr/inference.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "ivcr/compensated_sum.hpp"
#include "ivcr/errors.hpp"

namespace ivcr {

WeightProcess::WeightProcess(const IvFitResult& fit, const EventTable& events, const CohortDataset& data,
                             std::span<const double> centered_instrument)
    : exposure_(data.exposures().begin(), data.exposures().end()),
      centered_(centered_instrument.begin(), centered_instrument.end()),
      time_(data.times().begin(), data.times().end()),
      event_time_(events.times().begin(), events.times().end()) {
  if (fit.jumps.size() != events.size()) throw DataError("fit and event table do not match");
  left_sum_.reserve(events.size());
  denominator_.reserve(events.size());
  denominator_slope_.reserve(events.size());
  for (std::size_t k = 0; k < events.size(); ++k) {
    const double a = fit.jumps[k].left_sum;
    double slope = 0.0;
    for (std::size_t i : events.at_risk(k)) slope += centered_[i] * std::exp(a * exposure_[i]) * exposure_[i] * exposure_[i];
    left_sum_.push_back(a);
    denominator_.push_back(fit.jumps[k].denominator);
    denominator_slope_.push_back(slope);
  }
}

double WeightProcess::h(std::size_t subject, std::size_t k) const {
  if (!at_risk(subject, k)) return 0.0;
  const auto n = static_cast<double>(exposure_.size());
  return n * centered_[subject] * std::exp(left_sum_[k] * exposure_[subject]) / denominator_[k];
}

double WeightProcess::hdot(std::size_t subject, std::size_t k) const {
  return h(subject, k) * (exposure_[subject] - denominator_slope_[k] / denominator_[k]);
}

WeightProcess compute_weights(const IvFitResult& fit, const EventTable& events,
                              const CohortDataset& data, const FittedInstrumentModel& instrument) {
  return WeightProcess(fit, events, data,
                       std::span<const double>(instrument.residuals.data(),
                                               static_cast<std::size_t>(instrument.residuals.size())));
}

TransitionFactors::TransitionFactors(std::vector<Matrix2> factors, std::vector<double> times)
    : factors_(std::move(factors)), times_(std::move(times)) {
  if (factors_.size() != times_.size()) throw DataError("one factor per event time is required");
}

Matrix2 TransitionFactors::between(std::size_t first, std::size_t last) const {
  Matrix2 out = Matrix2::Identity();
  for (std::size_t k = first; k < last && k < factors_.size(); ++k) out = out * factors_[k];
  return out;
}

Matrix2 TransitionFactors::product(double s, double t) const {
  if (t <= s) return Matrix2::Identity();
  const auto first = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), s) - times_.begin());
  const auto last = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  return between(first, last);
}

std::vector<Matrix2> TransitionFactors::suffix_products(double t) const {
  const auto count = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
  std::vector<Matrix2> out(count);
  if (count == 0) return out;
  out[count - 1] = Matrix2::Identity();
  for (std::size_t k = count - 1; k-- > 0;) out[k] = factors_[k + 1] * out[k + 1];
  return out;
}

TransitionFactors accumulate_transitions(const WeightProcess& weights, const IvFitResult& fit) {
  const auto n = static_cast<double>(weights.subject_count());
  std::vector<Matrix2> factors;
  std::vector<double> times;
  factors.reserve(fit.jumps.size());
  for (std::size_t k = 0; k < fit.jumps.size(); ++k) {
    const auto& jump = fit.jumps[k];
    const double c = weights.hdot(jump.subject, k) / n;
    Matrix2 a = Matrix2::Identity();
    const int col = jump.cause - 1;
    a(0, col) += c;
    a(1, col) += c;
    factors.push_back(a);
    times.push_back(jump.time);
  }
  return TransitionFactors(std::move(factors), std::move(times));
}

Eigen::MatrixXd ThetaJacobian::at(double t, std::size_t parameter_count) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return Eigen::MatrixXd::Zero(2, static_cast<Eigen::Index>(parameter_count));
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

ThetaJacobian theta_jacobian(const IvFitResult& fit, const EventTable& events,
                             const CohortDataset& data, const FittedInstrumentModel& instrument) {
  const auto q = static_cast<Eigen::Index>(instrument.parameter_count());
  const auto x = data.exposures();
  const Eigen::VectorXd& gc = instrument.residuals;
  const Eigen::MatrixXd& dmu = instrument.mean_gradient;  // dGc/dtheta = -dmu

  ThetaJacobian out;
  out.times.reserve(events.size());
  out.values.reserve(events.size());
  Eigen::MatrixXd current = Eigen::MatrixXd::Zero(2, q);
  Eigen::RowVectorXd da = Eigen::RowVectorXd::Zero(q);  // d a / d theta
  Eigen::RowVectorXd d_den(q);
  for (std::size_t k = 0; k < events.size(); ++k) {
    const auto& jump = fit.jumps[k];
    const double a = jump.left_sum;
    d_den.setZero();
    for (std::size_t i : events.at_risk(k)) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double ex = std::exp(a * x[i]);
      d_den.noalias() += (x[i] * ex) * (gc(ii) * x[i] * da - dmu.row(ii));
    }
    const auto e = static_cast<Eigen::Index>(jump.subject);
    const double ex_e = std::exp(a * x[jump.subject]);
    const Eigen::RowVectorXd d_num = ex_e * (gc(e) * x[jump.subject] * da - dmu.row(e));
    const Eigen::RowVectorXd d_inc = (d_num - jump.increment * d_den) / jump.denominator;
    current.row(jump.cause - 1) += d_inc;
    da += d_inc;
    out.times.push_back(jump.time);
    out.values.push_back(current);
  }
  return out;
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

VarianceResult variance_bands(const IvFitResult& fit, const EventTable& events,
                              const WeightProcess& weights, const TransitionFactors& transitions,
                              const ThetaJacobian& jacobian, const FittedInstrumentModel& instrument,
                              std::span<const double> times, double level) {
  const std::size_t n = weights.subject_count();
  const std::size_t nq = times.size();
  const double z = normal_critical_value(level);
  const auto x = weights.exposure();

  // rows[q][k] = e_j(k)' F(t_k, t_q) for every event k <= t_q.
  std::vector<std::vector<Row2>> rows(nq);
  std::vector<std::size_t> through(nq);
  std::size_t max_through = 0;
  for (std::size_t q = 0; q < nq; ++q) {
    if (!(times[q] >= 0.0)) throw DataError("evaluation times must be nonnegative");
    const auto products = transitions.suffix_products(times[q]);
    through[q] = products.size();
    max_through = std::max(max_through, through[q]);
    rows[q].reserve(products.size());
    for (std::size_t k = 0; k < products.size(); ++k)
      rows[q].push_back(products[k].row(fit.jumps[k].cause - 1));
  }

  VarianceResult result;
  IidResiduals& res = result.residuals;
  res.times.assign(times.begin(), times.end());
  res.martingale.assign(nq, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2));
  res.correction.assign(nq, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 2));

  const auto dn = static_cast<double>(n);
  for (std::size_t k = 0; k < max_through; ++k) {
    const auto& jump = fit.jumps[k];
    const double scale = dn / jump.denominator;
    for (std::size_t i : events.at_risk(k)) {
      const double h = scale * weights.centered_instrument()[i] * std::exp(jump.left_sum * x[i]);
      const double w = h * ((i == jump.subject ? 1.0 : 0.0) - x[i] * jump.increment);
      for (std::size_t q = 0; q < nq; ++q) {
        if (k < through[q]) res.martingale[q].row(static_cast<Eigen::Index>(i)) += w * rows[q][k];
      }
    }
  }

  const std::size_t dim = instrument.parameter_count();
  for (std::size_t q = 0; q < nq; ++q) {
    const Eigen::MatrixXd jac = jacobian.at(times[q], dim);  // 2 x dim
    res.correction[q] = instrument.influence * jac.transpose();
  }

  VarianceCurves& vc = result.curves;
  vc.times.assign(times.begin(), times.end());
  vc.level = level;
  vc.subject_count = n;
  for (int j = 0; j < 2; ++j) {
    for (std::size_t q = 0; q < nq; ++q) {
      CompensatedSum sum;
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double eps = res.martingale[q](ii, j) + res.correction[q](ii, j);
        sum.add(eps * eps);
      }
      const double sigma = std::max(0.0, sum.value() / dn);
      const double est = fit.curve(j + 1).value_at(times[q]);
      const double se = std::sqrt(sigma / dn);
      vc.estimate[j].push_back(est);
      vc.sigma[j].push_back(sigma);
      vc.se[j].push_back(se);
      vc.lower[j].push_back(est - z * se);
      vc.upper[j].push_back(est + z * se);
    }
  }
  return result;
}

VarianceResult infer(const IvFitResult& fit, const EventTable& events, const CohortDataset& data,
                     const FittedInstrumentModel& instrument, std::span<const double> times, double level) {
  const WeightProcess weights = compute_weights(fit, events, data, instrument);
  const TransitionFactors transitions = accumulate_transitions(weights, fit);
  const ThetaJacobian jacobian = theta_jacobian(fit, events, data, instrument);
  return variance_bands(fit, events, weights, transitions, jacobian, instrument, times, level);
}

}  // namespace ivcr
