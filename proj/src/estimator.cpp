#include "ivcr/estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "ivcr/compensated_sum.hpp"
#include "ivcr/errors.hpp"

namespace ivcr {

namespace {

std::string at_time(const char* what, double t) {
  std::ostringstream os;
  os.precision(17);
  os << what << " at event time " << t;
  return os.str();
}

}  // namespace

double IvFitResult::total_at(double t) const {
  double a = 0.0;
  for (const auto& jump : jumps) {
    if (jump.time > t) break;
    a = jump.left_sum + jump.increment;
  }
  return a;
}

IvFitResult fit_iv_competing(const EventTable& events, std::span<const double> exposure,
                             std::span<const double> centered_instrument) {
  if (exposure.size() != events.subject_count() || centered_instrument.size() != events.subject_count())
    throw DataError("exposure and instrument must have one entry per subject");

  IvFitResult fit;
  fit.horizon = events.horizon();
  fit.subject_count = events.subject_count();
  fit.jumps.reserve(events.size());

  double b1 = 0.0;
  double b2 = 0.0;
  double a = 0.0;  // running B1 + B2; kept separately so relabelled fits see identical sums
  for (std::size_t k = 0; k < events.size(); ++k) {
    const std::size_t e = events.subject(k);
    CompensatedSum sum;
    double scale = 0.0;
    for (std::size_t i : events.at_risk(k)) {
      const double w = centered_instrument[i] * std::exp(a * exposure[i]);
      sum.add(w * exposure[i]);
      scale += std::abs(w * exposure[i]);
    }
    const double denominator = sum.value();
    scale /= static_cast<double>(events.at_risk_count(k));
    if (!(std::abs(denominator) > kDenominatorTolerance * scale))
      throw SingularDenominator(at_time("IV denominator vanishes (weak or constant instrument)",
                                        events.time(k)),
                                events.time(k));

    JumpRecord jump;
    jump.time = events.time(k);
    jump.cause = events.cause(k);
    jump.subject = e;
    jump.left_sum = a;
    jump.numerator = centered_instrument[e] * std::exp(a * exposure[e]);
    jump.denominator = denominator;
    jump.increment = jump.numerator / denominator;

    a += jump.increment;
    if (jump.cause == 1) {
      b1 += jump.increment;
      fit.curve_cause1.push(jump.time, b1);
    } else {
      b2 += jump.increment;
      fit.curve_cause2.push(jump.time, b2);
    }
    fit.jumps.push_back(jump);
  }
  return fit;
}

IvFitResult fit_iv_competing(const EventTable& events, const CohortDataset& data,
                             const FittedInstrumentModel& instrument) {
  if (static_cast<std::size_t>(instrument.residuals.size()) != data.size())
    throw DataError("instrument model was fitted on a different dataset");
  return fit_iv_competing(events, data.exposures(),
                          std::span<const double>(instrument.residuals.data(), data.size()));
}

ExtendedIvFitResult fit_iv_extended(const EventTable& events, const CohortDataset& data,
                                    const FittedInstrumentModel& instrument,
                                    std::vector<std::size_t> interaction_covariates) {
  const std::size_t n = data.size();
  const std::size_t p = interaction_covariates.size();
  for (std::size_t c : interaction_covariates)
    if (c >= data.covariate_count())
      throw DataError("interaction covariate index " + std::to_string(c) + " out of range");
  if (static_cast<std::size_t>(instrument.residuals.size()) != n)
    throw DataError("instrument model was fitted on a different dataset");

  const auto dim = static_cast<Eigen::Index>(p + 1);
  // Rows (1, L_i') for every subject.
  Eigen::MatrixXd q(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    q(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t c = 0; c < p; ++c)
      q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) =
          data[i].covariates[interaction_covariates[c]];
  }
  const auto x = data.exposures();
  const Eigen::VectorXd& gc = instrument.residuals;

  ExtendedIvFitResult out;
  out.interaction_covariates = interaction_covariates;
  out.horizon = events.horizon();
  out.curves.resize(2 + 2 * p);
  out.names = {"B1", "B2"};
  for (int j = 1; j <= 2; ++j)
    for (std::size_t c : interaction_covariates)
      out.names.push_back("B" + std::to_string(j) + "x" + data.covariate_names()[c]);

  // Cumulative values per cause: (B_j, B_jXL').
  Eigen::MatrixXd cumulative = Eigen::MatrixXd::Zero(dim, 2);
  double a = 0.0;
  Eigen::VectorXd c_sum = Eigen::VectorXd::Zero(p);  // B1XL + B2XL
  for (std::size_t k = 0; k < events.size(); ++k) {
    const std::size_t e = events.subject(k);
    const int cause = events.cause(k);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dim, dim);
    double w_e = 0.0;
    for (std::size_t i : events.at_risk(k)) {
      const auto ii = static_cast<Eigen::Index>(i);
      double exponent = a;
      if (p > 0) exponent += q.row(ii).tail(static_cast<Eigen::Index>(p)).dot(c_sum);
      const double w = gc(ii) * std::exp(x[i] * exponent);
      normal.selfadjointView<Eigen::Lower>().rankUpdate(q.row(ii).transpose(), w * x[i]);
      if (i == e) w_e = w;
    }
    normal = normal.selfadjointView<Eigen::Lower>();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(normal);
    const auto& sv = svd.singularValues();
    const double largest = sv(0);
    const double smallest = sv(dim - 1);
    if (!(largest > 0.0) || !(smallest > kDenominatorTolerance * largest))
      throw SingularNormalEquations(
          at_time("interaction-model normal equations are singular (collinear X and X*L)",
                  events.time(k)),
          events.time(k));
    out.max_condition_number = std::max(out.max_condition_number, largest / smallest);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
    const Eigen::VectorXd block = qr.solve(w_e * q.row(static_cast<Eigen::Index>(e)).transpose());

    Eigen::VectorXd increment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 + 2 * p));
    const std::size_t j = static_cast<std::size_t>(cause - 1);
    increment(static_cast<Eigen::Index>(j)) = block(0);
    for (std::size_t c = 0; c < p; ++c)
      increment(static_cast<Eigen::Index>(2 + j * p + c)) = block(static_cast<Eigen::Index>(c + 1));

    cumulative.col(static_cast<Eigen::Index>(j)) += block;
    a += block(0);
    if (p > 0) c_sum += block.tail(static_cast<Eigen::Index>(p));

    const double t = events.time(k);
    out.curves[j].push(t, cumulative(0, static_cast<Eigen::Index>(j)));
    for (std::size_t c = 0; c < p; ++c)
      out.curves[2 + j * p + c].push(t, cumulative(static_cast<Eigen::Index>(c + 1),
                                                   static_cast<Eigen::Index>(j)));
    out.event_times.push_back(t);
    out.increments.push_back(std::move(increment));
  }
  return out;
}

NaiveAalenResult fit_naive_aalen(const EventTable& events, const CohortDataset& data) {
  const std::size_t n = data.size();
  const auto x = data.exposures();
  const auto g = data.instruments();
  const auto times = data.times();

  // Risk-set Gram matrices sum_{T_i >= t} z_i z_i' with z = (1, X, G), accumulated
  // from the latest subject backwards and read off at each event.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return times[l] > times[r]; });

  NaiveAalenResult out;
  out.coefficients.assign(2, std::vector<StepCurve>(3));
  std::array<Eigen::Vector3d, 2> cumulative{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};

  std::vector<Eigen::Matrix3d> grams(events.size());
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  std::size_t next = 0;
  for (std::size_t kk = events.size(); kk-- > 0;) {
    const double t = events.time(kk);
    while (next < n && times[order[next]] >= t) {
      const std::size_t i = order[next++];
      const Eigen::Vector3d z(1.0, x[i], g[i]);
      gram.noalias() += z * z.transpose();
    }
    grams[kk] = gram;
  }

  for (std::size_t k = 0; k < events.size(); ++k) {
    const std::size_t e = events.subject(k);
    const std::size_t j = static_cast<std::size_t>(events.cause(k) - 1);
    Eigen::FullPivLU<Eigen::Matrix3d> lu(grams[k]);
    lu.setThreshold(1e-12);
    if (lu.rank() < 3)
      throw RankDeficientDesign(at_time("naive Aalen at-risk design (1, X, G) is rank deficient",
                                        events.time(k)),
                                events.time(k));
    const Eigen::Vector3d inc = lu.solve(Eigen::Vector3d(1.0, x[e], g[e]));
    cumulative[j] += inc;
    for (int c = 0; c < 3; ++c) out.coefficients[j][static_cast<std::size_t>(c)].push(events.time(k), cumulative[j](c));
  }
  return out;
}

}  // namespace ivcr
