#include "ivcr/instrument_model.hpp"

#include <cmath>

#include "ivcr/compensated_sum.hpp"
#include "ivcr/errors.hpp"

namespace ivcr {

namespace {

Eigen::MatrixXd build_design(const CohortDataset& data, const InstrumentModelSpec& spec) {
  const auto n = static_cast<Eigen::Index>(data.size());
  std::size_t q = 1;
  if (spec.family != InstrumentFamily::intercept_only) q += spec.covariate_indices.size();
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(q));
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t c = 1; c < q; ++c) {
      const std::size_t col = spec.covariate_indices[c - 1];
      if (col >= data.covariate_count())
        throw DataError("instrument model covariate index " + std::to_string(col) + " out of range");
      design(i, static_cast<Eigen::Index>(c)) = data[static_cast<std::size_t>(i)].covariates[col];
    }
  }
  return design;
}

Eigen::VectorXd instrument_vector(const CohortDataset& data) {
  const auto g = data.instruments();
  return Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
}

Eigen::VectorXd logistic(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
}

}  // namespace

InstrumentFamily parse_instrument_family(const std::string& name) {
  if (name == "mean" || name == "intercept" || name == "intercept_only") return InstrumentFamily::intercept_only;
  if (name == "linear") return InstrumentFamily::linear;
  if (name == "logistic") return InstrumentFamily::logistic;
  throw DataError("unknown instrument model '" + name + "' (expected mean, linear or logistic)");
}

std::string to_string(InstrumentFamily family) {
  switch (family) {
    case InstrumentFamily::intercept_only: return "mean";
    case InstrumentFamily::linear: return "linear";
    case InstrumentFamily::logistic: return "logistic";
  }
  return "unknown";
}

Eigen::VectorXd FittedInstrumentModel::means_at(const Eigen::VectorXd& at) const {
  const Eigen::VectorXd eta = design * at;
  return spec.family == InstrumentFamily::logistic ? logistic(eta) : eta;
}

Eigen::MatrixXd FittedInstrumentModel::mean_gradient_at(const Eigen::VectorXd& at) const {
  if (spec.family != InstrumentFamily::logistic) return design;
  const Eigen::VectorXd p = logistic(design * at);
  return (p.array() * (1.0 - p.array())).matrix().asDiagonal() * design;
}

Eigen::VectorXd FittedInstrumentModel::residuals_at(const Eigen::VectorXd& at,
                                                    const CohortDataset& data) const {
  return instrument_vector(data) - means_at(at);
}

FittedInstrumentModel fit_instrument_model(const CohortDataset& data, const InstrumentModelSpec& spec) {
  FittedInstrumentModel fit;
  fit.spec = spec;
  fit.design = build_design(data, spec);
  const Eigen::VectorXd g = instrument_vector(data);
  const auto n = static_cast<double>(data.size());
  const Eigen::MatrixXd& z = fit.design;

  switch (spec.family) {
    case InstrumentFamily::intercept_only: {
      CompensatedSum total;
      for (double v : g) total.add(v);
      const double first = total.value() / n;
      CompensatedSum shift;
      for (double v : g) shift.add(v - first);
      fit.theta = Eigen::VectorXd::Constant(1, first + shift.value() / n);
      fit.fitted_means = Eigen::VectorXd::Constant(g.size(), fit.theta(0));
      fit.residuals = g.array() - fit.theta(0);
      fit.influence = fit.residuals;
      fit.mean_gradient = z;
      break;
    }
    case InstrumentFamily::linear: {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
      if (qr.rank() < z.cols()) throw DataError("instrument model design matrix is rank deficient");
      fit.theta = qr.solve(g);
      fit.fitted_means = z * fit.theta;
      fit.residuals = g - fit.fitted_means;
      const Eigen::MatrixXd gram_inv = (z.transpose() * z).inverse();
      fit.influence = n * (fit.residuals.asDiagonal() * z) * gram_inv;
      fit.mean_gradient = z;
      break;
    }
    case InstrumentFamily::logistic: {
      for (Eigen::Index i = 0; i < g.size(); ++i)
        if (g(i) != 0.0 && g(i) != 1.0)
          throw DataError("logistic instrument model requires a 0/1 instrument (row " +
                          std::to_string(i + 1) + ")");
      {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
        if (qr.rank() < z.cols()) throw DataError("instrument model design matrix is rank deficient");
      }
      Eigen::VectorXd theta = Eigen::VectorXd::Zero(z.cols());
      bool converged = false;
      int it = 0;
      for (; it < spec.max_iterations; ++it) {
        const Eigen::VectorXd p = logistic(z * theta);
        const Eigen::VectorXd w = p.array() * (1.0 - p.array());
        const Eigen::MatrixXd info = z.transpose() * w.asDiagonal() * z;
        const Eigen::VectorXd step = info.ldlt().solve(z.transpose() * (g - p));
        if (!step.allFinite()) break;
        theta += step;
        if (step.lpNorm<Eigen::Infinity>() <= spec.tolerance * (1.0 + theta.lpNorm<Eigen::Infinity>())) {
          converged = true;
          ++it;
          break;
        }
      }
      if (!converged)
        throw ConvergenceError("logistic instrument model did not converge in " +
                               std::to_string(spec.max_iterations) + " iterations");
      fit.iterations = it;
      fit.theta = theta;
      fit.fitted_means = logistic(z * theta);
      fit.residuals = g - fit.fitted_means;
      const Eigen::VectorXd w = fit.fitted_means.array() * (1.0 - fit.fitted_means.array());
      const Eigen::MatrixXd info_inv = (z.transpose() * w.asDiagonal() * z).inverse();
      fit.influence = n * (fit.residuals.asDiagonal() * z) * info_inv;
      fit.mean_gradient = w.asDiagonal() * z;
      break;
    }
  }
  return fit;
}

}  // namespace ivcr
