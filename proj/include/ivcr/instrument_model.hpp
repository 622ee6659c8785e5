#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ivcr/cohort.hpp"

namespace ivcr {

enum class InstrumentFamily { intercept_only, linear, logistic };

InstrumentFamily parse_instrument_family(const std::string& name);
std::string to_string(InstrumentFamily family);

/// Parametric model for E(G | L; theta). `covariate_indices` selects the columns of L
/// entering the linear predictor; an intercept is always included.
struct InstrumentModelSpec {
  InstrumentFamily family = InstrumentFamily::intercept_only;
  std::vector<std::size_t> covariate_indices;
  int max_iterations = 100;
  double tolerance = 1e-12;
};

/**
 * Fitted conditional-mean model for the instrument.
 *
 * `influence` holds the per-subject contributions eps_i such that
 * sqrt(n) (theta_hat - theta) = n^{-1/2} sum_i eps_i + o_p(1); row i belongs to
 * subject i. `mean_gradient` is d mu(L_i; theta) / d theta at theta_hat.
 */
struct FittedInstrumentModel {
  InstrumentModelSpec spec;
  Eigen::MatrixXd design;  // n x q, first column is the intercept
  Eigen::VectorXd theta;
  Eigen::VectorXd fitted_means;
  Eigen::VectorXd residuals;  // G^c_i = G_i - mu(L_i; theta_hat)
  Eigen::MatrixXd influence;  // n x q
  Eigen::MatrixXd mean_gradient;  // n x q
  int iterations = 0;

  std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(theta.size()); }

  /// mu(L_i; theta) for every subject at an arbitrary parameter value.
  Eigen::VectorXd means_at(const Eigen::VectorXd& at) const;
  Eigen::MatrixXd mean_gradient_at(const Eigen::VectorXd& at) const;
  /// G_i - mu(L_i; theta) at an arbitrary parameter value.
  Eigen::VectorXd residuals_at(const Eigen::VectorXd& at, const CohortDataset& data) const;
};

FittedInstrumentModel fit_instrument_model(const CohortDataset& data, const InstrumentModelSpec& spec);

}  // namespace ivcr
