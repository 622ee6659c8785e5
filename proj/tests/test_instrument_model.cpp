#include <doctest.h>

#include <cmath>
#include <random>

#include "ivcr/errors.hpp"
#include "ivcr/instrument_model.hpp"
#include "oracles.hpp"

using namespace ivcr;

namespace {

CohortDataset covariate_cohort(std::size_t n, std::uint64_t seed, bool logistic, double b0, double b1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Subject> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = norm(rng);
    const double eta = b0 + b1 * l;
    const double g = logistic ? (unif(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0) : eta + 0.7 * norm(rng);
    s[i] = {static_cast<std::int64_t>(i + 1), 1.0 + unif(rng), 1, 1.0, g, {l}};
  }
  return CohortDataset(std::move(s));
}

// Delete-one jackknife variance of theta_hat against the influence-function variance.
void check_jackknife(const CohortDataset& data, const InstrumentModelSpec& spec) {
  const auto full = fit_instrument_model(data, spec);
  const std::size_t n = data.size();
  const auto q = full.parameter_count();
  Eigen::MatrixXd loo(n, q);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) order.push_back(k);
    loo.row(static_cast<Eigen::Index>(i)) = fit_instrument_model(data.select(order, false), spec).theta.transpose();
  }
  const Eigen::RowVectorXd mean = loo.colwise().mean();
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(q); ++r) {
    const double jack = (loo.col(r).array() - mean(r)).square().sum() * (n - 1.0) / n;
    const double sandwich = full.influence.col(r).squaredNorm() / (static_cast<double>(n) * n);
    CHECK(std::abs(jack / sandwich - 1.0) < 0.10);
  }
}

}  // namespace

TEST_CASE("family names") {
  CHECK(parse_instrument_family("intercept") == InstrumentFamily::intercept_only);
  CHECK(parse_instrument_family("linear") == InstrumentFamily::linear);
  CHECK(parse_instrument_family("logistic") == InstrumentFamily::logistic);
  CHECK_THROWS_AS(parse_instrument_family("probit"), DataError);
}

TEST_CASE("intercept-only model centers at the sample mean") {
  const auto data = oracle::four_subjects();
  const auto fit = fit_instrument_model(data, {});
  REQUIRE(fit.parameter_count() == 1);
  CHECK(fit.theta(0) == doctest::Approx(0.5).epsilon(1e-15));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(fit.residuals(static_cast<Eigen::Index>(i)) == doctest::Approx(data[i].instrument - 0.5));
    CHECK(fit.influence(static_cast<Eigen::Index>(i), 0) == doctest::Approx(data[i].instrument - 0.5));
    CHECK(fit.mean_gradient(static_cast<Eigen::Index>(i), 0) == 1.0);
  }
}

TEST_CASE("linear model recovers an exact linear instrument") {
  std::vector<Subject> s;
  for (int i = 0; i < 6; ++i) s.push_back({i + 1, 1.0 + i, 1, 1.0, 2.0 - 0.5 * i, {static_cast<double>(i)}});
  InstrumentModelSpec spec{InstrumentFamily::linear, {0}};
  const auto fit = fit_instrument_model(CohortDataset(s), spec);
  CHECK(fit.theta(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.theta(1) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("influence contributions have mean zero") {
  for (bool logistic : {false, true}) {
    const auto data = covariate_cohort(300, 41, logistic, 0.2, 0.8);
    InstrumentModelSpec spec{logistic ? InstrumentFamily::logistic : InstrumentFamily::linear, {0}};
    const auto fit = fit_instrument_model(data, spec);
    const Eigen::RowVectorXd mean = fit.influence.colwise().mean();
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("logistic fit is consistent") {
  const auto data = covariate_cohort(100000, 7, true, -0.4, 1.1);
  InstrumentModelSpec spec{InstrumentFamily::logistic, {0}};
  const auto fit = fit_instrument_model(data, spec);
  CHECK(std::abs(fit.theta(0) + 0.4) < 0.05);
  CHECK(std::abs(fit.theta(1) - 1.1) < 0.05);
}

TEST_CASE("influence variance matches the jackknife") {
  check_jackknife(covariate_cohort(500, 13, false, 0.5, 0.8), {InstrumentFamily::linear, {0}});
  check_jackknife(covariate_cohort(500, 17, true, 0.1, 0.9), {InstrumentFamily::logistic, {0}});
  check_jackknife(covariate_cohort(500, 19, false, 0.5, 0.8), {InstrumentFamily::intercept_only, {}});
}

TEST_CASE("mean gradient agrees with finite differences") {
  const auto data = covariate_cohort(50, 23, true, 0.3, -0.6);
  const auto fit = fit_instrument_model(data, {InstrumentFamily::logistic, {0}});
  for (Eigen::Index r = 0; r < 2; ++r) {
    Eigen::VectorXd up = fit.theta, down = fit.theta;
    up(r) += 1e-6;
    down(r) -= 1e-6;
    const Eigen::VectorXd fd = (fit.means_at(up) - fit.means_at(down)) / 2e-6;
    CHECK((fd - fit.mean_gradient.col(r)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("invalid instrument models are rejected") {
  const auto linear = covariate_cohort(40, 29, false, 0.0, 1.0);
  CHECK_THROWS_AS(fit_instrument_model(linear, {InstrumentFamily::logistic, {0}}), DataError);
  CHECK_THROWS_AS(fit_instrument_model(linear, {InstrumentFamily::linear, {3}}), DataError);

  // Perfect separation: the likelihood has no maximiser.
  std::vector<Subject> s;
  for (int i = 0; i < 20; ++i) s.push_back({i + 1, 1.0, 1, 1.0, i < 10 ? 0.0 : 1.0, {static_cast<double>(i)}});
  CHECK_THROWS(fit_instrument_model(CohortDataset(s), {InstrumentFamily::logistic, {0}}));

  // Constant covariate collinear with the intercept.
  std::vector<Subject> c;
  for (int i = 0; i < 10; ++i) c.push_back({i + 1, 1.0, 1, 1.0, 0.1 * i, {1.0}});
  CHECK_THROWS(fit_instrument_model(CohortDataset(c), {InstrumentFamily::linear, {0}}));
}
