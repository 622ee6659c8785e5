#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ivcr/errors.hpp"
#include "ivcr/inference.hpp"
#include "ivcr/simulation.hpp"
#include "oracles.hpp"

using namespace ivcr;

namespace {

struct Fitted {
  CohortDataset data;
  EventTable events;
  FittedInstrumentModel inst;
  IvFitResult fit;
};

Fitted make(const CohortDataset& data, InstrumentModelSpec spec = {}) {
  auto events = build_event_table(data);
  auto inst = fit_instrument_model(data, spec);
  auto fit = fit_iv_competing(events, data, inst);
  return {data, std::move(events), std::move(inst), std::move(fit)};
}

double max_abs(const Matrix2& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("weights of the worked example") {
  const auto f = make(oracle::four_subjects());
  const auto w = compute_weights(f.fit, f.events, f.data, f.inst);
  CHECK(w.h(0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(w.h(1, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(w.h(2, 0) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(w.h(3, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(w.h(0, 1) == 0.0);  // left the risk set at t = 1
  CHECK(!w.at_risk(0, 1));
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sum += w.h(i, 1) * f.data[i].exposure;
  CHECK(sum == doctest::Approx(4.0).epsilon(1e-13));  // sum_i h_i X_i = n
}

TEST_CASE("hdot is the derivative of h in the left limit") {
  std::mt19937_64 rng(11);
  const auto f = make(oracle::random_small_cohort(rng, 25));
  const auto w = compute_weights(f.fit, f.events, f.data, f.inst);
  const auto gc = oracle::mean_centered(f.data);
  const double n = static_cast<double>(f.data.size());
  for (std::size_t k = 0; k < f.events.size(); ++k) {
    auto h_at = [&](std::size_t i, double a) {
      double d = 0.0;
      for (std::size_t r = 0; r < f.data.size(); ++r)
        if (f.data[r].time >= f.events.time(k)) d += gc[r] * std::exp(a * f.data[r].exposure) * f.data[r].exposure;
      return f.data[i].time >= f.events.time(k) ? n * gc[i] * std::exp(a * f.data[i].exposure) / d : 0.0;
    };
    const double a = w.left_sum(k);
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      const double fd = (h_at(i, a + 1e-6) - h_at(i, a - 1e-6)) / 2e-6;
      CHECK(std::abs(fd - w.hdot(i, k)) <= 1e-6 * std::max(1.0, std::abs(fd)));
      CHECK(std::abs(h_at(i, a) - w.h(i, k)) <= 1e-12 * std::max(1.0, std::abs(w.h(i, k))));
    }
  }
}

TEST_CASE("single-factor product and empty product") {
  const auto f = make(oracle::four_subjects());
  const auto w = compute_weights(f.fit, f.events, f.data, f.inst);
  const auto tr = accumulate_transitions(w, f.fit);
  CHECK(max_abs(tr.product(1.2, 1.8) - Matrix2::Identity()) == 0.0);
  const Matrix2 one = tr.product(1.5, 2.0);
  const double hd = w.hdot(f.events.subject(1), 1) / 4.0;
  Matrix2 expected = Matrix2::Identity();
  expected(0, 1) += hd;  // b e_2' with the event from cause 2
  expected(1, 1) += hd;
  CHECK(max_abs(one - expected) < 1e-15);
}

TEST_CASE("product integral semigroup") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = make(oracle::random_small_cohort(rng, 60));
    const auto w = compute_weights(f.fit, f.events, f.data, f.inst);
    const auto tr = accumulate_transitions(w, f.fit);
    std::uniform_real_distribution<double> unif(0.0, 3.1);
    for (int q = 0; q < 10; ++q) {
      std::array<double, 3> t{unif(rng), unif(rng), unif(rng)};
      std::sort(t.begin(), t.end());
      const Matrix2 lhs = tr.product(t[0], t[2]);
      const Matrix2 rhs = tr.product(t[0], t[1]) * tr.product(t[1], t[2]);
      CHECK(max_abs(lhs - rhs) <= 1e-12 * std::max(1.0, max_abs(lhs)));
    }
    const auto suffix = tr.suffix_products(2.0);
    for (std::size_t k = 0; k < suffix.size(); ++k)
      CHECK(max_abs(suffix[k] - tr.product(f.events.time(k), 2.0)) <= 1e-12 * std::max(1.0, max_abs(suffix[k])));
  }
}

TEST_CASE("theta Jacobian agrees with finite differences") {
  // Central differences with step 1e-5 are checked where a third of the cohort is still
  // at risk; at the horizon of a tiny cohort their truncation error alone exceeds 1e-6,
  // so there a Richardson-extrapolated difference is used instead.
  std::mt19937_64 rng(13);
  const std::array<InstrumentModelSpec, 3> specs{InstrumentModelSpec{InstrumentFamily::intercept_only, {}},
                                                 InstrumentModelSpec{InstrumentFamily::linear, {0}},
                                                 InstrumentModelSpec{InstrumentFamily::logistic, {0}}};
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto data = oracle::random_small_cohort(rng, 60, 1, specs[s].family == InstrumentFamily::logistic);
      const auto f = make(data, specs[s]);
      const auto jac = theta_jacobian(f.fit, f.events, f.data, f.inst);
      const auto q = f.inst.parameter_count();
      std::size_t mid = 0;
      while (mid + 1 < f.events.size() && 3 * f.events.at_risk_count(mid + 1) >= data.size()) ++mid;
      auto fd_at = [&](double t, int j, std::size_t r, double step) {
        Eigen::VectorXd up = f.inst.theta, down = f.inst.theta;
        up(static_cast<Eigen::Index>(r)) += step;
        down(static_cast<Eigen::Index>(r)) -= step;
        const auto gu = f.inst.residuals_at(up, data);
        const auto gd = f.inst.residuals_at(down, data);
        const auto fu = fit_iv_competing(f.events, data.exposures(), std::span<const double>(gu.data(), gu.size()));
        const auto fd = fit_iv_competing(f.events, data.exposures(), std::span<const double>(gd.data(), gd.size()));
        return (fu.curve(j).value_at(t) - fd.curve(j).value_at(t)) / (2 * step);
      };
      for (const bool at_horizon : {false, true}) {
        const double t = at_horizon ? f.events.horizon() : f.events.time(mid);
        const auto analytic = jac.at(t, q);
        const double scale = analytic.cwiseAbs().maxCoeff();
        for (std::size_t r = 0; r < q; ++r) {
          const double step = 1e-5 * std::max(1.0, std::abs(f.inst.theta(static_cast<Eigen::Index>(r))));
          for (int j = 1; j <= 2; ++j) {
            const double num = at_horizon ? (4 * fd_at(t, j, r, step / 2) - fd_at(t, j, r, step)) / 3
                                          : fd_at(t, j, r, step);
            const double a = analytic(j - 1, static_cast<Eigen::Index>(r));
            CHECK_MESSAGE(std::abs(a - num) <= 1e-6 * std::max(std::abs(num), 1e-3 * scale),
                          "family " << s << " rep " << rep << " param " << r << " cause " << j << " analytic " << a
                                    << " numeric " << num);
          }
        }
      }
    }
  }
}

TEST_CASE("residuals have mean zero and variances are nonnegative") {
  std::mt19937_64 rng(14);
  const auto data = oracle::random_small_cohort(rng, 80, 1);
  const auto f = make(data, {InstrumentFamily::linear, {0}});
  const std::vector<double> times{0.01, 0.5, 1.0, 2.0, 3.5};
  const auto res = infer(f.fit, f.events, f.data, f.inst, times);
  for (std::size_t q = 0; q < times.size(); ++q) {
    const Eigen::MatrixXd total = res.residuals.total(q);
    const double scale = std::max(1.0, total.cwiseAbs().maxCoeff());
    CHECK(res.residuals.martingale[q].colwise().sum().cwiseAbs().maxCoeff() <= 1e-10 * scale * 80);
    CHECK(total.colwise().mean().cwiseAbs().maxCoeff() <= 1e-10 * scale);
    for (int j = 0; j < 2; ++j) {
      CHECK(res.curves.sigma[j][q] >= 0.0);
      CHECK(res.curves.lower[j][q] <= res.curves.estimate[j][q]);
      CHECK(res.curves.upper[j][q] >= res.curves.estimate[j][q]);
    }
  }
  if (f.events.time(0) > 0.01) CHECK(res.curves.sigma[0][0] == 0.0);
}

TEST_CASE("critical values") {
  CHECK(normal_critical_value(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_critical_value(0.9) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK_THROWS_AS(normal_critical_value(1.0), DataError);
}

TEST_CASE("analytic variance matches the delete-one jackknife") {
  const auto config = scenario_preset("binary-iv", 400, 0.5);
  const auto sim = generate(config, 2024, 0);
  const auto f = make(sim.data);
  const std::vector<double> times{1.5};
  const auto res = infer(f.fit, f.events, f.data, f.inst, times);
  const std::size_t n = sim.data.size();
  std::array<std::vector<double>, 2> loo;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) order.push_back(k);
    const auto g = make(sim.data.select(order, false));
    for (int j = 0; j < 2; ++j) loo[j].push_back(g.fit.curve(j + 1).value_at(1.5));
  }
  for (int j = 0; j < 2; ++j) {
    const double mean = std::accumulate(loo[j].begin(), loo[j].end(), 0.0) / n;
    double sq = 0.0;
    for (double v : loo[j]) sq += (v - mean) * (v - mean);
    const double jack = sq * (n - 1.0) / n;
    const double analytic = res.curves.se[j][0] * res.curves.se[j][0];
    MESSAGE("cause " << j + 1 << " jackknife " << jack << " analytic " << analytic);
    CHECK(std::abs(analytic / jack - 1.0) < 0.25);
  }
}
