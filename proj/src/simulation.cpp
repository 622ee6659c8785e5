#include "ivcr/simulation.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "ivcr/errors.hpp"
#include "ivcr/estimator.hpp"
#include "ivcr/event_table.hpp"
#include "ivcr/inference.hpp"
#include "ivcr/instrument_model.hpp"
#include "ivcr/parallel.hpp"
#include "ivcr/random.hpp"

namespace ivcr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_config(const ScenarioConfig& c) {
  if (c.n < 2) throw DataError("sample size must be at least 2");
  if (!(c.rho >= 0.0 && c.rho < 1.0)) throw DataError("rho must lie in [0, 1)");
  const double det = c.exposure_variance * c.confounder_variance - c.covariance * c.covariance;
  if (!(c.exposure_variance > 0.0) || !(det > 0.0))
    throw DataError("conditional covariance matrix of (X, U) is not positive definite");
  if (!(c.censor_end > 0.0) || c.censor_probability < 0.0 || c.censor_probability > 1.0)
    throw DataError("invalid censoring configuration");
}

double linear_hazard(const std::array<double, 3>& coef, double x, double u) {
  return coef[0] + coef[1] * x + coef[2] * u;
}

SimulatedCohort generate_with(const ScenarioConfig& config, std::mt19937_64& engine) {
  check_config(config);
  const double gamma = solve_gamma_for_rho(config);
  const double sx = std::sqrt(config.exposure_variance);
  const double beta_ux = config.covariance / sx;
  const double su = std::sqrt(config.confounder_variance - beta_ux * beta_ux);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<Subject> subjects(config.n);
  std::vector<double> confounder(config.n);
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < config.n; ++i) {
    const double g = config.instrument_kind == InstrumentKind::binary_half ? (coin(engine) ? 1.0 : 0.0)
                                                                            : normal(engine);
    const double z1 = normal(engine);
    const double z2 = normal(engine);
    const double x = config.exposure_mean_base + gamma * g + sx * z1;
    const double u = config.confounder_mean + beta_ux * z1 + su * z2;

    double l1 = linear_hazard(config.hazard1, x, u);
    double l2 = linear_hazard(config.hazard2, x, u);
    if (l1 < 0.0 || l2 < 0.0) ++clamped;
    l1 = std::max(0.0, l1);
    l2 = std::max(0.0, l2);
    const double total = l1 + l2;

    const double e = -std::log1p(-uniform(engine));
    const double event_time = total > 0.0 ? e / total : std::numeric_limits<double>::infinity();
    const int cause = uniform(engine) * total < l1 ? 1 : 2;
    const double c = uniform(engine) < config.censor_probability ? config.censor_end * uniform(engine)
                                                                 : config.censor_end;

    Subject& s = subjects[i];
    s.id = static_cast<std::int64_t>(i + 1);
    s.exposure = x;
    s.instrument = g;
    if (event_time <= c) {
      s.time = event_time;
      s.cause = cause;
    } else {
      s.time = c;
      s.cause = 0;
    }
    confounder[i] = u;
  }
  return SimulatedCohort{CohortDataset(std::move(subjects)), std::move(confounder), clamped};
}

struct ReplicateOutcome {
  bool ok = false;
  bool naive_ok = false;
  std::array<std::vector<double>, 2> estimate;
  std::array<std::vector<double>, 2> se;
  std::array<std::vector<double>, 2> naive;
  std::size_t clamped = 0;
};

}  // namespace

ScenarioConfig scenario_preset(const std::string& name, std::size_t n, double rho) {
  ScenarioConfig c;
  c.n = n;
  c.rho = rho;
  if (name == "binary-iv") {
    c.instrument_kind = InstrumentKind::binary_half;
    c.exposure_mean_base = 0.5;
  } else if (name == "continuous-iv") {
    c.instrument_kind = InstrumentKind::standard_normal;
    c.exposure_mean_base = 1.5;
  } else if (name == "no-confounding") {
    c.instrument_kind = InstrumentKind::binary_half;
    c.exposure_mean_base = 0.5;
    c.covariance = 0.0;
  } else {
    throw DataError("unknown scenario '" + name + "' (expected binary-iv, continuous-iv or no-confounding)");
  }
  check_config(c);
  return c;
}

double solve_gamma_for_rho(const ScenarioConfig& config) {
  if (!(config.rho >= 0.0 && config.rho < 1.0)) throw DataError("rho must lie in [0, 1)");
  const double sd_g = config.instrument_kind == InstrumentKind::binary_half ? 0.5 : 1.0;
  return config.rho * std::sqrt(config.exposure_variance) / (sd_g * std::sqrt(1.0 - config.rho * config.rho));
}

SimulatedCohort generate(const ScenarioConfig& config) {
  auto engine = stream_engine(config.seed, 0);
  return generate_with(config, engine);
}

SimulatedCohort generate(const ScenarioConfig& config, std::uint64_t master_seed, std::uint64_t replicate) {
  auto engine = stream_engine(master_seed, replicate);
  return generate_with(config, engine);
}

TrueEffect true_effect(const ScenarioConfig& config) {
  return TrueEffect{config.hazard1[1], config.hazard2[1]};
}

MonteCarloSummary run_monte_carlo(const ScenarioConfig& config, const MonteCarloOptions& options) {
  check_config(config);
  if (options.replications < 1) throw DataError("at least one replication is required");
  const auto& tp = options.time_points;
  const std::size_t nt = tp.size();
  const TrueEffect truth = true_effect(config);
  const double z = normal_critical_value(options.level);

  std::vector<ReplicateOutcome> outcomes(options.replications);
  parallel_for(options.replications, options.threads, [&](std::size_t r) {
    ReplicateOutcome& out = outcomes[r];
    const SimulatedCohort sim = generate(config, options.master_seed, r);
    out.clamped = sim.clamped;
    const CohortDataset& data = sim.data;
    std::optional<EventTable> events;
    try {
      events.emplace(build_event_table(data));
    } catch (const DataError&) {
      return;
    }
    try {
      const FittedInstrumentModel gc = fit_instrument_model(data, InstrumentModelSpec{});
      const IvFitResult fit = fit_iv_competing(*events, data, gc);
      const VarianceResult var = infer(fit, *events, data, gc, tp, options.level);
      for (int j = 0; j < 2; ++j) {
        out.estimate[j] = var.curves.estimate[j];
        out.se[j] = var.curves.se[j];
      }
      out.ok = true;
    } catch (const NumericalError&) {
    }
    try {
      const NaiveAalenResult naive = fit_naive_aalen(*events, data);
      for (int j = 0; j < 2; ++j)
        for (double t : tp) out.naive[j].push_back(naive.exposure_curve(j + 1).value_at(t));
      out.naive_ok = true;
    } catch (const NumericalError&) {
    }
  });

  MonteCarloSummary s;
  s.time_points = tp;
  s.replications = options.replications;
  for (const auto& o : outcomes) {
    s.successes += o.ok ? 1 : 0;
    s.naive_failures += o.naive_ok ? 0 : 1;
    s.clamped += o.clamped;
  }
  s.failures = s.replications - s.successes;
  const double m = static_cast<double>(s.successes);
  for (int j = 0; j < 2; ++j) {
    for (std::size_t q = 0; q < nt; ++q) {
      const double target = truth.cause(j + 1, tp[q]);
      double sum = 0.0, sum_se = 0.0, covered = 0.0, naive_sum = 0.0, naive_count = 0.0;
      for (const auto& o : outcomes) {
        if (o.naive_ok) {
          naive_sum += o.naive[j][q];
          naive_count += 1.0;
        }
        if (!o.ok) continue;
        sum += o.estimate[j][q];
        sum_se += o.se[j][q];
        covered += std::abs(o.estimate[j][q] - target) <= z * o.se[j][q] ? 1.0 : 0.0;
      }
      const double mean = m > 0 ? sum / m : kNaN;
      double ss = 0.0;
      for (const auto& o : outcomes)
        if (o.ok) ss += (o.estimate[j][q] - mean) * (o.estimate[j][q] - mean);
      s.bias[j].push_back(mean - target);
      s.empirical_sd[j].push_back(s.successes >= 2 ? std::sqrt(ss / (m - 1.0)) : kNaN);
      s.mean_se[j].push_back(m > 0 ? sum_se / m : kNaN);
      s.coverage[j].push_back(s.successes >= 2 ? covered / m : kNaN);
      s.naive_bias[j].push_back(naive_count > 0 ? naive_sum / naive_count - target : kNaN);
    }
  }
  return s;
}

RrScenarioConfig hip_analog_config(std::size_t n) {
  RrScenarioConfig c;
  c.n = n;
  c.compliance_intercept = 0.9;
  c.compliance_slope = -0.6;
  c.hazard1_intercept = 0.02;
  c.hazard1_confounder = 0.02;
  c.effect = -0.014532;
  c.change_time = 6.41;
  c.hazard2_intercept = 0.03;
  c.hazard2_confounder = 0.04;
  c.censor_probability = 0.2;
  c.censor_max = 11.0;
  return c;
}

namespace {

CohortDataset generate_rr_with(const RrScenarioConfig& c, std::mt19937_64& engine) {
  if (c.n < 2) throw DataError("sample size must be at least 2");
  const double p_lo = c.compliance_intercept + std::min(0.0, c.compliance_slope);
  const double p_hi = c.compliance_intercept + std::max(0.0, c.compliance_slope);
  if (p_lo < 0.0 || p_hi > 1.0) throw DataError("compliance probability leaves [0, 1]");
  const double min_l1 = c.hazard1_intercept + std::min(0.0, c.hazard1_confounder) + std::min(0.0, c.effect);
  const double min_l2 = c.hazard2_intercept + std::min(0.0, c.hazard2_confounder);
  if (min_l1 < 0.0 || min_l2 < 0.0) throw DataError("scenario hazards must be nonnegative");

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Subject> subjects(c.n);
  for (std::size_t i = 0; i < c.n; ++i) {
    const double g = uniform(engine) < c.instrument_probability ? 1.0 : 0.0;
    const double u = uniform(engine);
    const double x = (g == 1.0 && uniform(engine) < c.compliance_intercept + c.compliance_slope * u) ? 1.0 : 0.0;
    const double l1_early = c.hazard1_intercept + c.hazard1_confounder * u + c.effect * x;
    const double l1_late = c.hazard1_intercept + c.hazard1_confounder * u;
    const double l2 = c.hazard2_intercept + c.hazard2_confounder * u;
    const double total_early = l1_early + l2;
    const double total_late = l1_late + l2;

    const double e = -std::log1p(-uniform(engine));
    double event_time;
    double p1;
    if (e < total_early * c.change_time) {
      event_time = e / total_early;
      p1 = l1_early / total_early;
    } else {
      event_time = c.change_time + (e - total_early * c.change_time) / total_late;
      p1 = l1_late / total_late;
    }
    const int cause = uniform(engine) < p1 ? 1 : 2;
    const double cens = uniform(engine) < c.censor_probability ? c.censor_max * uniform(engine) : c.censor_max;

    Subject& s = subjects[i];
    s.id = static_cast<std::int64_t>(i + 1);
    s.exposure = x;
    s.instrument = g;
    s.time = std::min(event_time, cens);
    s.cause = event_time <= cens ? cause : 0;
  }
  return CohortDataset(std::move(subjects));
}

}  // namespace

CohortDataset generate_rr_scenario(const RrScenarioConfig& config) {
  auto engine = stream_engine(config.seed, 0);
  return generate_rr_with(config, engine);
}

CohortDataset generate_rr_scenario(const RrScenarioConfig& config, std::uint64_t master_seed,
                                   std::uint64_t replicate) {
  auto engine = stream_engine(master_seed, replicate);
  return generate_rr_with(config, engine);
}

}  // namespace ivcr
