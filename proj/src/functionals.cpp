#include "ivcr/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ivcr/errors.hpp"
#include "ivcr/event_table.hpp"
#include "ivcr/parallel.hpp"
#include "ivcr/random.hpp"

namespace ivcr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Summed B1 increments per distinct jump time (ties merged).
std::map<double, double> cause1_jumps(const IvFitResult& iv) {
  std::map<double, double> out;
  for (const auto& jump : iv.jumps)
    if (jump.cause == 1) out[jump.time] += jump.increment;
  return out;
}

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kNaN;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

RrCurve point_rr(const CohortDataset& data, double exposure_level, double instrument_level,
                 const InstrumentModelSpec& iv_spec, std::span<const double> times,
                 std::optional<double> horizon) {
  const FittedInstrumentModel gc = fit_instrument_model(data, iv_spec);
  const EventTable events = build_event_table(data, horizon);
  const IvFitResult iv = fit_iv_competing(events, data, gc);
  const SubgroupHazards sub = subgroup_hazards(data, exposure_level, instrument_level, events.horizon());
  return relative_risk_curve(sub, iv, times);
}

}  // namespace

SubgroupHazards subgroup_hazards(const CohortDataset& data, double exposure_level,
                                 double instrument_level, std::optional<double> horizon) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].exposure == exposure_level && data[i].instrument == instrument_level) members.push_back(i);
  if (members.empty())
    throw EmptySubgroup("subgroup X = " + std::to_string(exposure_level) +
                        ", G = " + std::to_string(instrument_level) + " is empty");

  double last_event = -1.0;
  for (std::size_t i : members)
    if (data[i].cause != 0) last_event = std::max(last_event, data[i].time);
  if (last_event < 0.0) throw EmptySubgroup("subgroup has no uncensored events");

  SubgroupHazards out;
  out.exposure_level = exposure_level;
  out.instrument_level = instrument_level;
  out.subject_count = members.size();
  out.horizon = horizon.value_or(last_event);

  std::vector<std::size_t> order = members;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data[a].time < data[b].time; });

  double lambda1 = 0.0, lambda2 = 0.0, survivor = 1.0, inc1 = 0.0, inc2 = 0.0;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double t = data[order[pos]].time;
    if (t > out.horizon) break;
    const auto at_risk = static_cast<double>(order.size() - pos);
    std::size_t d1 = 0, d2 = 0;
    std::size_t end = pos;
    while (end < order.size() && data[order[end]].time == t) {
      d1 += data[order[end]].cause == 1 ? 1 : 0;
      d2 += data[order[end]].cause == 2 ? 1 : 0;
      ++end;
    }
    if (d1 + d2 > 0) {
      const double dl1 = static_cast<double>(d1) / at_risk;
      const double dl2 = static_cast<double>(d2) / at_risk;
      out.event_times.push_back(t);
      out.hazard1_increments.push_back(dl1);
      out.hazard2_increments.push_back(dl2);
      out.survivor_left.push_back(survivor);
      inc1 += survivor * dl1;
      inc2 += survivor * dl2;
      lambda1 += dl1;
      lambda2 += dl2;
      survivor *= 1.0 - static_cast<double>(d1 + d2) / at_risk;
      out.cumulative_hazard1.push(t, lambda1);
      out.cumulative_hazard2.push(t, lambda2);
      out.survivor.push(t, survivor);
      out.incidence1.push(t, inc1);
      out.incidence2.push(t, inc2);
    }
    pos = end;
  }
  if (out.event_times.empty()) throw EmptySubgroup("subgroup has no uncensored events before the horizon");
  return out;
}

RrCurve relative_risk_curve(const SubgroupHazards& sub, const IvFitResult& iv, std::span<const double> times) {
  const double x = sub.exposure_level;
  const double limit = std::min({sub.horizon, sub.last_event_time(), iv.horizon});
  const std::map<double, double> b1_jumps = cause1_jumps(iv);

  // Merged grid: (time, dLambda1, S(s-), dB1).
  struct GridPoint {
    double time;
    double d_lambda1;
    double survivor_left;
    double d_b1;
  };
  std::vector<GridPoint> grid;
  grid.reserve(sub.event_times.size() + b1_jumps.size());
  std::size_t k = 0;
  auto b_it = b1_jumps.begin();
  while (k < sub.event_times.size() || b_it != b1_jumps.end()) {
    const double ts = k < sub.event_times.size() ? sub.event_times[k] : std::numeric_limits<double>::infinity();
    const double tb = b_it != b1_jumps.end() ? b_it->first : std::numeric_limits<double>::infinity();
    const double t = std::min(ts, tb);
    GridPoint g{t, 0.0, 0.0, 0.0};
    if (ts == t) {
      g.d_lambda1 = sub.hazard1_increments[k];
      g.survivor_left = sub.survivor_left[k];
      ++k;
    } else {
      g.survivor_left = sub.survivor.left_limit(t);
    }
    if (tb == t) {
      g.d_b1 = b_it->second;
      ++b_it;
    }
    grid.push_back(g);
  }

  RrCurve out;
  out.times.assign(times.begin(), times.end());
  for (double t : times) {
    double numerator = 0.0;
    double b1_left = 0.0;
    for (const auto& g : grid) {
      if (g.time > t) break;
      numerator += g.survivor_left * std::exp(x * b1_left) * (g.d_lambda1 - x * g.d_b1);
      b1_left += g.d_b1;
    }
    const double denominator = sub.incidence1.value_at(t);
    const bool ok = t <= limit && denominator > 0.0;
    out.defined.push_back(ok);
    out.rr.push_back(ok ? numerator / denominator : kNaN);
  }
  return out;
}

double relative_risk_numerator_bruteforce(const SubgroupHazards& sub, const IvFitResult& iv, double t) {
  const double x = sub.exposure_level;
  double total = 0.0;
  for (std::size_t k = 0; k < sub.event_times.size(); ++k) {
    const double s = sub.event_times[k];
    if (s > t) break;
    total += sub.survivor.left_limit(s) * std::exp(x * iv.curve_cause1.left_limit(s)) * sub.hazard1_increments[k];
  }
  for (const auto& jump : iv.jumps) {
    if (jump.cause != 1 || jump.time > t) continue;
    total -= sub.survivor.left_limit(jump.time) * std::exp(x * iv.curve_cause1.left_limit(jump.time)) * x *
             jump.increment;
  }
  return total;
}

RrCurve bootstrap_rr(const CohortDataset& data, double exposure_level, double instrument_level,
                     const InstrumentModelSpec& iv_spec, std::span<const double> times,
                     const BootstrapOptions& options) {
  RrCurve out = point_rr(data, exposure_level, instrument_level, iv_spec, times, options.horizon);
  if (options.replicates == 0) return out;

  const std::size_t n = data.size();
  // Replicates reuse the original horizon so every resample estimates the same curve.
  const double horizon = build_event_table(data, options.horizon).horizon();
  std::vector<std::vector<double>> draws(options.replicates);
  std::vector<char> failed(options.replicates, 0);
  parallel_for(options.replicates, options.threads, [&](std::size_t r) {
    auto engine = stream_engine(options.seed, r);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& v : idx) v = pick(engine);
    try {
      const CohortDataset resample = data.select(idx, true);
      draws[r] = point_rr(resample, exposure_level, instrument_level, iv_spec, times, horizon).rr;
    } catch (const std::exception&) {
      failed[r] = 1;
    }
  });

  out.replicates = options.replicates;
  out.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  const std::size_t successes = options.replicates - out.failures;
  out.has_band = static_cast<double>(successes) >= options.min_success_fraction * static_cast<double>(options.replicates);
  const double alpha = 1.0 - options.level;
  for (std::size_t q = 0; q < times.size(); ++q) {
    std::vector<double> values;
    for (std::size_t r = 0; r < options.replicates; ++r)
      if (!failed[r] && std::isfinite(draws[r][q])) values.push_back(draws[r][q]);
    std::sort(values.begin(), values.end());
    out.lower.push_back(out.has_band ? percentile(values, 0.5 * alpha) : kNaN);
    out.upper.push_back(out.has_band ? percentile(values, 1.0 - 0.5 * alpha) : kNaN);
  }
  return out;
}

}  // namespace ivcr
