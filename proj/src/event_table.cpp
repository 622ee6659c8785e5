#include "ivcr/event_table.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ivcr/errors.hpp"

namespace ivcr {

EventTable::EventTable(const CohortDataset& data, std::optional<double> horizon) {
  const auto& subjects = data.subjects();
  const std::size_t n = subjects.size();

  std::vector<std::size_t> events;
  double last_event = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (subjects[i].cause != 0) last_event = std::max(last_event, subjects[i].time);
  }
  if (last_event < 0.0) throw DataError("no uncensored events: every subject is censored");
  if (horizon && !(*horizon > 0.0)) throw DataError("horizon must be positive");
  horizon_ = horizon.value_or(last_event);

  for (std::size_t i = 0; i < n; ++i) {
    if (subjects[i].cause != 0 && subjects[i].time <= horizon_) events.push_back(i);
  }
  if (events.empty())
    throw DataError("no uncensored events at or before horizon " + std::to_string(horizon_));

  std::sort(events.begin(), events.end(), [&](std::size_t a, std::size_t b) {
    return std::tuple(subjects[a].time, subjects[a].cause, subjects[a].id) <
           std::tuple(subjects[b].time, subjects[b].cause, subjects[b].id);
  });

  by_time_.resize(n);
  std::iota(by_time_.begin(), by_time_.end(), std::size_t{0});
  std::sort(by_time_.begin(), by_time_.end(), [&](std::size_t a, std::size_t b) {
    return std::tuple(subjects[a].time, subjects[a].id) < std::tuple(subjects[b].time, subjects[b].id);
  });
  std::vector<double> sorted_times(n);
  for (std::size_t p = 0; p < n; ++p) sorted_times[p] = subjects[by_time_[p]].time;

  times_.reserve(events.size());
  for (std::size_t e : events) {
    const double t = subjects[e].time;
    times_.push_back(t);
    subject_.push_back(e);
    cause_.push_back(subjects[e].cause);
    // First subject with T_i >= t.
    risk_begin_.push_back(static_cast<std::size_t>(
        std::lower_bound(sorted_times.begin(), sorted_times.end(), t) - sorted_times.begin()));
  }
}

std::size_t EventTable::count_through(double t) const {
  return static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
}

EventTable build_event_table(const CohortDataset& data, std::optional<double> horizon) {
  return EventTable(data, horizon);
}

}  // namespace ivcr
