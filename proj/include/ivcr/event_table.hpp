#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ivcr/cohort.hpp"

namespace ivcr {

/**
 * Observed event times in processing order together with their risk sets.
 *
 * Events are ordered by (time, cause, subject id). Tied times therefore appear as
 * consecutive entries with equal `times[k]`; with continuous data all times are
 * distinct. Risk sets use the closed convention R_i(t) = I(t <= T_i) and are stored
 * as suffixes of the subjects sorted by observed time, which keeps them nested.
 */
class EventTable {
 public:
  EventTable(const CohortDataset& data, std::optional<double> horizon);

  std::size_t size() const noexcept { return times_.size(); }
  std::size_t subject_count() const noexcept { return by_time_.size(); }
  double horizon() const noexcept { return horizon_; }

  std::span<const double> times() const noexcept { return times_; }
  std::span<const std::size_t> subjects() const noexcept { return subject_; }
  std::span<const int> causes() const noexcept { return cause_; }

  double time(std::size_t k) const { return times_[k]; }
  std::size_t subject(std::size_t k) const { return subject_[k]; }
  int cause(std::size_t k) const { return cause_[k]; }

  /// Indices of subjects at risk at the k-th event.
  std::span<const std::size_t> at_risk(std::size_t k) const {
    return std::span<const std::size_t>(by_time_).subspan(risk_begin_[k]);
  }
  std::size_t at_risk_count(std::size_t k) const { return by_time_.size() - risk_begin_[k]; }

  /// Number of events with time <= t.
  std::size_t count_through(double t) const;

 private:
  std::vector<double> times_;
  std::vector<std::size_t> subject_;
  std::vector<int> cause_;
  std::vector<std::size_t> by_time_;     // subject indices sorted by (time, id)
  std::vector<std::size_t> risk_begin_;  // first position in by_time_ at risk for event k
  double horizon_ = 0.0;
};

/// Throws DataError when no uncensored event falls in [0, horizon]. Horizon defaults
/// to the last uncensored event time.
EventTable build_event_table(const CohortDataset& data, std::optional<double> horizon = std::nullopt);

}  // namespace ivcr
