#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace ivcr {

/// Right-continuous step function starting at 0. `values[k]` is the value just after
/// the jump at `times[k]`. Tied jumps are allowed; evaluation returns the value after
/// the last of them.
struct StepCurve {
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const noexcept { return times.size(); }

  double value_at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  /// Value just before t.
  double left_limit(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  double last_value() const { return values.empty() ? 0.0 : values.back(); }

  void push(double t, double value) {
    times.push_back(t);
    values.push_back(value);
  }
};

inline double curve_value_at(const StepCurve& curve, double t) { return curve.value_at(t); }

}  // namespace ivcr
