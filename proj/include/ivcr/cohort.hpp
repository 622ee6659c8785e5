#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ivcr {

/// One individual: observed time T = min(T~, C), cause (0 = censored), exposure X,
/// instrument G and baseline covariates L.
struct Subject {
  std::int64_t id = 0;
  double time = 0.0;
  int cause = 0;
  double exposure = 0.0;
  double instrument = 0.0;
  std::vector<double> covariates;
};

/**
 * Validated cohort. Construction checks every row invariant (finite nonnegative
 * time, cause in {0,1,2}, common covariate width, unique ids); the object is
 * immutable afterwards.
 */
class CohortDataset {
 public:
  CohortDataset(std::vector<Subject> subjects, std::vector<std::string> covariate_names = {});

  std::size_t size() const noexcept { return subjects_.size(); }
  std::size_t covariate_count() const noexcept { return covariate_names_.size(); }
  const std::vector<Subject>& subjects() const noexcept { return subjects_; }
  const Subject& operator[](std::size_t i) const { return subjects_[i]; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }

  // Column views, materialised once at construction.
  std::span<const double> times() const noexcept { return times_; }
  std::span<const double> exposures() const noexcept { return exposures_; }
  std::span<const double> instruments() const noexcept { return instruments_; }
  std::span<const int> causes() const noexcept { return causes_; }

  std::size_t event_count() const noexcept;

  /// Same subjects in the order given by `order` (indices into this dataset; repeats allowed).
  /// Ids are reassigned 1..n when `renumber` is set so that resamples stay valid.
  CohortDataset select(std::span<const std::size_t> order, bool renumber) const;

  /// Copy with a transformed instrument or cause column, used by invariance checks.
  CohortDataset with_instrument(std::span<const double> instrument) const;
  CohortDataset with_causes(std::span<const int> causes) const;

 private:
  std::vector<Subject> subjects_;
  std::vector<std::string> covariate_names_;
  std::vector<double> times_;
  std::vector<double> exposures_;
  std::vector<double> instruments_;
  std::vector<int> causes_;
};

/// Column names used to project a CSV file onto the cohort model. Unmapped columns are ignored.
struct ColumnMap {
  std::string time = "time";
  std::string cause = "cause";
  std::string exposure = "exposure";
  std::string instrument = "instrument";
  std::vector<std::string> covariates;
  std::optional<std::string> id;  // row number (1-based) when absent
};

CohortDataset parse_cohort_csv(const std::filesystem::path& path, const ColumnMap& columns);
CohortDataset parse_cohort_csv_text(const std::string& text, const ColumnMap& columns);

}  // namespace ivcr
