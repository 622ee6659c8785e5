#include "ivcr/cohort.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ivcr/errors.hpp"

namespace ivcr {

namespace {

void validate(const Subject& s, std::size_t width, std::size_t row) {
  if (!std::isfinite(s.time) || s.time < 0.0)
    throw CsvRowError(row, "time must be finite and nonnegative, got " + std::to_string(s.time));
  if (s.cause < 0 || s.cause > 2)
    throw CsvRowError(row, "cause must be 0, 1 or 2, got " + std::to_string(s.cause));
  if (!std::isfinite(s.exposure)) throw CsvRowError(row, "exposure is not finite");
  if (!std::isfinite(s.instrument)) throw CsvRowError(row, "instrument is not finite");
  if (s.covariates.size() != width)
    throw CsvRowError(row, "expected " + std::to_string(width) + " covariates, got " +
                               std::to_string(s.covariates.size()));
  for (double v : s.covariates)
    if (!std::isfinite(v)) throw CsvRowError(row, "covariate is not finite");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string cell = trim(raw);
  if (cell.empty()) throw CsvRowError(row, "missing value in column '" + column + "'");
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw CsvRowError(row, "non-numeric value '" + cell + "' in column '" + column + "'");
  return value;
}

long long parse_integer(const std::string& raw, std::size_t row, const std::string& column) {
  const double v = parse_real(raw, row, column);
  if (v != std::floor(v) || std::abs(v) > 9.0e15)
    throw CsvRowError(row, "column '" + column + "' must hold an integer, got '" + trim(raw) + "'");
  return static_cast<long long>(v);
}

}  // namespace

CohortDataset::CohortDataset(std::vector<Subject> subjects, std::vector<std::string> covariate_names)
    : subjects_(std::move(subjects)), covariate_names_(std::move(covariate_names)) {
  if (subjects_.empty()) throw DataError("cohort is empty");
  const std::size_t width = subjects_.front().covariates.size();
  if (covariate_names_.empty() && width > 0) {
    for (std::size_t c = 0; c < width; ++c) covariate_names_.push_back("L" + std::to_string(c + 1));
  }
  if (covariate_names_.size() != width)
    throw DataError("covariate name count does not match covariate width");
  std::unordered_set<std::int64_t> ids;
  ids.reserve(subjects_.size());
  times_.reserve(subjects_.size());
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const Subject& s = subjects_[i];
    validate(s, width, i + 1);
    if (!ids.insert(s.id).second)
      throw CsvRowError(i + 1, "duplicate subject id " + std::to_string(s.id));
    times_.push_back(s.time);
    exposures_.push_back(s.exposure);
    instruments_.push_back(s.instrument);
    causes_.push_back(s.cause);
  }
}

std::size_t CohortDataset::event_count() const noexcept {
  std::size_t count = 0;
  for (int c : causes_) count += c != 0 ? 1 : 0;
  return count;
}

CohortDataset CohortDataset::select(std::span<const std::size_t> order, bool renumber) const {
  std::vector<Subject> out;
  out.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.push_back(subjects_.at(order[i]));
    if (renumber) out.back().id = static_cast<std::int64_t>(i + 1);
  }
  return CohortDataset(std::move(out), covariate_names_);
}

CohortDataset CohortDataset::with_instrument(std::span<const double> instrument) const {
  if (instrument.size() != size()) throw DataError("instrument column has wrong length");
  std::vector<Subject> out = subjects_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].instrument = instrument[i];
  return CohortDataset(std::move(out), covariate_names_);
}

CohortDataset CohortDataset::with_causes(std::span<const int> causes) const {
  if (causes.size() != size()) throw DataError("cause column has wrong length");
  std::vector<Subject> out = subjects_;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].cause = causes[i];
  return CohortDataset(std::move(out), covariate_names_);
}

CohortDataset parse_cohort_csv_text(const std::string& text, const ColumnMap& columns) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty; a header row is required");
  std::vector<std::string> header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) position.emplace(trim(header[c]), c);

  auto locate = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };
  const std::size_t time_col = locate(columns.time);
  const std::size_t cause_col = locate(columns.cause);
  const std::size_t exposure_col = locate(columns.exposure);
  const std::size_t instrument_col = locate(columns.instrument);
  std::vector<std::size_t> covariate_cols;
  for (const auto& name : columns.covariates) covariate_cols.push_back(locate(name));
  std::optional<std::size_t> id_col;
  if (columns.id) id_col = locate(*columns.id);

  std::vector<Subject> subjects;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size())
      throw CsvRowError(row, "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(cells.size()));
    Subject s;
    s.id = id_col ? parse_integer(cells[*id_col], row, *columns.id) : static_cast<std::int64_t>(row);
    s.time = parse_real(cells[time_col], row, columns.time);
    s.cause = static_cast<int>(parse_integer(cells[cause_col], row, columns.cause));
    s.exposure = parse_real(cells[exposure_col], row, columns.exposure);
    s.instrument = parse_real(cells[instrument_col], row, columns.instrument);
    for (std::size_t c = 0; c < covariate_cols.size(); ++c)
      s.covariates.push_back(parse_real(cells[covariate_cols[c]], row, columns.covariates[c]));
    validate(s, covariate_cols.size(), row);
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw DataError("CSV input has a header but no data rows");
  return CohortDataset(std::move(subjects), columns.covariates);
}

CohortDataset parse_cohort_csv(const std::filesystem::path& path, const ColumnMap& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_cohort_csv_text(buffer.str(), columns);
}

}  // namespace ivcr
