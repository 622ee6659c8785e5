#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "ivcr/cohort.hpp"
#include "ivcr/errors.hpp"
#include "ivcr/event_table.hpp"
#include "oracles.hpp"

using namespace ivcr;

namespace {

const char* kFourRows =
    "id,time,cause,X,G,extra\n"
    "1,1.0,1,1,1,a\n"
    "2,2.0,2,1,0,b\n"
    "3,3.0,0,0,1,c\n"
    "4,2.5,1,2,0,d\n";

ColumnMap four_columns() {
  ColumnMap m;
  m.exposure = "X";
  m.instrument = "G";
  m.id = "id";
  return m;
}

std::size_t failing_row(const std::string& text, const ColumnMap& columns) {
  try {
    parse_cohort_csv_text(text, columns);
  } catch (const CsvRowError& e) {
    return e.row();
  }
  return 0;
}

}  // namespace

TEST_CASE("csv parsing ignores unmapped columns") {
  const auto data = parse_cohort_csv_text(kFourRows, four_columns());
  REQUIRE(data.size() == 4);
  CHECK(data[3].id == 4);
  CHECK(data[3].time == 2.5);
  CHECK(data[3].exposure == 2.0);
  CHECK(data[1].cause == 2);
  CHECK(data.event_count() == 3);
}

TEST_CASE("csv parsing without id column numbers rows") {
  auto columns = four_columns();
  columns.id.reset();
  const auto data = parse_cohort_csv_text(kFourRows, columns);
  CHECK(data[0].id == 1);
  CHECK(data[3].id == 4);
}

TEST_CASE("csv parsing reads covariates by name") {
  const std::string text = "time,cause,exposure,instrument,age,sex\n1,1,0.5,1,60,0\n2,0,0.1,0,70,1\n";
  ColumnMap columns;
  columns.covariates = {"sex", "age"};
  const auto data = parse_cohort_csv_text(text, columns);
  REQUIRE(data.covariate_count() == 2);
  CHECK(data[1].covariates[0] == 1.0);
  CHECK(data[1].covariates[1] == 70.0);
  CHECK(data.covariate_names()[1] == "age");
}

TEST_CASE("csv validation names the offending row") {
  const auto cols = four_columns();
  CHECK(failing_row("id,time,cause,X,G\n1,1,1,1,1\n2,1,3,1,0\n", cols) == 2);
  CHECK(failing_row("id,time,cause,X,G\n1,1,1,1,1\n2,-1,1,1,0\n", cols) == 2);
  CHECK(failing_row("id,time,cause,X,G\n1,abc,1,1,1\n", cols) == 1);
  CHECK(failing_row("id,time,cause,X,G\n1,1,1,,1\n", cols) == 1);
  CHECK(failing_row("id,time,cause,X,G\n1,1,1,1,1\n2,2,0,1,0\n3,nan,1,1,1\n", cols) == 3);
  CHECK(failing_row("id,time,cause,X,G\n1,1,1.5,1,1\n", cols) == 1);
  CHECK(failing_row("id,time,cause,X,G\n1,1,1,1\n", cols) == 1);
}

TEST_CASE("csv validation rejects missing columns and duplicate ids") {
  auto cols = four_columns();
  cols.instrument = "Z";
  CHECK_THROWS_AS(parse_cohort_csv_text(kFourRows, cols), DataError);
  CHECK_THROWS_AS(parse_cohort_csv_text("id,time,cause,X,G\n1,1,1,1,1\n1,2,0,1,0\n", four_columns()), DataError);
  CHECK_THROWS_AS(parse_cohort_csv_text("id,time,cause,X,G\n", four_columns()), DataError);
}

TEST_CASE("event table of the four-subject example") {
  const auto data = oracle::four_subjects();
  const auto table = build_event_table(data);
  REQUIRE(table.size() == 3);
  CHECK(table.time(0) == 1.0);
  CHECK(table.time(1) == 2.0);
  CHECK(table.time(2) == 2.5);
  CHECK(table.cause(1) == 2);
  CHECK(table.subject(2) == 3);
  CHECK(table.at_risk_count(0) == 4);
  CHECK(table.at_risk_count(1) == 3);
  CHECK(table.at_risk_count(2) == 2);
  CHECK(table.horizon() == 2.5);
  CHECK(table.count_through(2.2) == 2);
  CHECK(table.count_through(0.5) == 0);
}

TEST_CASE("risk sets are closed at the event time and nested") {
  std::vector<Subject> s(3);
  s[0] = {1, 1.0, 1, 1.0, 1.0, {}};
  s[1] = {2, 1.0, 0, 1.0, 0.0, {}};  // censored at the event time: still at risk
  s[2] = {3, 2.0, 1, 0.5, 0.0, {}};
  const auto table = build_event_table(CohortDataset(s));
  CHECK(table.at_risk_count(0) == 3);
  CHECK(table.at_risk_count(1) == 1);

  std::mt19937_64 rng(3);
  const auto big = oracle::random_small_cohort(rng, 60);
  const auto t = build_event_table(big);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const auto a = t.at_risk(k);
    const auto b = t.at_risk(k + 1);
    CHECK(b.size() <= a.size());
    CHECK(std::equal(b.begin(), b.end(), a.end() - static_cast<std::ptrdiff_t>(b.size())));
    for (auto i : a) CHECK(big[i].time >= t.time(k));
    std::size_t expected = 0;
    for (std::size_t i = 0; i < big.size(); ++i) expected += big[i].time >= t.time(k);
    CHECK(a.size() == expected);
  }
}

TEST_CASE("tied events are ordered by cause then id") {
  std::vector<Subject> s(4);
  s[0] = {9, 1.0, 2, 1.0, 1.0, {}};
  s[1] = {5, 1.0, 1, 1.0, 0.0, {}};
  s[2] = {2, 1.0, 2, 0.5, 0.0, {}};
  s[3] = {1, 2.0, 0, 0.5, 1.0, {}};
  const auto table = build_event_table(CohortDataset(s));
  REQUIRE(table.size() == 3);
  CHECK(table.subject(0) == 1);
  CHECK(table.subject(1) == 2);
  CHECK(table.subject(2) == 0);
  for (std::size_t k = 0; k < 3; ++k) CHECK(table.at_risk_count(k) == 4);
}

TEST_CASE("horizon truncates events and all-censored data is rejected") {
  const auto data = oracle::four_subjects();
  CHECK(build_event_table(data, 2.2).size() == 2);
  CHECK_THROWS_AS(build_event_table(data, 0.5), DataError);
  std::vector<Subject> s(2);
  s[0] = {1, 1.0, 0, 1.0, 1.0, {}};
  s[1] = {2, 2.0, 0, 1.0, 0.0, {}};
  CHECK_THROWS_AS(build_event_table(CohortDataset(s)), DataError);
}

TEST_CASE("event table does not depend on row order") {
  std::mt19937_64 rng(5);
  const auto data = oracle::random_small_cohort(rng, 30);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto shuffled = data.select(order, false);
  const auto a = build_event_table(data);
  const auto b = build_event_table(shuffled);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.time(k) == b.time(k));
    CHECK(data[a.subject(k)].id == shuffled[b.subject(k)].id);
    CHECK(a.at_risk_count(k) == b.at_risk_count(k));
  }
}

TEST_CASE("dataset rejects invalid subjects") {
  std::vector<Subject> s(1);
  s[0] = {1, 1.0, 4, 1.0, 1.0, {}};
  CHECK_THROWS_AS(CohortDataset{s}, DataError);
  s[0] = {1, std::numeric_limits<double>::infinity(), 1, 1.0, 1.0, {}};
  CHECK_THROWS_AS(CohortDataset{s}, DataError);
  s = {{1, 1.0, 1, 1.0, 1.0, {1.0}}, {2, 1.0, 1, 1.0, 1.0, {1.0, 2.0}}};
  CHECK_THROWS_AS(CohortDataset{s}, DataError);
}
