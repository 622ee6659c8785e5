#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "ivcr/cli.hpp"
#include "ivcr/simulation.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ivcr");
  std::ostringstream out, err;
  const int code = ivcr::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ivcr_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kFixture =
    "id,time,cause,X,G\n"
    "1,1.0,1,1,1\n"
    "2,2.0,2,1,0\n"
    "3,3.0,0,0,1\n"
    "4,2.5,1,2,0\n";

std::vector<std::string> fit_args(const fs::path& input, const fs::path& out) {
  return {"fit", "--input", input.string(), "--time-col", "time", "--cause-col", "cause", "--exposure-col", "X",
          "--instrument-col", "G", "--id-col", "id", "--out-dir", out.string()};
}

// Writes a simulated binary-exposure cohort for the rr subcommand.
fs::path rr_fixture(const fs::path& dir) {
  ivcr::RrScenarioConfig c;
  c.n = 600;
  const auto data = ivcr::generate_rr_scenario(c, 3, 0);
  std::ostringstream csv;
  csv.precision(17);
  csv << "id,time,cause,X,G\n";
  for (const auto& s : data.subjects())
    csv << s.id << ',' << s.time << ',' << s.cause << ',' << s.exposure << ',' << s.instrument << '\n';
  const auto path = dir / "rr_input.csv";
  write(path, csv.str());
  return path;
}

}  // namespace

TEST_CASE("fit writes curves, bands and manifest") {
  const auto dir = scratch("fit");
  write(dir / "in.csv", kFixture);
  const auto r = cli(fit_args(dir / "in.csv", dir / "out"));
  REQUIRE(r.code == 0);
  const auto curves = slurp(dir / "out" / "curves.csv");
  CHECK(curves.rfind("time,B1,B2\n0,0,0\n1,-0.5,0\n", 0) == 0);
  std::istringstream lines(curves);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[4].rfind("2.5,", 0) == 0);
  CHECK(fs::exists(dir / "out" / "bands.csv"));
  CHECK(slurp(dir / "out" / "bands.csv").rfind("time,B1,se1,lo1,hi1,B2,se2,lo2,hi2\n", 0) == 0);
  CHECK(slurp(dir / "out" / "manifest.json").find("input_sha256") != std::string::npos);
}

TEST_CASE("fit is deterministic apart from the manifest timestamp") {
  const auto dir = scratch("determinism");
  write(dir / "in.csv", kFixture);
  REQUIRE(cli(fit_args(dir / "in.csv", dir / "a")).code == 0);
  REQUIRE(cli(fit_args(dir / "in.csv", dir / "b")).code == 0);
  CHECK(slurp(dir / "a" / "curves.csv") == slurp(dir / "b" / "curves.csv"));
  CHECK(slurp(dir / "a" / "bands.csv") == slurp(dir / "b" / "bands.csv"));
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  write(dir / "in.csv", kFixture);
  auto args = fit_args(dir / "in.csv", dir / "out");
  args.erase(args.begin() + 9, args.begin() + 11);  // drop --instrument-col G
  const auto missing = cli(args);
  CHECK(missing.code == 2);
  CHECK(missing.err.find("--instrument-col") != std::string::npos);

  write(dir / "const.csv", "id,time,cause,X,G\n1,1,1,1,1\n2,2,2,0.5,1\n3,3,0,2,1\n");
  const auto singular = cli(fit_args(dir / "const.csv", dir / "out"));
  CHECK(singular.code == 3);
  CHECK(singular.err.find("IV denominator") != std::string::npos);

  write(dir / "bad.csv", "id,time,cause,X,G\n1,1,1,1,1\n2,2,7,0.5,0\n");
  const auto bad = cli(fit_args(dir / "bad.csv", dir / "out"));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("row 2") != std::string::npos);

  const auto rr = cli({"rr", "--input", (dir / "in.csv").string(), "--time-col", "time", "--cause-col", "cause",
                       "--exposure-col", "X", "--instrument-col", "G", "--exposure-level", "5", "--out-dir",
                       (dir / "out").string()});
  CHECK(rr.code == 4);
  CHECK(cli({"simulate", "--rho", "1.5", "--out-dir", (dir / "out").string()}).code == 2);
  CHECK(cli({"nonsense"}).code == 2);
}

TEST_CASE("simulate with one replicate reports NA spread") {
  const auto dir = scratch("sim1");
  const auto r = cli({"simulate", "--n", "300", "--reps", "1", "--rho", "0.5", "--seed", "4", "--out-dir",
                      dir.string()});
  REQUIRE(r.code == 0);
  const auto table = slurp(dir / "table.csv");
  CHECK(table.find("sd_B1,NA,NA,NA") != std::string::npos);
  CHECK(table.rfind("statistic,0.5,1.5,2.5\n", 0) == 0);
}

TEST_CASE("simulate output does not depend on threads") {
  const auto dir = scratch("simthreads");
  const std::vector<std::string> base{"simulate", "--n", "300", "--reps", "6", "--rho", "0.5", "--seed", "9"};
  auto a = base, b = base;
  a.insert(a.end(), {"--threads", "1", "--out-dir", (dir / "a").string()});
  b.insert(b.end(), {"--threads", "8", "--out-dir", (dir / "b").string()});
  REQUIRE(cli(a).code == 0);
  REQUIRE(cli(b).code == 0);
  CHECK(slurp(dir / "a" / "table.csv") == slurp(dir / "b" / "table.csv"));
  CHECK(slurp(dir / "a" / "table.json") == slurp(dir / "b" / "table.json"));
}

TEST_CASE("rr without bootstrap has no band columns") {
  const auto dir = scratch("rr");
  const auto input = rr_fixture(dir);
  const std::vector<std::string> base{"rr", "--input", input.string(), "--time-col", "time", "--cause-col", "cause",
                                      "--exposure-col", "X", "--instrument-col", "G", "--time-points", "1,2,3"};
  auto a = base;
  a.insert(a.end(), {"--boot", "0", "--out-dir", (dir / "a").string()});
  REQUIRE(cli(a).code == 0);
  const auto csv = slurp(dir / "a" / "rr.csv");
  CHECK(csv.rfind("time,rr\n", 0) == 0);
  auto b = base;
  b.insert(b.end(), {"--boot", "20", "--seed", "3", "--out-dir", (dir / "b").string()});
  REQUIRE(cli(b).code == 0);
  CHECK(slurp(dir / "b" / "rr.csv").rfind("time,rr,lo,hi,n_replicates\n", 0) == 0);
}

TEST_CASE("replay reproduces outputs") {
  const auto dir = scratch("replay");
  write(dir / "in.csv", kFixture);
  REQUIRE(cli(fit_args(dir / "in.csv", dir / "first")).code == 0);
  const auto r = cli({"replay", "--manifest", (dir / "first" / "manifest.json").string(), "--out-dir",
                      (dir / "second").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "first" / "curves.csv") == slurp(dir / "second" / "curves.csv"));
  CHECK(slurp(dir / "first" / "bands.csv") == slurp(dir / "second" / "bands.csv"));

  const auto sim = cli({"simulate", "--n", "200", "--reps", "3", "--rho", "0.5", "--out-dir", (dir / "s1").string()});
  REQUIRE(sim.code == 0);
  REQUIRE(cli({"replay", "--manifest", (dir / "s1" / "manifest.json").string(), "--out-dir", (dir / "s2").string()})
              .code == 0);
  CHECK(slurp(dir / "s1" / "table.csv") == slurp(dir / "s2" / "table.csv"));

  write(dir / "in.csv", std::string(kFixture) + "5,4.0,0,1,1\n");
  CHECK(cli({"replay", "--manifest", (dir / "first" / "manifest.json").string(), "--out-dir",
             (dir / "third").string()})
            .code == 2);
}

TEST_CASE("installed binary exits with the same codes") {
  const std::string cmd = std::string(IVCR_CLI_PATH) + " fit --input /nonexistent.csv --time-col t --cause-col c "
                                                       "--exposure-col x --instrument-col g > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
