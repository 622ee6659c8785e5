#include "ivcr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivcr/cohort.hpp"
#include "ivcr/errors.hpp"
#include "ivcr/estimator.hpp"
#include "ivcr/event_table.hpp"
#include "ivcr/functionals.hpp"
#include "ivcr/inference.hpp"
#include "ivcr/instrument_model.hpp"
#include "ivcr/io.hpp"
#include "ivcr/simulation.hpp"

namespace ivcr {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

unsigned default_threads() {
  if (const char* env = std::getenv("IVCR_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError("invalid number '" + item + "' in " + flag);
    }
  }
  return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Column flags shared by fit and rr.
struct DataOptions {
  std::string input;
  ColumnMap columns;
  std::string covariate_cols;
  std::string id_col;
  std::string iv_model = "mean";
  std::string iv_covariates;
  std::optional<double> horizon;

  void add_to(CLI::App& app) {
    app.add_option("--input", input, "Cohort CSV file")->required();
    app.add_option("--time-col", columns.time, "Follow-up time column")->required();
    app.add_option("--cause-col", columns.cause, "Cause column (0 censored, 1, 2)")->required();
    app.add_option("--exposure-col", columns.exposure, "Exposure column")->required();
    app.add_option("--instrument-col", columns.instrument, "Instrument column")->required();
    app.add_option("--covariate-cols", covariate_cols, "Comma-separated covariate columns");
    app.add_option("--id-col", id_col, "Subject id column (default: row number)");
    app.add_option("--iv-model", iv_model, "Instrument model E(G|L)")
        ->check(CLI::IsMember({"mean", "linear", "logistic"}));
    app.add_option("--iv-covariates", iv_covariates,
                   "Covariates entering the instrument model (default: all covariate columns)");
    app.add_option("--horizon", horizon, "Analysis horizon (default: last event time)");
  }

  CohortDataset load() {
    columns.covariates = parse_name_list(covariate_cols);
    if (!id_col.empty()) columns.id = id_col;
    return parse_cohort_csv(input, columns);
  }

  InstrumentModelSpec instrument_spec(const CohortDataset& data) const {
    InstrumentModelSpec spec;
    spec.family = parse_instrument_family(iv_model);
    const auto names = iv_covariates.empty() ? data.covariate_names() : parse_name_list(iv_covariates);
    if (spec.family != InstrumentFamily::intercept_only) {
      for (const auto& name : names) {
        const auto& all = data.covariate_names();
        const auto it = std::find(all.begin(), all.end(), name);
        if (it == all.end()) throw DataError("instrument covariate '" + name + "' is not a covariate column");
        spec.covariate_indices.push_back(static_cast<std::size_t>(it - all.begin()));
      }
    }
    return spec;
  }

  void record(json& options) const {
    options["input"] = input;
    options["time_col"] = columns.time;
    options["cause_col"] = columns.cause;
    options["exposure_col"] = columns.exposure;
    options["instrument_col"] = columns.instrument;
    options["covariate_cols"] = covariate_cols;
    options["id_col"] = id_col;
    options["iv_model"] = iv_model;
    options["iv_covariates"] = iv_covariates;
    options["horizon"] = horizon ? json(*horizon) : json(nullptr);
  }
};

void write_manifest(const fs::path& dir, const std::string& subcommand, const json& options,
                    const std::vector<std::string>& args, const std::optional<std::string>& input,
                    std::optional<std::uint64_t> seed) {
  json m;
  m["subcommand"] = subcommand;
  m["tool_version"] = kToolVersion;
  m["timestamp"] = utc_timestamp();
  m["options"] = options;
  m["argv"] = std::vector<std::string>(args.begin() + 1, args.end());
  m["working_directory"] = fs::current_path().string();
  if (input) {
    m["input_file"] = fs::absolute(*input).string();
    m["input_sha256"] = sha256_file(*input);
  }
  m["seed"] = seed ? json(*seed) : json(nullptr);
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instrumental-variable estimation of cause-specific cumulative exposure effects"};
  app.set_version_flag("--version", std::string("ivcr ") + kToolVersion);
  app.require_subcommand(1);

  // fit
  DataOptions fit_data;
  std::string eval_times, fit_out = ".", interactions;
  double fit_level = 0.95;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate B1(t), B2(t) with pointwise confidence bands");
  fit_data.add_to(*fit_cmd);
  fit_cmd->add_option("--eval-times", eval_times, "Comma-separated band times (default: every event time)");
  fit_cmd->add_option("--level", fit_level, "Confidence level")->check(CLI::Range(0.5, 0.9999));
  fit_cmd->add_option("--interactions", interactions,
                      "Covariates interacting with the exposure; curves.csv then holds the interaction fit");
  fit_cmd->add_option("--out-dir", fit_out, "Output directory");

  // simulate
  std::string scenario = "binary-iv", time_points = "0.5,1.5,2.5", sim_out = ".";
  std::size_t sim_n = 1600, reps = 2000;
  double rho = 0.3;
  std::uint64_t sim_seed = 1;
  unsigned sim_threads = default_threads();
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study of the estimator");
  sim_cmd->add_option("--scenario", scenario)->check(CLI::IsMember({"binary-iv", "continuous-iv", "no-confounding"}));
  sim_cmd->add_option("--n", sim_n, "Sample size per replicate");
  sim_cmd->add_option("--rho", rho, "corr(X, G)");
  sim_cmd->add_option("--reps", reps, "Number of replicates");
  sim_cmd->add_option("--seed", sim_seed, "Master seed");
  sim_cmd->add_option("--time-points", time_points, "Comma-separated evaluation times");
  sim_cmd->add_option("--threads", sim_threads, "Worker threads (default: $IVCR_THREADS or all cores)");
  sim_cmd->add_option("--out-dir", sim_out, "Output directory");

  // rr
  DataOptions rr_data;
  double exposure_level = 1.0, instrument_level = 1.0;
  std::size_t boot = 500;
  std::uint64_t rr_seed = 1;
  std::string rr_times, rr_out = ".";
  unsigned rr_threads = default_threads();
  CLI::App* rr_cmd = app.add_subcommand("rr", "Relative risk of cause 1 without versus with exposure");
  rr_data.add_to(*rr_cmd);
  rr_cmd->add_option("--exposure-level", exposure_level, "Exposure level defining the subgroup");
  rr_cmd->add_option("--instrument-level", instrument_level, "Instrument level defining the subgroup");
  rr_cmd->add_option("--boot", boot, "Bootstrap replicates (0: point estimate only)");
  rr_cmd->add_option("--seed", rr_seed, "Bootstrap seed");
  rr_cmd->add_option("--time-points", rr_times, "Comma-separated times (default: subgroup event times)");
  rr_cmd->add_option("--threads", rr_threads, "Worker threads");
  rr_cmd->add_option("--out-dir", rr_out, "Output directory");

  // replay
  std::string manifest_path, replay_out;
  CLI::App* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();
  replay_cmd->add_option("--out-dir", replay_out, "Output directory (default: the recorded one)");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "ivcr " << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (auto* sub : {fit_cmd, sim_cmd, rr_cmd, replay_cmd})
      if (sub->parsed()) failed = sub;
    err << failed->help();
    return kExitValidation;
  }

  try {
    if (fit_cmd->parsed()) {
      const CohortDataset data = fit_data.load();
      const InstrumentModelSpec spec = fit_data.instrument_spec(data);
      const FittedInstrumentModel gc = fit_instrument_model(data, spec);
      const EventTable events = build_event_table(data, fit_data.horizon);
      const IvFitResult fit = fit_iv_competing(events, data, gc);
      std::vector<double> times = parse_real_list(eval_times, "--eval-times");
      if (times.empty()) times.assign(events.times().begin(), events.times().end());
      const VarianceResult var = infer(fit, events, data, gc, times, fit_level);

      const fs::path dir(fit_out);
      if (interactions.empty()) {
        write_text_file(dir / "curves.csv", curves_csv(fit));
      } else {
        std::vector<std::size_t> idx;
        for (const auto& name : parse_name_list(interactions)) {
          const auto& all = data.covariate_names();
          const auto it = std::find(all.begin(), all.end(), name);
          if (it == all.end()) throw DataError("interaction covariate '" + name + "' is not a covariate column");
          idx.push_back(static_cast<std::size_t>(it - all.begin()));
        }
        write_text_file(dir / "curves.csv", extended_curves_csv(fit_iv_extended(events, data, gc, idx)));
      }
      write_text_file(dir / "bands.csv", bands_csv(var.curves));
      json options;
      fit_data.record(options);
      options["eval_times"] = eval_times;
      options["level"] = fit_level;
      options["interactions"] = interactions;
      options["out_dir"] = fit_out;
      options["events"] = events.size();
      write_manifest(dir, "fit", options, args, fit_data.input, std::nullopt);
      out << "fit: " << data.size() << " subjects, " << events.size() << " events, horizon "
          << format_real(events.horizon()) << "; wrote " << (dir / "curves.csv").string() << '\n';
      return kExitOk;
    }

    if (sim_cmd->parsed()) {
      if (!(rho > 0.0 && rho < 1.0)) throw DataError("--rho must lie in (0, 1)");
      if (sim_n < 10) throw DataError("--n must be at least 10");
      if (reps < 1) throw DataError("--reps must be at least 1");
      ScenarioConfig config = scenario_preset(scenario, sim_n, rho);
      config.seed = sim_seed;
      MonteCarloOptions mc;
      mc.replications = reps;
      mc.time_points = parse_real_list(time_points, "--time-points");
      if (mc.time_points.empty()) throw DataError("--time-points is empty");
      mc.master_seed = sim_seed;
      mc.threads = std::max(1u, sim_threads);
      const MonteCarloSummary summary = run_monte_carlo(config, mc);

      const fs::path dir(sim_out);
      write_text_file(dir / "table.csv", monte_carlo_csv(summary));
      write_text_file(dir / "table.json", monte_carlo_json(summary, config, scenario, sim_seed));
      json options;
      options["scenario"] = scenario;
      options["n"] = sim_n;
      options["rho"] = rho;
      options["reps"] = reps;
      options["time_points"] = time_points;
      options["threads"] = mc.threads;
      options["out_dir"] = sim_out;
      write_manifest(dir, "simulate", options, args, std::nullopt, sim_seed);
      out << "simulate: " << summary.successes << "/" << summary.replications << " replicates succeeded; wrote "
          << (dir / "table.csv").string() << '\n';
      return kExitOk;
    }

    if (rr_cmd->parsed()) {
      const CohortDataset data = rr_data.load();
      const InstrumentModelSpec spec = rr_data.instrument_spec(data);
      std::vector<double> times = parse_real_list(rr_times, "--time-points");
      if (times.empty()) times = subgroup_hazards(data, exposure_level, instrument_level, rr_data.horizon).event_times;
      BootstrapOptions bo;
      bo.replicates = boot;
      bo.seed = rr_seed;
      bo.threads = std::max(1u, rr_threads);
      bo.horizon = rr_data.horizon;
      const RrCurve rr = bootstrap_rr(data, exposure_level, instrument_level, spec, times, bo);

      const fs::path dir(rr_out);
      write_text_file(dir / "rr.csv", rr_csv(rr));
      json options;
      rr_data.record(options);
      options["exposure_level"] = exposure_level;
      options["instrument_level"] = instrument_level;
      options["boot"] = boot;
      options["time_points"] = rr_times;
      options["threads"] = bo.threads;
      options["out_dir"] = rr_out;
      options["assumes_zero_cause2_effect"] = rr.assumes_zero_cause2_effect;
      options["bootstrap_failures"] = rr.failures;
      options["band_reported"] = rr.has_band;
      write_manifest(dir, "rr", options, args, rr_data.input, rr_seed);
      out << "rr: wrote " << (dir / "rr.csv").string() << '\n';
      if (boot > 0 && !rr.has_band)
        err << "warning: only " << (rr.replicates - rr.failures) << " of " << rr.replicates
            << " bootstrap replicates succeeded; band not reported\n";
      return kExitOk;
    }

    if (replay_cmd->parsed()) {
      std::ifstream in(manifest_path);
      if (!in) throw DataError("cannot open manifest '" + manifest_path + "'");
      const json m = json::parse(in);
      const fs::path cwd = m.value("working_directory", fs::current_path().string());
      auto resolve = [&](const std::string& value) {
        const fs::path p(value);
        return p.is_absolute() ? value : (cwd / p).lexically_normal().string();
      };
      std::vector<std::string> replay{args.front()};
      const auto& recorded = m.at("argv");
      for (std::size_t i = 0; i < recorded.size(); ++i) {
        const auto a = recorded[i].get<std::string>();
        const bool path_flag = a == "--input" || a == "--out-dir";
        if (a == "--out-dir" && !replay_out.empty()) {
          ++i;
          continue;
        }
        if (a.rfind("--out-dir=", 0) == 0) {
          if (replay_out.empty()) replay.push_back("--out-dir=" + resolve(a.substr(10)));
          continue;
        }
        if (a.rfind("--input=", 0) == 0) {
          replay.push_back("--input=" + resolve(a.substr(8)));
          continue;
        }
        replay.push_back(a);
        if (path_flag && i + 1 < recorded.size()) replay.push_back(resolve(recorded[++i].get<std::string>()));
      }
      const bool recorded_out = std::any_of(recorded.begin(), recorded.end(), [](const json& v) {
        const auto a = v.get<std::string>();
        return a == "--out-dir" || a.rfind("--out-dir=", 0) == 0;
      });
      if (!replay_out.empty() || !recorded_out) {
        replay.push_back("--out-dir");
        replay.push_back(replay_out.empty() ? cwd.string() : replay_out);
      }
      if (m.contains("input_sha256") && m.contains("input_file")) {
        const auto file = m.at("input_file").get<std::string>();
        if (!fs::exists(file) || sha256_file(file) != m.at("input_sha256").get<std::string>())
          throw DataError("input file '" + file + "' is missing or differs from the recorded digest");
      }
      return run_cli(replay, out, err);
    }
  } catch (const EmptySubgroup& e) {
    err << "error: " << e.what() << '\n';
    return kExitEmptySubgroup;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitSingular;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace ivcr
