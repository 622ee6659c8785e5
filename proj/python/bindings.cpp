#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ivcr/cli.hpp"
#include "ivcr/cohort.hpp"
#include "ivcr/errors.hpp"
#include "ivcr/estimator.hpp"
#include "ivcr/event_table.hpp"
#include "ivcr/functionals.hpp"
#include "ivcr/inference.hpp"
#include "ivcr/instrument_model.hpp"
#include "ivcr/simulation.hpp"

namespace py = pybind11;
using namespace py::literals;

namespace {

template <class T>
py::array_t<T> to_array(std::span<const T> values) {
  return py::array_t<T>(static_cast<py::ssize_t>(values.size()), values.data());
}

ivcr::CohortDataset make_dataset(const std::vector<double>& time, const std::vector<int>& cause,
                                 const std::vector<double>& exposure, const std::vector<double>& instrument,
                                 std::optional<Eigen::MatrixXd> covariates,
                                 std::vector<std::string> covariate_names,
                                 std::optional<std::vector<std::int64_t>> ids) {
  const std::size_t n = time.size();
  if (cause.size() != n || exposure.size() != n || instrument.size() != n)
    throw ivcr::DataError("time, cause, exposure and instrument must have equal length");
  if (covariates && static_cast<std::size_t>(covariates->rows()) != n)
    throw ivcr::DataError("covariates must have one row per subject");
  if (ids && ids->size() != n) throw ivcr::DataError("ids must have one entry per subject");
  std::vector<ivcr::Subject> subjects(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = subjects[i];
    s.id = ids ? (*ids)[i] : static_cast<std::int64_t>(i + 1);
    s.time = time[i];
    s.cause = cause[i];
    s.exposure = exposure[i];
    s.instrument = instrument[i];
    if (covariates)
      for (Eigen::Index c = 0; c < covariates->cols(); ++c)
        s.covariates.push_back((*covariates)(static_cast<Eigen::Index>(i), c));
  }
  return ivcr::CohortDataset(std::move(subjects), std::move(covariate_names));
}

py::dict curves_dict(const ivcr::VarianceCurves& v) {
  py::dict d;
  d["times"] = v.times;
  d["level"] = v.level;
  for (int j = 0; j < 2; ++j) {
    const std::string k = std::to_string(j + 1);
    d[("B" + k).c_str()] = v.estimate[j];
    d[("sigma" + k).c_str()] = v.sigma[j];
    d[("se" + k).c_str()] = v.se[j];
    d[("lo" + k).c_str()] = v.lower[j];
    d[("hi" + k).c_str()] = v.upper[j];
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_ivcr, m) {
  m.doc() = "Instrumental-variable estimation of cause-specific cumulative exposure effects "
            "under competing risks.";
  m.attr("__version__") = ivcr::kToolVersion;

  py::register_exception<ivcr::SingularDenominator>(m, "SingularDenominatorError", PyExc_ArithmeticError);
  py::register_exception<ivcr::DataError>(m, "DataError", PyExc_ValueError);

  py::class_<ivcr::CohortDataset>(m, "CohortDataset")
      .def(py::init(&make_dataset), "time"_a, "cause"_a, "exposure"_a, "instrument"_a,
           "covariates"_a = py::none(), "covariate_names"_a = std::vector<std::string>{}, "ids"_a = py::none())
      .def("__len__", &ivcr::CohortDataset::size)
      .def_property_readonly("covariate_names", &ivcr::CohortDataset::covariate_names)
      .def_property_readonly("times", [](const ivcr::CohortDataset& d) { return to_array(d.times()); })
      .def_property_readonly("causes", [](const ivcr::CohortDataset& d) { return to_array(d.causes()); })
      .def_property_readonly("exposures", [](const ivcr::CohortDataset& d) { return to_array(d.exposures()); })
      .def_property_readonly("instruments", [](const ivcr::CohortDataset& d) { return to_array(d.instruments()); })
      .def_property_readonly("event_count", &ivcr::CohortDataset::event_count);

  m.def(
      "parse_cohort_csv",
      [](const std::filesystem::path& path, const std::string& time, const std::string& cause,
         const std::string& exposure, const std::string& instrument, std::vector<std::string> covariates,
         std::optional<std::string> id) {
        ivcr::ColumnMap columns{time, cause, exposure, instrument, std::move(covariates), std::move(id)};
        return ivcr::parse_cohort_csv(path, columns);
      },
      "path"_a, "time"_a = "time", "cause"_a = "cause", "exposure"_a = "exposure",
      "instrument"_a = "instrument", "covariates"_a = std::vector<std::string>{}, "id"_a = py::none());

  py::class_<ivcr::EventTable>(m, "EventTable")
      .def("__len__", &ivcr::EventTable::size)
      .def_property_readonly("horizon", &ivcr::EventTable::horizon)
      .def_property_readonly("times", [](const ivcr::EventTable& e) { return to_array(e.times()); })
      .def_property_readonly("causes", [](const ivcr::EventTable& e) { return to_array(e.causes()); })
      .def_property_readonly("subjects", [](const ivcr::EventTable& e) {
        return std::vector<std::size_t>(e.subjects().begin(), e.subjects().end());
      })
      .def("at_risk", [](const ivcr::EventTable& e, std::size_t k) {
        auto s = e.at_risk(k);
        return std::vector<std::size_t>(s.begin(), s.end());
      });
  m.def("build_event_table", &ivcr::build_event_table, "data"_a, "horizon"_a = py::none());

  py::class_<ivcr::FittedInstrumentModel>(m, "FittedInstrumentModel")
      .def_readonly("theta", &ivcr::FittedInstrumentModel::theta)
      .def_readonly("fitted_means", &ivcr::FittedInstrumentModel::fitted_means)
      .def_readonly("residuals", &ivcr::FittedInstrumentModel::residuals)
      .def_readonly("influence", &ivcr::FittedInstrumentModel::influence)
      .def_property_readonly("family",
                             [](const ivcr::FittedInstrumentModel& f) { return ivcr::to_string(f.spec.family); });
  m.def(
      "fit_instrument_model",
      [](const ivcr::CohortDataset& data, const std::string& family, std::vector<std::size_t> covariates) {
        ivcr::InstrumentModelSpec spec;
        spec.family = ivcr::parse_instrument_family(family);
        spec.covariate_indices = std::move(covariates);
        return ivcr::fit_instrument_model(data, spec);
      },
      "data"_a, "family"_a = "mean", "covariates"_a = std::vector<std::size_t>{});

  py::class_<ivcr::StepCurve>(m, "StepCurve")
      .def_readonly("times", &ivcr::StepCurve::times)
      .def_readonly("values", &ivcr::StepCurve::values)
      .def("value_at", &ivcr::StepCurve::value_at, "t"_a)
      .def("__call__", [](const ivcr::StepCurve& c, const std::vector<double>& ts) {
        std::vector<double> out;
        for (double t : ts) out.push_back(c.value_at(t));
        return out;
      });

  py::class_<ivcr::IvFitResult>(m, "IvFitResult")
      .def_readonly("B1", &ivcr::IvFitResult::curve_cause1)
      .def_readonly("B2", &ivcr::IvFitResult::curve_cause2)
      .def_readonly("horizon", &ivcr::IvFitResult::horizon)
      .def_property_readonly("increments", [](const ivcr::IvFitResult& f) {
        std::vector<double> v;
        for (const auto& j : f.jumps) v.push_back(j.increment);
        return v;
      })
      .def_property_readonly("denominators", [](const ivcr::IvFitResult& f) {
        std::vector<double> v;
        for (const auto& j : f.jumps) v.push_back(j.denominator);
        return v;
      });
  m.def("fit_iv_competing",
        py::overload_cast<const ivcr::EventTable&, const ivcr::CohortDataset&, const ivcr::FittedInstrumentModel&>(
            &ivcr::fit_iv_competing),
        "events"_a, "data"_a, "instrument"_a);

  py::class_<ivcr::ExtendedIvFitResult>(m, "ExtendedIvFitResult")
      .def_readonly("curves", &ivcr::ExtendedIvFitResult::curves)
      .def_readonly("names", &ivcr::ExtendedIvFitResult::names)
      .def_readonly("max_condition_number", &ivcr::ExtendedIvFitResult::max_condition_number);
  m.def("fit_iv_extended", &ivcr::fit_iv_extended, "events"_a, "data"_a, "instrument"_a,
        "interaction_covariates"_a);

  py::class_<ivcr::NaiveAalenResult>(m, "NaiveAalenResult")
      .def_readonly("coefficients", &ivcr::NaiveAalenResult::coefficients)
      .def("exposure_curve", &ivcr::NaiveAalenResult::exposure_curve, "cause"_a);
  m.def("fit_naive_aalen", &ivcr::fit_naive_aalen, "events"_a, "data"_a);

  py::class_<ivcr::VarianceCurves>(m, "VarianceCurves")
      .def_readonly("times", &ivcr::VarianceCurves::times)
      .def("as_dict", &curves_dict);
  m.def(
      "infer",
      [](const ivcr::IvFitResult& fit, const ivcr::EventTable& events, const ivcr::CohortDataset& data,
         const ivcr::FittedInstrumentModel& instrument, const std::vector<double>& times, double level) {
        return ivcr::infer(fit, events, data, instrument, times, level).curves;
      },
      "fit"_a, "events"_a, "data"_a, "instrument"_a, "times"_a, "level"_a = 0.95);

  py::class_<ivcr::SubgroupHazards>(m, "SubgroupHazards")
      .def_readonly("event_times", &ivcr::SubgroupHazards::event_times)
      .def_readonly("cumulative_hazard1", &ivcr::SubgroupHazards::cumulative_hazard1)
      .def_readonly("cumulative_hazard2", &ivcr::SubgroupHazards::cumulative_hazard2)
      .def_readonly("survivor", &ivcr::SubgroupHazards::survivor)
      .def_readonly("incidence1", &ivcr::SubgroupHazards::incidence1)
      .def_readonly("incidence2", &ivcr::SubgroupHazards::incidence2);
  m.def("subgroup_hazards", &ivcr::subgroup_hazards, "data"_a, "exposure_level"_a, "instrument_level"_a,
        "horizon"_a = py::none());

  py::class_<ivcr::RrCurve>(m, "RrCurve")
      .def_readonly("times", &ivcr::RrCurve::times)
      .def_readonly("rr", &ivcr::RrCurve::rr)
      .def_readonly("lower", &ivcr::RrCurve::lower)
      .def_readonly("upper", &ivcr::RrCurve::upper)
      .def_readonly("replicates", &ivcr::RrCurve::replicates)
      .def_readonly("failures", &ivcr::RrCurve::failures)
      .def_readonly("has_band", &ivcr::RrCurve::has_band);
  m.def("relative_risk_curve", &ivcr::relative_risk_curve, "sub"_a, "iv"_a, "times"_a);
  m.def(
      "bootstrap_rr",
      [](const ivcr::CohortDataset& data, double exposure_level, double instrument_level,
         const std::vector<double>& times, std::size_t replicates, std::uint64_t seed, unsigned threads,
         const std::string& family) {
        ivcr::InstrumentModelSpec spec;
        spec.family = ivcr::parse_instrument_family(family);
        ivcr::BootstrapOptions options;
        options.replicates = replicates;
        options.seed = seed;
        options.threads = threads;
        py::gil_scoped_release release;
        return ivcr::bootstrap_rr(data, exposure_level, instrument_level, spec, times, options);
      },
      "data"_a, "exposure_level"_a, "instrument_level"_a, "times"_a, "replicates"_a = 500, "seed"_a = 1,
      "threads"_a = 1, "family"_a = "mean");

  py::class_<ivcr::ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("n", &ivcr::ScenarioConfig::n)
      .def_readwrite("rho", &ivcr::ScenarioConfig::rho)
      .def_readwrite("covariance", &ivcr::ScenarioConfig::covariance)
      .def_readwrite("exposure_mean_base", &ivcr::ScenarioConfig::exposure_mean_base)
      .def_readwrite("seed", &ivcr::ScenarioConfig::seed);
  m.def("scenario_preset", &ivcr::scenario_preset, "name"_a, "n"_a, "rho"_a);
  m.def("solve_gamma_for_rho", &ivcr::solve_gamma_for_rho, "config"_a);
  m.def(
      "generate",
      [](const ivcr::ScenarioConfig& config) {
        auto sim = ivcr::generate(config);
        return py::make_tuple(std::move(sim.data), sim.confounder, sim.clamped);
      },
      "config"_a);

  py::class_<ivcr::MonteCarloSummary>(m, "MonteCarloSummary")
      .def_readonly("time_points", &ivcr::MonteCarloSummary::time_points)
      .def_readonly("bias", &ivcr::MonteCarloSummary::bias)
      .def_readonly("empirical_sd", &ivcr::MonteCarloSummary::empirical_sd)
      .def_readonly("mean_se", &ivcr::MonteCarloSummary::mean_se)
      .def_readonly("coverage", &ivcr::MonteCarloSummary::coverage)
      .def_readonly("naive_bias", &ivcr::MonteCarloSummary::naive_bias)
      .def_readonly("replications", &ivcr::MonteCarloSummary::replications)
      .def_readonly("failures", &ivcr::MonteCarloSummary::failures);
  m.def(
      "run_monte_carlo",
      [](const ivcr::ScenarioConfig& config, std::size_t replications, std::vector<double> time_points,
         std::uint64_t master_seed, unsigned threads) {
        ivcr::MonteCarloOptions options;
        options.replications = replications;
        options.time_points = std::move(time_points);
        options.master_seed = master_seed;
        options.threads = threads;
        py::gil_scoped_release release;
        return ivcr::run_monte_carlo(config, options);
      },
      "config"_a, "replications"_a, "time_points"_a = std::vector<double>{0.5, 1.5, 2.5}, "master_seed"_a = 1,
      "threads"_a = 1);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "ivcr");
        std::ostringstream out, err;
        const int code = ivcr::run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      "args"_a, "Run an ivcr subcommand in-process; returns (exit_code, stdout, stderr).");
}
