#pragma once

#include <filesystem>
#include <string>

#include "ivcr/estimator.hpp"
#include "ivcr/functionals.hpp"
#include "ivcr/inference.hpp"
#include "ivcr/simulation.hpp"

namespace ivcr {

/// Shortest decimal representation that round-trips; "NA" for NaN.
std::string format_real(double value);

std::string curves_csv(const IvFitResult& fit);
std::string extended_curves_csv(const ExtendedIvFitResult& fit);
std::string bands_csv(const VarianceCurves& bands);
std::string rr_csv(const RrCurve& rr);
std::string monte_carlo_csv(const MonteCarloSummary& summary);
/// Summary with configuration and counts; no timestamps, so equal runs give equal bytes.
std::string monte_carlo_json(const MonteCarloSummary& summary, const ScenarioConfig& config,
                             const std::string& scenario, std::uint64_t seed);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ivcr
