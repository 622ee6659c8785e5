#include "ivcr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "ivcr/errors.hpp"

namespace ivcr {

std::string format_real(double value) {
  if (std::isnan(value)) return "NA";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buffer, ptr);
}

std::string curves_csv(const IvFitResult& fit) {
  std::ostringstream os;
  os << "time,B1,B2\n0,0,0\n";
  double b1 = 0.0, b2 = 0.0;
  std::size_t i1 = 0, i2 = 0;
  for (const auto& jump : fit.jumps) {
    if (jump.cause == 1)
      b1 = fit.curve_cause1.values[i1++];
    else
      b2 = fit.curve_cause2.values[i2++];
    os << format_real(jump.time) << ',' << format_real(b1) << ',' << format_real(b2) << '\n';
  }
  return os.str();
}

std::string extended_curves_csv(const ExtendedIvFitResult& fit) {
  std::ostringstream os;
  os << "time";
  for (const auto& name : fit.names) os << ',' << name;
  os << "\n0";
  for (std::size_t c = 0; c < fit.names.size(); ++c) os << ",0";
  os << '\n';
  const std::size_t p = fit.interaction_count();
  Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 + 2 * p));
  for (std::size_t k = 0; k < fit.increments.size(); ++k) {
    cumulative += fit.increments[k];
    os << format_real(fit.event_times[k]);
    for (Eigen::Index c = 0; c < cumulative.size(); ++c) os << ',' << format_real(cumulative(c));
    os << '\n';
  }
  return os.str();
}

std::string bands_csv(const VarianceCurves& b) {
  std::ostringstream os;
  os << "time,B1,se1,lo1,hi1,B2,se2,lo2,hi2\n";
  for (std::size_t q = 0; q < b.times.size(); ++q) {
    os << format_real(b.times[q]);
    for (int j = 0; j < 2; ++j)
      os << ',' << format_real(b.estimate[j][q]) << ',' << format_real(b.se[j][q]) << ','
         << format_real(b.lower[j][q]) << ',' << format_real(b.upper[j][q]);
    os << '\n';
  }
  return os.str();
}

std::string rr_csv(const RrCurve& rr) {
  std::ostringstream os;
  const bool band = rr.replicates > 0;
  os << (band ? "time,rr,lo,hi,n_replicates\n" : "time,rr\n");
  for (std::size_t q = 0; q < rr.times.size(); ++q) {
    os << format_real(rr.times[q]) << ',' << format_real(rr.rr[q]);
    if (band)
      os << ',' << format_real(rr.lower[q]) << ',' << format_real(rr.upper[q]) << ','
         << (rr.replicates - rr.failures);
    os << '\n';
  }
  return os.str();
}

std::string monte_carlo_csv(const MonteCarloSummary& s) {
  std::ostringstream os;
  os << "statistic";
  for (double t : s.time_points) os << ',' << format_real(t);
  os << '\n';
  auto row = [&](const std::string& name, const std::vector<double>& values) {
    os << name;
    for (double v : values) os << ',' << format_real(v);
    os << '\n';
  };
  for (int j = 0; j < 2; ++j) {
    const std::string tag = "B" + std::to_string(j + 1);
    row("bias_" + tag, s.bias[j]);
    row("sd_" + tag, s.empirical_sd[j]);
    row("see_" + tag, s.mean_se[j]);
    row("cp_" + tag, s.coverage[j]);
  }
  row("naive_bias_B1", s.naive_bias[0]);
  row("naive_bias_B2", s.naive_bias[1]);
  return os.str();
}

namespace {

nlohmann::json numbers(const std::vector<double>& values) {
  nlohmann::json out = nlohmann::json::array();
  for (double v : values) out.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  return out;
}

}  // namespace

std::string monte_carlo_json(const MonteCarloSummary& s, const ScenarioConfig& c, const std::string& scenario,
                             std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["config"] = {
      {"instrument_kind", c.instrument_kind == InstrumentKind::binary_half ? "binary_half" : "standard_normal"},
      {"n", c.n},
      {"rho", c.rho},
      {"gamma_g", solve_gamma_for_rho(c)},
      {"exposure_mean_base", c.exposure_mean_base},
      {"confounder_mean", c.confounder_mean},
      {"exposure_variance", c.exposure_variance},
      {"confounder_variance", c.confounder_variance},
      {"covariance", c.covariance},
      {"hazard1", c.hazard1},
      {"hazard2", c.hazard2},
      {"censor_probability", c.censor_probability},
      {"censor_end", c.censor_end},
  };
  j["seed"] = seed;
  j["replications"] = s.replications;
  j["successes"] = s.successes;
  j["failures"] = s.failures;
  j["naive_failures"] = s.naive_failures;
  j["clamped_subjects"] = s.clamped;
  j["time_points"] = s.time_points;
  for (int k = 0; k < 2; ++k) {
    const std::string tag = "B" + std::to_string(k + 1);
    j["cause" + std::to_string(k + 1)] = {
        {"bias", numbers(s.bias[k])},
        {"sd", numbers(s.empirical_sd[k])},
        {"see", numbers(s.mean_se[k])},
        {"coverage", numbers(s.coverage[k])},
        {"naive_bias", numbers(s.naive_bias[k])},
    };
  }
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buffer[1 << 15];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace ivcr
