#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "capa/baselines.hpp"
#include "capa/scenario_io.hpp"

namespace capa::cli {

// Method names accepted by --methods.
//   proposed    functional WMMSE on the quadrature grid
//   fourier     WMMSE over a truncated Fourier basis
//   spda        discrete array, per-user SVD + water-filling
//   spda-wmmse  discrete array, WMMSE
const std::vector<std::string>& known_methods();

// Comma-separated list; throws ConfigError on unknown or empty entries.
std::vector<std::string> parse_methods(const std::string& list);

struct MethodOptions {
  SolverConfig solver;
  double spacing = 0.0;  // SPDA element spacing; <= 0 means lambda / 2
  int nf = -1;           // Fourier truncation; < 0 means ceil(L_B / lambda)
};

struct MethodOutcome {
  std::string method;
  bool ok = false;
  std::string error;
  std::vector<double> per_user;  // nats
  double sum = 0.0;              // nats
  int iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

// Never throws for numerical failures; those come back with ok = false.
// `eval` must be build_channel_set(scenario).
MethodOutcome run_method(const std::string& method, const Scenario& scenario,
                         const ChannelSet& eval, const MethodOptions& options);

// Sweep file:
//   {"variable": "budget" | "user_aperture_size" | "bs_aperture_size",
//    "values": [200, 400, ...], "repetitions": 1,
//    "methods": ["proposed", "spda"],
//    "scenario": {...} | "scenario_file": "desk.json"}
// Repetition r runs with seed (base seed + r). A relative scenario_file is
// resolved against the sweep file's directory.
struct SweepSpec {
  std::string variable;
  std::vector<double> values;
  int repetitions = 1;
  std::vector<std::string> methods;
  nlohmann::json base;
};

SweepSpec sweep_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

std::uint64_t base_seed(const SweepSpec& spec);

// The base scenario with the swept variable set to `value` and the given seed.
Scenario sweep_scenario(const SweepSpec& spec, double value, std::uint64_t seed);

struct ResultRow {
  std::string method;
  std::uint64_t seed = 0;
  double value = 0.0;
  bool ok = false;
  std::vector<double> per_user_bits;
  double sum_bits = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string error;
};

ResultRow to_row(const MethodOutcome& outcome, std::uint64_t seed, double value);

// RFC 4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(const std::string& s);

// Header: method,seed,value,status,sum_se_bits,per_user_se_bits,iterations,seconds,error
// per_user_se_bits is a ';'-separated list. With timing = false the seconds
// column is written as 0 so that repeated runs compare byte for byte.
void write_results_csv(const std::vector<ResultRow>& rows, std::ostream& out, bool timing);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void write_svg_plot(const std::vector<Series>& series, const std::string& title,
                    const std::string& x_label, const std::string& y_label, std::ostream& out);

double median(std::vector<double> values);

}  // namespace capa::cli
