#pragma once

#include <filesystem>
#include <string>

#include "capa/scenario.hpp"
#include "json.hpp"

namespace capa {

// JSON schema (lengths in meters):
//
//   {
//     "bs":    {"center": [x, y, z], "lx": 0.5, "ly": 0.5},
//     "users": [{"center": [x, y, z], "lx": 0.125, "ly": 0.125}, ...],
//     "placement": {"count": 3, "xy_half_range": 1.0, "z_min": 2.0,
//                   "z_max": 3.0, "lx": 0.125, "ly": 0.125},
//     "wavelength": 0.125, "impedance": 376.99, "noise_variance": 5.6e-3,
//     "budget": 1000, "streams": 2, "bs_order": 10, "user_order": 10,
//     "seed": 1
//   }
//
// Exactly one of "users" / "placement" is required; "placement" draws the
// centers with place_users(seed). "bs" defaults to a 0.5 m square at the
// origin. "streams" defaults to stream_count(...), "user_order" to
// user_quadrature_order(...). Other missing scalars take desk defaults.
// Writing always emits explicit "users".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

// Parse errors carry the parser's line/column.
nlohmann::json read_json(const std::filesystem::path& path);

Scenario read_scenario(const std::filesystem::path& path);
void write_scenario(const Scenario& s, const std::filesystem::path& path);

}  // namespace capa
