#include "capa/scenario_io.hpp"

#include <fstream>
#include <numbers>
#include <sstream>

namespace capa {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

double get_number(const json& j, const std::string& key, double fallback,
                  const std::string& path) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) field_error(path + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& j, const std::string& key, int fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) field_error(path + key, "expected an integer");
  return v.get<int>();
}

Vec3 get_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) field_error(path, "expected [x, y, z]");
  Vec3 v{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) field_error(path, "expected numeric coordinates");
    v[i] = j[i].get<double>();
  }
  return v;
}

Aperture get_aperture(const json& j, const std::string& path) {
  if (!j.is_object()) field_error(path, "expected an object");
  Aperture a;
  if (!j.contains("center")) field_error(path + ".center", "missing");
  a.center = get_vec3(j.at("center"), path + ".center");
  if (!j.contains("lx")) field_error(path + ".lx", "missing");
  if (!j.contains("ly")) field_error(path + ".ly", "missing");
  a.lx = get_number(j, "lx", 0.0, path + ".");
  a.ly = get_number(j, "ly", 0.0, path + ".");
  return a;
}

json aperture_to_json(const Aperture& a) {
  return json{{"center", {a.center[0], a.center[1], a.center[2]}}, {"lx", a.lx}, {"ly", a.ly}};
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top-level value must be a JSON object");
  Scenario s = desk_scenario(1);
  s.users.clear();

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      field_error("seed", "expected a non-negative integer");
    }
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("bs")) s.bs = get_aperture(j.at("bs"), "bs");

  const bool has_users = j.contains("users");
  const bool has_placement = j.contains("placement");
  if (has_users == has_placement) {
    field_error("users", "exactly one of 'users' or 'placement' must be given");
  }
  if (has_users) {
    const auto& users = j.at("users");
    if (!users.is_array()) field_error("users", "expected an array");
    for (std::size_t k = 0; k < users.size(); ++k) {
      s.users.push_back(get_aperture(users[k], "users[" + std::to_string(k) + "]"));
    }
  } else {
    const auto& p = j.at("placement");
    if (!p.is_object()) field_error("placement", "expected an object");
    const int count = get_int(p, "count", 3, "placement.");
    const double half = get_number(p, "xy_half_range", 1.0, "placement.");
    const double z_min = get_number(p, "z_min", 2.0, "placement.");
    const double z_max = get_number(p, "z_max", 3.0, "placement.");
    const double lx = get_number(p, "lx", 0.125, "placement.");
    const double ly = get_number(p, "ly", lx, "placement.");
    if (count < 1) field_error("placement.count", "must be >= 1");
    if (z_min > z_max) field_error("placement.z_min", "must not exceed z_max");
    for (const auto& c : place_users(count, half, z_min, z_max, s.seed)) {
      s.users.push_back(Aperture{c, lx, ly});
    }
  }

  s.wavelength = get_number(j, "wavelength", s.wavelength, "");
  s.impedance = get_number(j, "impedance", 120.0 * std::numbers::pi, "");
  s.noise_variance = get_number(j, "noise_variance", s.noise_variance, "");
  s.budget = get_number(j, "budget", s.budget, "");
  s.bs_order = get_int(j, "bs_order", s.bs_order, "");

  const Aperture& u0 = s.users.empty() ? s.bs : s.users.front();
  s.streams = j.contains("streams")
                  ? get_int(j, "streams", 0, "")
                  : stream_count(s.bs.lx, s.bs.ly, u0.lx, u0.ly, s.wavelength);
  s.user_order = j.contains("user_order")
                     ? get_int(j, "user_order", 0, "")
                     : user_quadrature_order(std::max(1, s.bs_order), s.bs.lx, u0.lx);

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json users = json::array();
  for (const auto& u : s.users) users.push_back(aperture_to_json(u));
  return json{{"bs", aperture_to_json(s.bs)},
              {"users", users},
              {"wavelength", s.wavelength},
              {"impedance", s.impedance},
              {"noise_variance", s.noise_variance},
              {"budget", s.budget},
              {"streams", s.streams},
              {"bs_order", s.bs_order},
              {"user_order", s.user_order},
              {"seed", s.seed}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Scenario read_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json(path));
}

void write_scenario(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  // max_digits10 precision via nlohmann's shortest round-trip formatting.
  out << scenario_to_json(s).dump(2) << "\n";
}

}  // namespace capa
