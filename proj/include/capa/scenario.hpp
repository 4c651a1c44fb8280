#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capa/types.hpp"

namespace capa {

// Rectangular aperture parallel to the global xy-plane.
struct Aperture {
  Vec3 center{0.0, 0.0, 0.0};
  double lx = 0.0;
  double ly = 0.0;

  double area() const { return lx * ly; }
  bool contains(const Vec3& p, double tol = 1e-12) const;

  bool operator==(const Aperture&) const = default;
};

// One experiment instance. Lengths in meters, impedance in ohms, noise
// variance in V^2, budget in mA^2. Units are documentation only.
struct Scenario {
  Aperture bs;
  std::vector<Aperture> users;
  double wavelength = 0.125;
  double impedance = 120.0 * 3.14159265358979323846;
  double noise_variance = 5.6e-3;
  double budget = 1000.0;
  int streams = 2;
  int bs_order = 10;
  int user_order = 10;
  std::uint64_t seed = 1;

  int num_users() const { return static_cast<int>(users.size()); }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const Scenario&) const = default;
};

Vec3 local_to_global(const Vec3& local, const Vec3& user_center);

// K centers with x, y ~ U(-h, h) and z ~ U(z_min, z_max); deterministic per seed.
std::vector<Vec3> place_users(int count, double xy_half_range, double z_min, double z_max,
                              std::uint64_t seed);

// d = min(d_B, d_U), d_A = (2 ceil(Lx/lambda) + 1)(2 ceil(Ly/lambda) + 1).
int stream_count(double bs_lx, double bs_ly, double user_lx, double user_ly,
                 double wavelength);

// ceil(L_B^x / L_U^x) * M.
int user_quadrature_order(int bs_order, double bs_lx, double user_lx);

// K = 3, L_B = 0.5 m, L_U = 0.125 m, lambda = 0.125 m, d = 2, M = N = 10,
// users in x, y in (-1, 1) m and z in (2, 3) m, placed from `seed`.
Scenario desk_scenario(std::uint64_t seed = 1);

// Full-scale geometry: L_B = 2 m, L_U = 0.5 m, users in (-5,5)^2 x (20,30),
// d and N from their formulas. Large; not used in CI.
Scenario full_scale_scenario(std::uint64_t seed = 1);

}  // namespace capa
