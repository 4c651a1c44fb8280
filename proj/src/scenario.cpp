#include "capa/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace capa {

bool Aperture::contains(const Vec3& p, double tol) const {
  const double hx = lx / 2.0 * (1.0 + tol) + tol;
  const double hy = ly / 2.0 * (1.0 + tol) + tol;
  return std::abs(p[0] - center[0]) <= hx && std::abs(p[1] - center[1]) <= hy &&
         std::abs(p[2] - center[2]) <= tol * (1.0 + std::abs(center[2]));
}

void Scenario::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("scenario." + field + ": " + why);
  };
  if (!(bs.lx > 0.0) || !(bs.ly > 0.0)) fail("bs", "side lengths must be positive");
  if (users.empty()) fail("users", "at least one user is required");
  for (std::size_t k = 0; k < users.size(); ++k) {
    const auto& u = users[k];
    const std::string name = "users[" + std::to_string(k) + "]";
    if (!(u.lx > 0.0) || !(u.ly > 0.0)) fail(name, "side lengths must be positive");
    if (!(u.center[2] > bs.center[2])) fail(name, "center z must lie above the BS plane");
  }
  if (!(wavelength > 0.0)) fail("wavelength", "must be positive");
  if (!(impedance > 0.0)) fail("impedance", "must be positive");
  if (!(noise_variance > 0.0)) fail("noise_variance", "must be positive");
  if (!(budget > 0.0)) fail("budget", "must be positive");
  if (streams < 1) fail("streams", "must be >= 1");
  if (bs_order < 1) fail("bs_order", "must be >= 1");
  if (user_order < 1) fail("user_order", "must be >= 1");
}

Vec3 local_to_global(const Vec3& local, const Vec3& user_center) {
  return {local[0] + user_center[0], local[1] + user_center[1], local[2] + user_center[2]};
}

std::vector<Vec3> place_users(int count, double xy_half_range, double z_min, double z_max,
                              std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("place_users: count must be >= 1");
  if (z_min > z_max) throw std::invalid_argument("place_users: z_min > z_max");
  std::mt19937_64 rng(seed);
  // Top 53 bits of the raw engine output; std::uniform_real_distribution is
  // implementation-defined and would make placements differ across toolchains.
  auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<Vec3> centers;
  centers.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double x = -xy_half_range + 2.0 * xy_half_range * unit();
    const double y = -xy_half_range + 2.0 * xy_half_range * unit();
    const double z = z_min == z_max ? z_min : z_min + (z_max - z_min) * unit();
    centers.push_back({x, y, z});
  }
  return centers;
}

int stream_count(double bs_lx, double bs_ly, double user_lx, double user_ly,
                 double wavelength) {
  auto dof = [wavelength](double lx, double ly) {
    const int nx = static_cast<int>(std::ceil(lx / wavelength - 1e-12));
    const int ny = static_cast<int>(std::ceil(ly / wavelength - 1e-12));
    return (2 * nx + 1) * (2 * ny + 1);
  };
  return std::min(dof(bs_lx, bs_ly), dof(user_lx, user_ly));
}

int user_quadrature_order(int bs_order, double bs_lx, double user_lx) {
  if (bs_order < 1) throw std::invalid_argument("user_quadrature_order: M must be >= 1");
  const int ratio = static_cast<int>(std::ceil(bs_lx / user_lx - 1e-12));
  return std::max(1, ratio) * bs_order;
}

Scenario desk_scenario(std::uint64_t seed) {
  Scenario s;
  s.bs = Aperture{{0.0, 0.0, 0.0}, 0.5, 0.5};
  for (const auto& c : place_users(3, 1.0, 2.0, 3.0, seed)) {
    s.users.push_back(Aperture{c, 0.125, 0.125});
  }
  s.wavelength = 0.125;
  s.impedance = 120.0 * std::numbers::pi;
  s.noise_variance = 5.6e-3;
  s.budget = 1000.0;
  s.streams = 2;
  s.bs_order = 10;
  s.user_order = 10;
  s.seed = seed;
  return s;
}

Scenario full_scale_scenario(std::uint64_t seed) {
  Scenario s;
  s.bs = Aperture{{0.0, 0.0, 0.0}, 2.0, 2.0};
  for (const auto& c : place_users(3, 5.0, 20.0, 30.0, seed)) {
    s.users.push_back(Aperture{c, 0.5, 0.5});
  }
  s.wavelength = 0.125;
  s.impedance = 120.0 * std::numbers::pi;
  s.noise_variance = 5.6e-3;
  s.budget = 1000.0;
  s.streams = stream_count(2.0, 2.0, 0.5, 0.5, s.wavelength);
  s.bs_order = 10;
  s.user_order = user_quadrature_order(10, 2.0, 0.5);
  s.seed = seed;
  return s;
}

}  // namespace capa
