#pragma once

#include <filesystem>
#include <vector>

#include "capa/quadrature.hpp"
#include "capa/scenario.hpp"
#include "capa/types.hpp"

namespace capa {

// Sampled channel operators in the weighted-matrix form used by the solver.
//
// h[k] is n_r(k) x n_t with h[k](i, j) = h(r_i^k, s_j). pi_b and pi_u[k] hold
// the diagonals of the transmit and receive weight matrices, so an aperture
// integral of f becomes sum_i pi(i) f(x_i). Baselines reuse this type with
// other discretizations (Fourier coefficients, SPDA elements), in which case
// the grids are left empty.
struct ChannelSet {
  std::vector<MatrixC> h;
  VectorR pi_b;
  std::vector<VectorR> pi_u;
  QuadGrid bs_grid;
  std::vector<QuadGrid> user_grids;

  int num_users() const { return static_cast<int>(h.size()); }
  Eigen::Index num_tx() const { return pi_b.size(); }
  Eigen::Index num_rx(int k) const { return pi_u[k].size(); }
  double tx_area() const { return pi_b.sum(); }
};

// y-polarized free-space kernel:
//   -j eta exp(-j 2 pi R / lambda) / (2 lambda R) * (1 - (r_y - s_y)^2 / R^2).
// Throws SingularityError when r == s.
cplx kernel(const Vec3& r, const Vec3& s, double wavelength, double impedance);

// kernel(r, s) if r lies on user k's aperture and s on the BS aperture, else 0.
cplx masked_kernel(int k, const Vec3& r, const Vec3& s, const Scenario& scenario);

// Rejects scenarios where any user sample sits within 10 wavelengths of a BS
// sample (SingularityError).
ChannelSet build_channel_set(const Scenario& scenario);

// min_separation: smallest allowed |r - s| over all sample pairs.
ChannelSet build_channel_set(const Scenario& scenario, double min_separation);

// Binary cache format, little-endian:
//   "CAPACHS\0" | u32 version (=1) | u32 K | u32 n_t | f64 pi_b[n_t]
//   then per user: u32 n_r | f64 pi_u[n_r] | n_r*n_t (f32 re, f32 im) row-major.
// Channel entries are stored as complex64, so a round trip is exact only to
// single precision. Grids are not stored.
void write_channel_set(const ChannelSet& channels, const std::filesystem::path& path);
ChannelSet read_channel_set(const std::filesystem::path& path);

}  // namespace capa
