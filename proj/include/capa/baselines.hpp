#pragma once

#include <string>
#include <vector>

#include "capa/channel.hpp"
#include "capa/scenario.hpp"
#include "capa/solver.hpp"

namespace capa {

// Fourier basis on the BS aperture,
//   phi_{nx,ny}(s) = exp(j 2 pi (nx (s_x - c_x) / L_x + ny (s_y - c_y) / L_y)) / sqrt(A_B),
// |nx|, |ny| <= nf, sampled at the BS grid. Column index (nx + nf) * (2 nf + 1) + (ny + nf).
MatrixC fourier_basis(const QuadGrid& bs_grid, const Aperture& bs, int nf);

// Default truncation ceil(L_B^x / lambda).
int default_fourier_order(const Scenario& scenario);

struct FourierResult {
  RateReport se;
  double seconds = 0.0;
  int iterations = 0;
  bool converged = false;
  int basis_size = 0;   // (2 nf + 1)^2
  int basis_rank = 0;   // columns kept after orthonormalization on the grid
  std::vector<MatrixC> coefficients;  // per user, basis_size x d (raw Fourier basis)
  std::vector<MatrixC> synthesized;   // per user, BS samples n_t x d
  double coefficient_power = 0.0;     // sum ||c||^2 in the orthonormalized basis
};

// Both baselines run the solver with use_woodbury = false (full-size
// receive and transmit solves); the remaining config fields apply as given.

// Coefficient-domain WMMSE over the Fourier basis, evaluated on `eval`.
// The basis is re-orthonormalized against Pi_B so that coefficient power
// equals the quadrature power of the synthesized current.
FourierResult run_fourier(const Scenario& scenario, const ChannelSet& eval, int nf,
                          const SolverConfig& config);

enum class SpdaMode { SvdWaterfill, Wmmse };

SpdaMode parse_spda_mode(const std::string& name);
std::string to_string(SpdaMode mode);

// Uniform element layout, one element at the center of each cell of a
// round(L / spacing) x round(L / spacing) partition (at least 1 x 1).
struct SpdaLayout {
  std::vector<Vec3> bs_elements;
  double bs_element_area = 0.0;
  int bs_per_axis_x = 0;
  int bs_per_axis_y = 0;
  std::vector<std::vector<Vec3>> user_elements;
  double user_element_area = 0.0;
};

SpdaLayout spda_layout(const Scenario& scenario, double spacing);

// Element-domain channels, kernel(r_i, s_j) with per-element areas as weights.
ChannelSet spda_channels(const Scenario& scenario, const SpdaLayout& layout);

// Piecewise-constant current over the element cells, sampled at the BS grid
// of `eval` and rescaled to carry the element-domain power.
std::vector<MatrixC> spda_synthesize(const Scenario& scenario, const SpdaLayout& layout,
                                     std::span<const MatrixC> element_currents,
                                     const ChannelSet& eval);

struct SpdaResult {
  RateReport se;
  double seconds = 0.0;
  int iterations = 0;
  int bs_elements = 0;
  int user_elements = 0;
  double element_power = 0.0;
  std::vector<MatrixC> element_currents;
};

SpdaResult run_spda(const Scenario& scenario, const ChannelSet& eval, double spacing,
                    SpdaMode mode, const SolverConfig& config);

// p_i = max(0, nu - noise / g_i) with sum p_i = budget.
std::vector<double> waterfill(const std::vector<double>& gains, double noise, double budget);

}  // namespace capa
