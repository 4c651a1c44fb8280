#pragma once

#include <span>
#include <vector>

#include "capa/types.hpp"

namespace capa {

// Gauss-Legendre rule on [-1, 1].
struct QuadRule1D {
  int order = 0;
  std::vector<double> nodes;    // strictly increasing
  std::vector<double> weights;  // positive, sum to 2
};

// Tensor-product Gauss-Legendre rule over an axis-aligned rectangle in a
// plane z = const. Point (m, n) is stored at index m * order + n, with m
// running along x and n along y; every sampled matrix uses this ordering.
struct QuadGrid {
  int order = 0;
  std::vector<Vec3> points;
  std::vector<double> combined_weights;  // m^2
  double aperture_area = 0.0;

  std::size_t size() const { return points.size(); }
};

// Nodes are Newton-refined roots of P_order, mirrored so that the rule is
// exactly symmetric. Throws std::invalid_argument for order < 1.
QuadRule1D legendre_rule(int order);

QuadGrid tensor_grid(const Vec3& center, double lx, double ly, int order);

cplx integrate(const QuadGrid& grid, std::span<const cplx> samples);

}  // namespace capa
