#include "capa/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace capa {

namespace {

// Returns {P_n(x), P_n'(x)} via the three-term recurrence.
std::pair<double, double> legendre_and_derivative(int n, double x) {
  double p_prev = 1.0;
  double p = x;
  for (int k = 2; k <= n; ++k) {
    const double p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
    p_prev = p;
    p = p_next;
  }
  if (n == 0) return {1.0, 0.0};
  const double dp = n * (x * p - p_prev) / (x * x - 1.0);
  return {p, dp};
}

}  // namespace

QuadRule1D legendre_rule(int order) {
  if (order < 1) {
    throw std::invalid_argument("legendre_rule: order must be >= 1, got " +
                                std::to_string(order));
  }
  QuadRule1D rule;
  rule.order = order;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);

  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess for the i-th largest root.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      auto [p, d] = legendre_and_derivative(order, x);
      dp = d;
      const double dx = p / d;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    dp = legendre_and_derivative(order, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Roots come out in decreasing order; mirror into ascending slots.
    rule.nodes[order - 1 - i] = x;
    rule.nodes[i] = -x;
    rule.weights[order - 1 - i] = w;
    rule.weights[i] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

QuadGrid tensor_grid(const Vec3& center, double lx, double ly, int order) {
  if (!(lx > 0.0) || !(ly > 0.0)) {
    throw std::invalid_argument("tensor_grid: side lengths must be positive");
  }
  const QuadRule1D rule = legendre_rule(order);
  QuadGrid grid;
  grid.order = order;
  grid.aperture_area = lx * ly;
  grid.points.reserve(static_cast<std::size_t>(order) * order);
  grid.combined_weights.reserve(static_cast<std::size_t>(order) * order);
  const double scale = grid.aperture_area / 4.0;
  for (int m = 0; m < order; ++m) {
    for (int n = 0; n < order; ++n) {
      grid.points.push_back({center[0] + rule.nodes[m] * lx / 2.0,
                             center[1] + rule.nodes[n] * ly / 2.0, center[2]});
      grid.combined_weights.push_back(rule.weights[m] * rule.weights[n] * scale);
    }
  }
  return grid;
}

cplx integrate(const QuadGrid& grid, std::span<const cplx> samples) {
  if (samples.size() != grid.size()) {
    throw std::invalid_argument("integrate: expected " + std::to_string(grid.size()) +
                                " samples, got " + std::to_string(samples.size()));
  }
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    acc += grid.combined_weights[i] * samples[i];
  }
  return acc;
}

}  // namespace capa
