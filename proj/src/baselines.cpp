#include "capa/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

namespace capa {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

// Baselines run the full-size updates, as a discrete WMMSE would.
SolverConfig conventional(SolverConfig config) {
  config.use_woodbury = false;
  return config;
}

int cells_along(double length, double spacing) {
  return std::max(1, static_cast<int>(std::llround(length / spacing)));
}

std::vector<Vec3> cell_centers(const Aperture& ap, int nx, int ny) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      out.push_back({ap.center[0] - ap.lx / 2.0 + (i + 0.5) * ap.lx / nx,
                     ap.center[1] - ap.ly / 2.0 + (j + 0.5) * ap.ly / ny, ap.center[2]});
    }
  }
  return out;
}

}  // namespace

MatrixC fourier_basis(const QuadGrid& bs_grid, const Aperture& bs, int nf) {
  if (nf < 0) throw std::invalid_argument("fourier_basis: nf must be >= 0");
  const int side = 2 * nf + 1;
  const double norm = 1.0 / std::sqrt(bs.area());
  MatrixC phi(static_cast<Eigen::Index>(bs_grid.size()), side * side);
  for (std::size_t p = 0; p < bs_grid.size(); ++p) {
    const double x = (bs_grid.points[p][0] - bs.center[0]) / bs.lx;
    const double y = (bs_grid.points[p][1] - bs.center[1]) / bs.ly;
    for (int nx = -nf; nx <= nf; ++nx) {
      for (int ny = -nf; ny <= nf; ++ny) {
        const double arg = 2.0 * std::numbers::pi * (nx * x + ny * y);
        phi(static_cast<Eigen::Index>(p), (nx + nf) * side + (ny + nf)) =
            norm * cplx{std::cos(arg), std::sin(arg)};
      }
    }
  }
  return phi;
}

int default_fourier_order(const Scenario& scenario) {
  return static_cast<int>(std::ceil(scenario.bs.lx / scenario.wavelength - 1e-12));
}

FourierResult run_fourier(const Scenario& scenario, const ChannelSet& eval, int nf,
                          const SolverConfig& config) {
  const auto start = clock_type::now();
  const ChannelSet sampled = build_channel_set(scenario);
  const MatrixC phi = fourier_basis(sampled.bs_grid, scenario.bs, nf);

  // Orthonormalize the sampled basis in the Pi_B inner product. At a
  // sufficient quadrature order the Gram is already the identity.
  const MatrixC gram = phi.adjoint() * (sampled.pi_b.asDiagonal() * phi);
  Eigen::SelfAdjointEigenSolver<MatrixC> eig((gram + gram.adjoint()) / 2.0);
  const VectorR& lambda = eig.eigenvalues();
  const double cutoff = 1e-10 * lambda.maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > cutoff) keep.push_back(i);
  }
  MatrixC transform(phi.cols(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    transform.col(static_cast<Eigen::Index>(c)) =
        eig.eigenvectors().col(keep[c]) / std::sqrt(lambda(keep[c]));
  }
  const MatrixC psi = phi * transform;

  ChannelSet coef;
  coef.pi_b = VectorR::Ones(psi.cols());
  coef.pi_u = sampled.pi_u;
  coef.user_grids = sampled.user_grids;
  for (const auto& h : sampled.h) coef.h.push_back(h * (sampled.pi_b.asDiagonal() * psi));

  const RunResult rr = run(coef, scenario.streams, scenario.budget, scenario.noise_variance,
                           conventional(config), scenario.seed);

  FourierResult out;
  out.iterations = rr.iterations;
  out.converged = rr.converged;
  out.basis_size = static_cast<int>(phi.cols());
  out.basis_rank = static_cast<int>(psi.cols());
  out.coefficient_power = transmit_power(rr.state.v, coef.pi_b);
  for (const auto& c : rr.state.v) {
    out.coefficients.push_back(transform * c);
    out.synthesized.push_back(psi * c);
  }
  out.seconds = seconds_since(start);
  out.se = evaluate_se(out.synthesized, eval, scenario.noise_variance);
  return out;
}

SpdaMode parse_spda_mode(const std::string& name) {
  if (name == "svd-waterfill") return SpdaMode::SvdWaterfill;
  if (name == "wmmse") return SpdaMode::Wmmse;
  throw std::invalid_argument("unknown SPDA mode '" + name + "'");
}

std::string to_string(SpdaMode mode) {
  return mode == SpdaMode::SvdWaterfill ? "svd-waterfill" : "wmmse";
}

SpdaLayout spda_layout(const Scenario& scenario, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("spda_layout: spacing must be positive");
  SpdaLayout layout;
  layout.bs_per_axis_x = cells_along(scenario.bs.lx, spacing);
  layout.bs_per_axis_y = cells_along(scenario.bs.ly, spacing);
  layout.bs_elements = cell_centers(scenario.bs, layout.bs_per_axis_x, layout.bs_per_axis_y);
  layout.bs_element_area =
      scenario.bs.area() / (layout.bs_per_axis_x * layout.bs_per_axis_y);
  for (const auto& user : scenario.users) {
    const int nx = cells_along(user.lx, spacing);
    const int ny = cells_along(user.ly, spacing);
    layout.user_elements.push_back(cell_centers(user, nx, ny));
    layout.user_element_area = user.area() / (nx * ny);
  }
  return layout;
}

ChannelSet spda_channels(const Scenario& scenario, const SpdaLayout& layout) {
  ChannelSet out;
  const auto n_t = static_cast<Eigen::Index>(layout.bs_elements.size());
  out.pi_b = VectorR::Constant(n_t, layout.bs_element_area);
  for (const auto& elements : layout.user_elements) {
    const auto n_r = static_cast<Eigen::Index>(elements.size());
    MatrixC h(n_r, n_t);
    for (Eigen::Index i = 0; i < n_r; ++i) {
      for (Eigen::Index j = 0; j < n_t; ++j) {
        h(i, j) = kernel(elements[i], layout.bs_elements[j], scenario.wavelength,
                         scenario.impedance);
      }
    }
    out.h.push_back(std::move(h));
    out.pi_u.push_back(VectorR::Constant(n_r, layout.user_element_area));
  }
  return out;
}

std::vector<MatrixC> spda_synthesize(const Scenario& scenario, const SpdaLayout& layout,
                                     std::span<const MatrixC> element_currents,
                                     const ChannelSet& eval) {
  const Aperture& bs = scenario.bs;
  const int nx = layout.bs_per_axis_x;
  const int ny = layout.bs_per_axis_y;
  std::vector<Eigen::Index> cell(eval.bs_grid.size());
  for (std::size_t p = 0; p < eval.bs_grid.size(); ++p) {
    const auto& pt = eval.bs_grid.points[p];
    const int ix = std::clamp(
        static_cast<int>(std::floor((pt[0] - bs.center[0] + bs.lx / 2.0) / (bs.lx / nx))), 0,
        nx - 1);
    const int iy = std::clamp(
        static_cast<int>(std::floor((pt[1] - bs.center[1] + bs.ly / 2.0) / (bs.ly / ny))), 0,
        ny - 1);
    cell[p] = static_cast<Eigen::Index>(ix) * ny + iy;
  }
  std::vector<MatrixC> out;
  double element_power = 0.0;
  for (const auto& v : element_currents) {
    element_power += layout.bs_element_area * v.squaredNorm();
    MatrixC samples(static_cast<Eigen::Index>(cell.size()), v.cols());
    for (std::size_t p = 0; p < cell.size(); ++p) {
      samples.row(static_cast<Eigen::Index>(p)) = v.row(cell[p]);
    }
    out.push_back(std::move(samples));
  }
  const double sampled_power = transmit_power(out, eval.pi_b);
  if (sampled_power > 0.0) {
    const double scale = std::sqrt(element_power / sampled_power);
    for (auto& m : out) m *= scale;
  }
  return out;
}

SpdaResult run_spda(const Scenario& scenario, const ChannelSet& eval, double spacing,
                    SpdaMode mode, const SolverConfig& config) {
  const auto start = clock_type::now();
  const SpdaLayout layout = spda_layout(scenario, spacing);
  const ChannelSet elements = spda_channels(scenario, layout);
  const int d = scenario.streams;
  const int k_users = scenario.num_users();

  SpdaResult out;
  out.bs_elements = static_cast<int>(layout.bs_elements.size());
  out.user_elements = static_cast<int>(layout.user_elements.front().size());

  if (mode == SpdaMode::Wmmse) {
    const RunResult rr = run(elements, d, scenario.budget, scenario.noise_variance,
                             conventional(config), scenario.seed);
    out.iterations = rr.iterations;
    out.element_currents = rr.state.v;
  } else {
    // Per-user eigenmode transmission on the whitened element channel, budget
    // split equally across users; interference is ignored in the design.
    const double sqrt_tx = std::sqrt(layout.bs_element_area);
    const double sqrt_rx = std::sqrt(layout.user_element_area);
    for (int k = 0; k < k_users; ++k) {
      const MatrixC whitened = sqrt_rx * elements.h[k] * sqrt_tx;
      Eigen::BDCSVD<MatrixC> svd(whitened, Eigen::ComputeThinV);
      const VectorR& sv = svd.singularValues();
      std::vector<double> gains;
      for (Eigen::Index i = 0; i < sv.size() && static_cast<int>(gains.size()) < d; ++i) {
        if (sv(i) > 0.0) gains.push_back(sv(i) * sv(i));
      }
      MatrixC v = MatrixC::Zero(elements.num_tx(), d);
      if (!gains.empty()) {
        const auto p = waterfill(gains, scenario.noise_variance, scenario.budget / k_users);
        for (std::size_t i = 0; i < p.size(); ++i) {
          v.col(static_cast<Eigen::Index>(i)) =
              std::sqrt(p[i]) * svd.matrixV().col(static_cast<Eigen::Index>(i)) / sqrt_tx;
        }
      }
      out.element_currents.push_back(std::move(v));
    }
  }
  out.element_power = transmit_power(out.element_currents, elements.pi_b);
  out.seconds = seconds_since(start);
  const auto synthesized = spda_synthesize(scenario, layout, out.element_currents, eval);
  out.se = evaluate_se(synthesized, eval, scenario.noise_variance);
  return out;
}

std::vector<double> waterfill(const std::vector<double>& gains, double noise, double budget) {
  if (gains.empty()) throw std::invalid_argument("waterfill: gains must be non-empty");
  for (double g : gains) {
    if (!(g > 0.0)) throw std::invalid_argument("waterfill: gains must be positive");
  }
  std::vector<double> floor(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) floor[i] = noise / gains[i];
  std::vector<double> sorted = floor;
  std::sort(sorted.begin(), sorted.end());

  // Largest active set whose water level clears every floor in it.
  double level = 0.0;
  double prefix = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  for (std::size_t m = sorted.size(); m >= 1; --m) {
    level = (budget + prefix) / static_cast<double>(m);
    if (level > sorted[m - 1]) break;
    prefix -= sorted[m - 1];
  }
  std::vector<double> p(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) p[i] = std::max(0.0, level - floor[i]);
  return p;
}

}  // namespace capa
