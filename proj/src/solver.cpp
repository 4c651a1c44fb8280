#include "capa/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

namespace capa {

namespace {

bool all_finite(const MatrixC& m) { return m.allFinite(); }

void require_finite(const MatrixC& m, const std::string& what) {
  if (!all_finite(m)) throw NumericalError(what + ": non-finite result");
}

MatrixC hermitian_part(const MatrixC& m) { return (m + m.adjoint()) / 2.0; }

int stream_width(const SolverState& state) {
  return state.v.empty() ? 0 : static_cast<int>(state.v.front().cols());
}

// [Pi_B V_1, ..., Pi_B V_K], n_t x Kd.
MatrixC weighted_stack(std::span<const MatrixC> v, const VectorR& pi_b) {
  const int d = v.empty() ? 0 : static_cast<int>(v.front().cols());
  MatrixC out(pi_b.size(), static_cast<Eigen::Index>(v.size()) * d);
  for (std::size_t j = 0; j < v.size(); ++j) {
    out.middleCols(static_cast<Eigen::Index>(j) * d, d) = pi_b.asDiagonal() * v[j];
  }
  return out;
}

// Hermitian positive-definite solve with an LU fallback.
MatrixC hpd_solve(const MatrixC& a, const MatrixC& b, const std::string& what) {
  Eigen::LLT<MatrixC> llt(a);
  MatrixC x;
  if (llt.info() == Eigen::Success) {
    x = llt.solve(b);
  } else {
    x = a.partialPivLu().solve(b);
  }
  require_finite(x, what);
  return x;
}

// Standard normal pairs from raw engine bits (Box-Muller), so that the
// sequence is identical across standard library implementations.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

  cplx next_complex() {
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    const double radius = std::sqrt(-std::log(u1));  // variance 1/2 per part
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
};

// Kd x Kd reduction of the beamformer update. With N = [A_1..A_K],
// A_k = H_k^H Pi_U U_k, G = N^H Pi_B N and D = blkdiag(W_k), the update
// (N D N^H Pi_B + mu I)^{-1} N D equals N (mu I + D G)^{-1} D, and
// D G = M^H Pi_B N with M = N D.
struct LowRankTransmit {
  MatrixC n;           // n_t x Kd
  MatrixC weighted_n;  // Pi_B^{1/2} N
  MatrixC gamma;       // M^H Pi_B N
  MatrixC d;           // blkdiag(W)

  MatrixC coefficients(double mu) const {
    MatrixC a = gamma;
    a.diagonal().array() += mu;
    return a.partialPivLu().solve(d);
  }
  // ||Pi^{1/2} N Z||^2 rather than tr(Z^H G Z); the latter loses the budget
  // by ~1e-6 when G is rank deficient.
  double power(double mu) const { return (weighted_n * coefficients(mu)).squaredNorm(); }
};

// n_t x n_t form in whitened coordinates x = Pi_B^{1/2} v:
// (Q + mu I) x = F with Q = Pi^{1/2} N D N^H Pi^{1/2}, F = Pi^{1/2} N D.
struct DenseTransmit {
  VectorR sqrt_pi;
  VectorR eigenvalues;
  MatrixC eigenvectors;
  MatrixC projected_rhs;  // U^H F

  double power(double mu) const {
    double p = 0.0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
      const double denom = eigenvalues(i) + mu;
      p += projected_rhs.row(i).squaredNorm() / (denom * denom);
    }
    return p;
  }
  MatrixC solution(double mu) const {
    VectorR scale = (eigenvalues.array() + mu).inverse();
    MatrixC x = eigenvectors * (scale.asDiagonal() * projected_rhs);
    return sqrt_pi.cwiseInverse().asDiagonal() * x;
  }
};

MatrixC receive_stack(const SolverState& state, const ChannelSet& channels) {
  const int k_users = channels.num_users();
  const int d = stream_width(state);
  MatrixC n(channels.num_tx(), static_cast<Eigen::Index>(k_users) * d);
  for (int k = 0; k < k_users; ++k) {
    n.middleCols(static_cast<Eigen::Index>(k) * d, d) =
        channels.h[k].adjoint() * (channels.pi_u[k].asDiagonal() * state.u[k]);
  }
  return n;
}

MatrixC block_diagonal(std::span<const MatrixC> blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.rows();
  MatrixC out = MatrixC::Zero(total, total);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    out.block(offset, offset, b.rows(), b.cols()) = b;
    offset += b.rows();
  }
  return out;
}

LowRankTransmit prepare_low_rank(const SolverState& state, const ChannelSet& channels) {
  LowRankTransmit t;
  t.n = receive_stack(state, channels);
  t.weighted_n = channels.pi_b.cwiseSqrt().asDiagonal() * t.n;
  t.d = block_diagonal(state.w);
  t.gamma = t.d * hermitian_part(t.weighted_n.adjoint() * t.weighted_n);
  return t;
}

DenseTransmit prepare_dense(const SolverState& state, const ChannelSet& channels) {
  DenseTransmit t;
  t.sqrt_pi = channels.pi_b.cwiseSqrt();
  const MatrixC n = t.sqrt_pi.asDiagonal() * receive_stack(state, channels);
  const MatrixC d = block_diagonal(state.w);
  const MatrixC f = n * d;
  const MatrixC q = hermitian_part(f * n.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixC> eig(q);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("update_beamformers: eigendecomposition failed");
  }
  t.eigenvalues = eig.eigenvalues().cwiseMax(0.0);
  t.eigenvectors = eig.eigenvectors();
  t.projected_rhs = t.eigenvectors.adjoint() * f;
  // F lies in range(Q), of rank <= Kd. Components along the remaining
  // (numerically null) directions are round-off that 1/mu would amplify.
  const Eigen::Index null_dims = std::max<Eigen::Index>(0, q.rows() - d.rows());
  t.projected_rhs.topRows(null_dims).setZero();
  return t;
}

std::vector<MatrixC> split_columns(const MatrixC& all, int users, int d) {
  std::vector<MatrixC> out;
  out.reserve(users);
  for (int k = 0; k < users; ++k) {
    out.push_back(all.middleCols(static_cast<Eigen::Index>(k) * d, d));
  }
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("solver: epsilon must be positive");
  if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (!(bisect_tol > 0.0 && bisect_tol < 0.1)) {
    throw std::invalid_argument("solver: bisect_tol must lie in (0, 0.1)");
  }
  if (mu_max_doublings < 1) {
    throw std::invalid_argument("solver: mu_max_doublings must be >= 1");
  }
}

double mu_floor(double budget, const ChannelSet& channels) {
  return 1e-12 * budget / channels.tx_area();
}

double logdet(const MatrixC& m) {
  Eigen::PartialPivLU<MatrixC> lu(m);
  const MatrixC& factors = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < factors.rows(); ++i) {
    const double mag = std::abs(factors(i, i));
    if (!(mag > 0.0) || !std::isfinite(mag)) throw NumericalError("logdet: singular matrix");
    acc += std::log(mag);
  }
  return acc;
}

double transmit_power(std::span<const MatrixC> v, const VectorR& pi_b) {
  double p = 0.0;
  for (const auto& vk : v) {
    p += (pi_b.asDiagonal() * vk.cwiseAbs2()).sum();
  }
  return p;
}

SolverState init_beamformers(const ChannelSet& channels, int streams, double budget,
                             const SolverConfig& config, std::uint64_t seed) {
  if (streams < 1) throw std::invalid_argument("init_beamformers: streams must be >= 1");
  const int k_users = channels.num_users();
  const Eigen::Index n_t = channels.num_tx();
  SolverState state;
  if (config.init == InitKind::RandomGaussian) {
    GaussianSource gauss(seed);
    for (int k = 0; k < k_users; ++k) {
      MatrixC v(n_t, streams);
      for (Eigen::Index c = 0; c < streams; ++c) {
        for (Eigen::Index r = 0; r < n_t; ++r) v(r, c) = gauss.next_complex();
      }
      state.v.push_back(std::move(v));
    }
  } else {
    for (int k = 0; k < k_users; ++k) {
      const MatrixC& h = channels.h[k];
      const Eigen::Index n_r = h.rows();
      std::vector<Eigen::Index> rows(n_r);
      for (Eigen::Index i = 0; i < n_r; ++i) rows[i] = i;
      if (k < static_cast<int>(channels.user_grids.size())) {
        const auto& pts = channels.user_grids[k].points;
        Vec3 centroid{0.0, 0.0, 0.0};
        for (const auto& p : pts) {
          for (int a = 0; a < 3; ++a) centroid[a] += p[a] / static_cast<double>(pts.size());
        }
        std::stable_sort(rows.begin(), rows.end(), [&](Eigen::Index a, Eigen::Index b) {
          return distance(pts[a], centroid) < distance(pts[b], centroid);
        });
      }
      MatrixC v(n_t, streams);
      for (int c = 0; c < streams; ++c) {
        v.col(c) = h.row(rows[c % n_r]).adjoint();
      }
      state.v.push_back(std::move(v));
    }
  }
  const double p = transmit_power(state.v, channels.pi_b);
  if (p > 0.0) {
    const double scale = std::sqrt(budget / p);
    for (auto& vk : state.v) vk *= scale;
  }
  for (int k = 0; k < k_users; ++k) {
    state.u.push_back(MatrixC::Zero(channels.num_rx(k), streams));
    state.w.push_back(MatrixC::Identity(streams, streams));
  }
  return state;
}

SolverState init_beamformers(const Scenario& scenario, const ChannelSet& channels,
                             const SolverConfig& config) {
  return init_beamformers(channels, scenario.streams, scenario.budget, config, scenario.seed);
}

std::vector<MatrixC> update_combiners(const SolverState& state, const ChannelSet& channels,
                                      double noise_variance, bool use_woodbury) {
  const int k_users = channels.num_users();
  const int d = stream_width(state);
  const MatrixC stacked = weighted_stack(state.v, channels.pi_b);
  std::vector<MatrixC> out;
  out.reserve(k_users);
  for (int k = 0; k < k_users; ++k) {
    const std::string what = "update_combiners (user " + std::to_string(k) + ")";
    const MatrixC c = channels.h[k] * stacked;  // [E_k1, ..., E_kK]
    const auto& pi_u = channels.pi_u[k];
    if (use_woodbury) {
      // U_k = C (sigma^2 I + C^H Pi_U C)^{-1} S_k, S_k selecting block k.
      MatrixC gram = hermitian_part(c.adjoint() * (pi_u.asDiagonal() * c));
      gram.diagonal().array() += noise_variance;
      MatrixC select = MatrixC::Zero(gram.rows(), d);
      select.middleRows(static_cast<Eigen::Index>(k) * d, d).setIdentity();
      MatrixC u = c * hpd_solve(gram, select, what);
      require_finite(u, what);
      out.push_back(std::move(u));
    } else {
      const VectorR sq = pi_u.cwiseSqrt();
      const MatrixC cw = sq.asDiagonal() * c;
      MatrixC system = hermitian_part(cw * cw.adjoint());
      system.diagonal().array() += noise_variance;
      const MatrixC rhs = cw.middleCols(static_cast<Eigen::Index>(k) * d, d);
      MatrixC u = sq.cwiseInverse().asDiagonal() * hpd_solve(system, rhs, what);
      out.push_back(std::move(u));
    }
  }
  return out;
}

std::vector<MatrixC> update_weights(const SolverState& state, const ChannelSet& channels) {
  const int k_users = channels.num_users();
  const int d = stream_width(state);
  std::vector<MatrixC> out;
  out.reserve(k_users);
  for (int k = 0; k < k_users; ++k) {
    const MatrixC link = channels.h[k] * (channels.pi_b.asDiagonal() * state.v[k]);
    const MatrixC b = state.u[k].adjoint() * (channels.pi_u[k].asDiagonal() * link);
    const MatrixC a = MatrixC::Identity(d, d) - b;
    Eigen::PartialPivLU<MatrixC> lu(a);
    if (!(lu.rcond() > 1e-14)) {
      throw NumericalError("update_weights: I - B is singular for user " + std::to_string(k));
    }
    MatrixC w = lu.solve(MatrixC::Identity(d, d));
    require_finite(w, "update_weights (user " + std::to_string(k) + ")");
    out.push_back(hermitian_part(w));
  }
  return out;
}

std::vector<MatrixC> beamformers_at_mu(const SolverState& state, const ChannelSet& channels,
                                       double mu, bool use_woodbury) {
  const int d = stream_width(state);
  MatrixC all;
  if (use_woodbury) {
    const LowRankTransmit t = prepare_low_rank(state, channels);
    all = t.n * t.coefficients(mu);
  } else {
    all = prepare_dense(state, channels).solution(mu);
  }
  require_finite(all, "update_beamformers");
  return split_columns(all, channels.num_users(), d);
}

BisectionResult bisect_mu(const std::function<double(double)>& power_of_mu, double budget,
                          double floor, const SolverConfig& config) {
  BisectionResult result;
  if (power_of_mu(floor) <= budget) {
    result.mu = floor;
    result.active = false;
    return result;
  }
  double lo = floor;
  double hi = 2.0 * floor;
  double p_hi = power_of_mu(hi);
  int doublings = 0;
  while (!(p_hi <= budget)) {
    if (++doublings > config.mu_max_doublings) {
      throw ConvergenceError("bisect_mu: no bracket after " +
                             std::to_string(config.mu_max_doublings) + " doublings");
    }
    lo = hi;
    hi *= 2.0;
    p_hi = power_of_mu(hi);
  }
  const double target = budget * (1.0 - config.bisect_tol);
  while (p_hi < target) {
    const double mid = std::sqrt(lo * hi);
    if (!(mid > lo && mid < hi)) break;
    const double p = power_of_mu(mid);
    ++result.steps;
    if (p > budget) {
      lo = mid;
    } else {
      hi = mid;
      p_hi = p;
    }
  }
  result.mu = hi;
  return result;
}

BeamformerUpdate update_beamformers(const SolverState& state, const ChannelSet& channels,
                                    double budget, const SolverConfig& config) {
  const int d = stream_width(state);
  const double floor = mu_floor(budget, channels);
  BeamformerUpdate out;
  MatrixC all;
  if (config.use_woodbury) {
    const LowRankTransmit t = prepare_low_rank(state, channels);
    const auto r = bisect_mu([&t](double mu) { return t.power(mu); }, budget, floor, config);
    out.mu = r.mu;
    out.constraint_active = r.active;
    out.bisection_steps = r.steps;
    all = t.n * t.coefficients(r.mu);
  } else {
    const DenseTransmit t = prepare_dense(state, channels);
    const auto r = bisect_mu([&t](double mu) { return t.power(mu); }, budget, floor, config);
    out.mu = r.mu;
    out.constraint_active = r.active;
    out.bisection_steps = r.steps;
    all = t.solution(r.mu);
  }
  require_finite(all, "update_beamformers");
  out.v = split_columns(all, channels.num_users(), d);
  // Round-off between power(mu) and the assembled V can leave it a hair
  // above the budget.
  const double p = transmit_power(out.v, channels.pi_b);
  if (p > budget) {
    const double scale = std::sqrt(budget / p);
    for (auto& v : out.v) v *= scale;
  }
  return out;
}

std::vector<MatrixC> mmse_errors(std::span<const MatrixC> v, const ChannelSet& channels,
                                 double noise_variance) {
  const int k_users = channels.num_users();
  const int d = v.empty() ? 0 : static_cast<int>(v.front().cols());
  const MatrixC stacked = weighted_stack(v, channels.pi_b);
  std::vector<MatrixC> out;
  out.reserve(k_users);
  for (int k = 0; k < k_users; ++k) {
    const MatrixC c = channels.pi_u[k].cwiseSqrt().asDiagonal() * (channels.h[k] * stacked);
    MatrixC gram = hermitian_part(c.adjoint() * c);
    gram.diagonal().array() += noise_variance;
    MatrixC select = MatrixC::Zero(gram.rows(), d);
    select.middleRows(static_cast<Eigen::Index>(k) * d, d).setIdentity();
    const MatrixC y = hpd_solve(gram, select, "mmse_errors (user " + std::to_string(k) + ")");
    out.push_back(hermitian_part(noise_variance * y.middleRows(static_cast<Eigen::Index>(k) * d, d)));
  }
  return out;
}

std::vector<MatrixC> update_weights_mmse(std::span<const MatrixC> v, const ChannelSet& channels,
                                         double noise_variance) {
  std::vector<MatrixC> out;
  for (const auto& e : mmse_errors(v, channels, noise_variance)) {
    const Eigen::Index d = e.rows();
    MatrixC w = hpd_solve(e, MatrixC::Identity(d, d), "update_weights");
    out.push_back(hermitian_part(w));
  }
  return out;
}

std::vector<MatrixC> mse_matrices(const SolverState& state, const ChannelSet& channels,
                                  double noise_variance) {
  const int k_users = channels.num_users();
  const int d = stream_width(state);
  const MatrixC stacked = weighted_stack(state.v, channels.pi_b);
  std::vector<MatrixC> out;
  out.reserve(k_users);
  for (int k = 0; k < k_users; ++k) {
    const MatrixC weighted_u = channels.pi_u[k].asDiagonal() * state.u[k];
    const MatrixC b_all = weighted_u.adjoint() * (channels.h[k] * stacked);  // [B_k1..B_kK]
    // (I - B_kk)(I - B_kk)^H + sum_{j != k} B_kj B_kj^H + sigma^2 U^H Pi U; expanding
    // the first product instead cancels badly once E_k ~ 1e-12.
    MatrixC gap = MatrixC::Identity(d, d) - b_all.middleCols(static_cast<Eigen::Index>(k) * d, d);
    MatrixC e = gap * gap.adjoint() + noise_variance * (state.u[k].adjoint() * weighted_u);
    for (int j = 0; j < k_users; ++j) {
      if (j == k) continue;
      const auto b_kj = b_all.middleCols(static_cast<Eigen::Index>(j) * d, d);
      e += b_kj * b_kj.adjoint();
    }
    out.push_back(hermitian_part(e));
  }
  return out;
}

double weighted_mse_objective(const SolverState& state, const ChannelSet& channels,
                              double noise_variance) {
  const auto e = mse_matrices(state, channels, noise_variance);
  double total = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    total += (state.w[k] * e[k]).trace().real() - logdet(state.w[k]);
  }
  return total;
}

RateReport evaluate_se(std::span<const MatrixC> v, const ChannelSet& channels,
                       double noise_variance) {
  const int k_users = channels.num_users();
  const int d = v.empty() ? 0 : static_cast<int>(v.front().cols());
  const MatrixC stacked = weighted_stack(v, channels.pi_b);
  RateReport report;
  for (int k = 0; k < k_users; ++k) {
    const MatrixC e_all = channels.h[k] * stacked;
    const MatrixC e_kk = e_all.middleCols(static_cast<Eigen::Index>(k) * d, d);
    MatrixC interference(e_all.rows(), static_cast<Eigen::Index>(k_users - 1) * d);
    for (int j = 0, col = 0; j < k_users; ++j) {
      if (j == k) continue;
      interference.middleCols(static_cast<Eigen::Index>(col++) * d, d) =
          e_all.middleCols(static_cast<Eigen::Index>(j) * d, d);
    }
    const auto& pi_u = channels.pi_u[k];
    const MatrixC weighted_kk = pi_u.asDiagonal() * e_kk;
    MatrixC a = e_kk.adjoint() * weighted_kk;  // S
    if (interference.cols() > 0) {
      MatrixC g = hermitian_part(interference.adjoint() * (pi_u.asDiagonal() * interference));
      g.diagonal().array() += noise_variance;
      const MatrixC x = weighted_kk.adjoint() * interference;  // E_kk^H Pi C
      a -= x * hpd_solve(g, x.adjoint(), "evaluate_se");
    }
    MatrixC m = hermitian_part(a / noise_variance);
    m.diagonal().array() += 1.0;
    double rate = 0.0;
    Eigen::LLT<MatrixC> llt(m);
    if (llt.info() == Eigen::Success) {
      const MatrixC l = llt.matrixL();
      for (Eigen::Index i = 0; i < l.rows(); ++i) rate += 2.0 * std::log(l(i, i).real());
    } else {
      rate = logdet(m);
    }
    report.per_user.push_back(rate);
    report.sum += rate;
  }
  return report;
}

double rebalance_scale(SolverState& state, const ChannelSet& channels, double budget) {
  const double p = transmit_power(state.v, channels.pi_b);
  if (!(p > 0.0) || p >= budget) return 1.0;
  const double alpha = std::sqrt(budget / p);
  for (auto& v : state.v) v *= alpha;
  for (auto& u : state.u) u /= alpha;
  return alpha;
}

RunResult run(const ChannelSet& channels, int streams, double budget, double noise_variance,
              const SolverConfig& config, std::uint64_t seed, const BlockObserver& observer) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  RunResult result;
  SolverState& state = result.state;
  state = init_beamformers(channels, streams, budget, config, seed);

  double previous = 0.0;
  for (const auto& w : state.w) previous += logdet(w);

  for (int it = 1; it <= config.max_iters; ++it) {
    try {
      state.u = update_combiners(state, channels, noise_variance, config.use_woodbury);
      if (observer) observer(it, Block::Combiners, state, 0.0);
      state.w = update_weights_mmse(state.v, channels, noise_variance);
      if (observer) observer(it, Block::Weights, state, 0.0);
      BeamformerUpdate vu = update_beamformers(state, channels, budget, config);
      state.v = std::move(vu.v);
      if (!vu.constraint_active && config.rescale_inactive) {
        rebalance_scale(state, channels, budget);
      }
      if (observer) observer(it, Block::Beamformers, state, vu.mu);

      double current = 0.0;
      for (const auto& w : state.w) current += logdet(w);

      auto& tr = result.trace;
      tr.objective.push_back(weighted_mse_objective(state, channels, noise_variance));
      tr.sum_logdet_w.push_back(current);
      tr.sum_se.push_back(evaluate_se(state.v, channels, noise_variance).sum);
      tr.power.push_back(transmit_power(state.v, channels.pi_b));
      tr.mu.push_back(vu.mu);
      tr.seconds.push_back(std::chrono::duration<double>(clock::now() - start).count());
      result.iterations = it;

      if (std::abs(current - previous) <= config.epsilon) {
        result.converged = true;
        break;
      }
      previous = current;
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  return result;
}

RunResult run(const Scenario& scenario, const SolverConfig& config,
              const BlockObserver& observer) {
  const ChannelSet channels = build_channel_set(scenario);
  return run(channels, scenario.streams, scenario.budget, scenario.noise_variance, config,
             scenario.seed, observer);
}

void write_trace_csv(const IterationTrace& trace, std::ostream& out) {
  out << "iter,objective,sum_logdet_w,sum_se_bits,power,mu,seconds\n";
  char line[512];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n", i + 1,
                  trace.objective[i], trace.sum_logdet_w[i],
                  trace.sum_se[i] / std::numbers::ln2, trace.power[i], trace.mu[i],
                  trace.seconds[i]);
    out << line;
  }
}

}  // namespace capa
