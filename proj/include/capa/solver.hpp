#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "capa/channel.hpp"
#include "capa/scenario.hpp"
#include "capa/types.hpp"

namespace capa {

enum class InitKind { RandomGaussian, MatchedFilter };

struct SolverConfig {
  double epsilon = 1e-3;       // stop when |delta sum_k logdet W_k| <= epsilon
  int max_iters = 100;
  double bisect_tol = 1e-8;    // relative power tolerance of the multiplier search
  int mu_max_doublings = 200;
  InitKind init = InitKind::MatchedFilter;
  bool use_woodbury = true;
  // After a v-update that leaves the budget slack, apply rebalance_scale.
  bool rescale_inactive = true;

  void validate() const;
};

// Sampled functions at the quadrature nodes: v[k] is n_t x d, u[k] is
// n_r(k) x d, w[k] is d x d.
struct SolverState {
  std::vector<MatrixC> v;
  std::vector<MatrixC> u;
  std::vector<MatrixC> w;
};

struct IterationTrace {
  std::vector<double> objective;
  std::vector<double> sum_logdet_w;
  std::vector<double> sum_se;  // nats
  std::vector<double> power;
  std::vector<double> mu;
  std::vector<double> seconds;

  std::size_t size() const { return objective.size(); }
};

struct RateReport {
  std::vector<double> per_user;  // nats per channel use
  double sum = 0.0;
};

struct BeamformerUpdate {
  std::vector<MatrixC> v;
  double mu = 0.0;
  bool constraint_active = false;
  int bisection_steps = 0;
};

struct BisectionResult {
  double mu = 0.0;
  int steps = 0;       // power evaluations after the bracket was found
  bool active = true;  // false when mu_floor already satisfies the budget
};

// 1e-12 * C_max / A_B, with A_B the summed transmit weights.
double mu_floor(double budget, const ChannelSet& channels);

// Full-budget initialization, deterministic per seed. The matched-filter
// variant takes column i of v_k from conj(h_k(r_i, .)) for the d user-k
// samples r_i nearest the aperture center.
SolverState init_beamformers(const ChannelSet& channels, int streams, double budget,
                             const SolverConfig& config, std::uint64_t seed);
SolverState init_beamformers(const Scenario& scenario, const ChannelSet& channels,
                             const SolverConfig& config);

// sum_k tr(V_k^H Pi_B V_k)
double transmit_power(std::span<const MatrixC> v, const VectorR& pi_b);

// MMSE combiners. The Woodbury path works with the Kd x Kd Gram
// C_k^H Pi_U C_k; the direct path solves the n_r x n_r system.
std::vector<MatrixC> update_combiners(const SolverState& state, const ChannelSet& channels,
                                      double noise_variance, bool use_woodbury);

// W_k = (I - U_k^H Pi_U H_k Pi_B V_k)^{-1}, Hermitian-symmetrized.
std::vector<MatrixC> update_weights(const SolverState& state, const ChannelSet& channels);

// MSE matrices of the MMSE combiners of V, in the form
// E_k = sigma^2 S_k^T (sigma^2 I + C_k^H Pi_U C_k)^{-1} S_k,
// which equals I - U_k^H Pi_U H_k Pi_B V_k but does not cancel at high SNR.
std::vector<MatrixC> mmse_errors(std::span<const MatrixC> v, const ChannelSet& channels,
                                 double noise_variance);

// W_k = E_k^{-1} with E_k from mmse_errors. This is what run() uses after
// each u-update (U is then the MMSE combiner of V).
std::vector<MatrixC> update_weights_mmse(std::span<const MatrixC> v, const ChannelSet& channels,
                                         double noise_variance);

// Beamformers for a fixed multiplier mu.
std::vector<MatrixC> beamformers_at_mu(const SolverState& state, const ChannelSet& channels,
                                       double mu, bool use_woodbury);

// Beamformer update with the multiplier chosen so that the budget is met.
BeamformerUpdate update_beamformers(const SolverState& state, const ChannelSet& channels,
                                    double budget, const SolverConfig& config);

// power_of_mu must be decreasing. Returns mu_floor when it already satisfies
// the budget, else a mu with C_max (1 - tol) <= power(mu) <= C_max.
BisectionResult bisect_mu(const std::function<double(double)>& power_of_mu, double budget,
                          double mu_floor, const SolverConfig& config);

// V <- alpha V, U <- U / alpha with alpha = sqrt(C_max / P) when P < C_max.
// The products U^H H V are unchanged and the noise term of every E_k shrinks
// by alpha^2, so the objective cannot increase. Returns alpha (1 if no-op).
double rebalance_scale(SolverState& state, const ChannelSet& channels, double budget);

// sum_k tr(W_k E_k) - logdet W_k
double weighted_mse_objective(const SolverState& state, const ChannelSet& channels,
                              double noise_variance);

// Per-user MSE matrices E_k.
std::vector<MatrixC> mse_matrices(const SolverState& state, const ChannelSet& channels,
                                  double noise_variance);

// Achievable rate with MMSE reception, treating other users' streams as noise.
RateReport evaluate_se(std::span<const MatrixC> v, const ChannelSet& channels,
                       double noise_variance);

// Real part of log det of a square matrix; throws NumericalError if singular.
double logdet(const MatrixC& m);

enum class Block { Combiners, Weights, Beamformers };

// Called after every block update; mu is only meaningful for Beamformers.
using BlockObserver =
    std::function<void(int iteration, Block block, const SolverState& state, double mu)>;

struct RunResult {
  SolverState state;
  IterationTrace trace;
  bool converged = false;
  int iterations = 0;
};

// Alternating W/u/v updates until the logdet change drops to epsilon.
RunResult run(const ChannelSet& channels, int streams, double budget, double noise_variance,
              const SolverConfig& config, std::uint64_t seed,
              const BlockObserver& observer = {});

RunResult run(const Scenario& scenario, const SolverConfig& config,
              const BlockObserver& observer = {});

// Columns: iter, objective, sum_logdet_w, sum_se_bits, power, mu, seconds.
void write_trace_csv(const IterationTrace& trace, std::ostream& out);

}  // namespace capa
