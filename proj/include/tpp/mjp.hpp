#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tpp/rng.hpp"

namespace tpp {

// Markov-modulated Poisson process. Self-jumps are allowed: a jump from k
// goes to l with probability A(k, l) / A_k, A_k = sum_l A(k, l).
struct MmppParams {
  Eigen::VectorXd pi;
  Eigen::MatrixXd A;
  Eigen::VectorXd lambda;

  std::size_t states() const { return static_cast<std::size_t>(pi.size()); }
  Eigen::VectorXd total_rates() const { return A.rowwise().sum(); }
  // Generator of the state path with self-jumps removed.
  Eigen::MatrixXd generator() const;
  void validate() const;
};

// Jump times t_1 < ... < t_N in (0, T) and states s_1..s_{N+1}.
struct Trajectory {
  std::vector<double> times;
  std::vector<int> states;
  double horizon = 1.0;

  void validate(std::size_t K) const;
  int state_at(double time) const;
};

struct MmppSample {
  Trajectory traj;
  std::vector<double> obs;
};

MmppSample simulate_mmpp(const MmppParams& p, double horizon, Rng& rng);

// log p(t, s | pi, A)
double traj_log_prob(const Trajectory& traj, const MmppParams& p);
// log p(o | t, s, lambda)
double obs_log_prob(std::span<const double> obs, const Trajectory& traj, const Eigen::VectorXd& lambda);

// Chain over segments i = 0..n-1 with
//   p(s) ∝ pi(s_0) prod_i exp(unary(i, s_i)) prod_{i<n-1} M_i(s_i, s_{i+1}).
// M_i are non-negative linear-domain transition weights.
struct ChainResult {
  double log_z = 0.0;
  Eigen::MatrixXd marginals;               // n x K
  std::vector<Eigen::MatrixXd> pairwise;   // n-1 of K x K
  std::vector<Eigen::MatrixXd> dlogz_dM;   // n-1 of K x K
  Eigen::VectorXd dlogz_dpi;               // K
};
ChainResult chain_forward_backward(const Eigen::VectorXd& pi, const Eigen::MatrixXd& unary,
                                   std::span<const Eigen::MatrixXd> trans, bool want_pairwise = true);

// Observation counts per segment [t_{i-1}, t_i), with t_0 = 0 and t_{N+1} = T.
std::vector<double> segment_counts(std::span<const double> obs, std::span<const double> jumps, double horizon);

// Posterior over states given jump times and observations. Segment i has
// log-potential -dt_i (A_k + lambda_k) + count_i log lambda_k and every jump
// carries weight A(k, l).
struct HmmPosterior {
  Eigen::MatrixXd marginals;              // (N+1) x K
  std::vector<Eigen::MatrixXd> pairwise;  // N of K x K
  double log_evidence = 0.0;              // log p(t, o | theta)
};
HmmPosterior forward_backward(std::span<const double> obs, std::span<const double> jumps, double horizon,
                              const MmppParams& p);

// log p(o | theta) with the latent path integrated out exactly.
double mmpp_log_evidence(std::span<const double> obs, double horizon, const MmppParams& p);

// Exact posterior state marginals p(s(g) = k | o) at grid times; rows follow grid.
Eigen::MatrixXd mmpp_exact_marginals(std::span<const double> obs, double horizon, const MmppParams& p,
                                     std::span<const double> grid);

std::vector<double> linspace(double lo, double hi, std::size_t n);

struct RaoTehConfig {
  std::size_t samples = 1000;
  std::size_t burn_in = 100;
  // Uniformization rate as a multiple of max_k A_k.
  double omega_factor = 2.0;
};

// Uniformization Gibbs sampler; returns occupancy estimates (grid x K).
Eigen::MatrixXd rao_teh_posterior(std::span<const double> obs, double horizon, const MmppParams& p,
                                  std::span<const double> grid, Rng& rng, const RaoTehConfig& cfg = {});

}  // namespace tpp
