#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tpp/mjp.hpp"
#include "tpp/models.hpp"
#include "tpp/rng.hpp"
#include "tpp/tpp.hpp"

namespace tpp {

struct ElboOptions {
  std::size_t samples = 512;
  // Relaxation temperature; unset evaluates the hard-indicator ELBO.
  std::optional<double> gamma = 0.1;
  // Extended samples reach T + margin_factor * gamma so the soft masks of the
  // truncated tail are negligible.
  double margin_factor = 30.0;
  std::size_t ext_hint = 64;
  bool want_grad = true;
};

// Gradient w.r.t. the unconstrained MMPP parameters:
// pi = softmax(pi_logits), A = exp(log_A), lambda = exp(log_lambda).
struct MmppGrad {
  Eigen::VectorXd pi_logits;
  Eigen::MatrixXd log_A;
  Eigen::VectorXd log_lambda;
};

struct ElboResult {
  double value = 0.0;      // Monte Carlo mean
  double std_error = 0.0;  // of the mean
  std::vector<double> per_sample;
  std::vector<double> grad_q;  // d value / d q parameters
  MmppGrad grad_theta;
};

// Per sample: extended jumps t^ = F^-1(z), clipped t = min(t^, T). The inner
// expectation over states is exact: it equals log p(t, o | theta) of the chain
// whose segments are [t_{i-1}, t_i] and whose i-th jump carries the weight
//   m_i A + (1 - m_i) I,  m_i = 1(t^_i < T) or sigmoid((T - t^_i) / gamma).
// Segment counts use sigmoid((t^_i - o) / gamma) boundaries when relaxed.
// log q(t) = sum m_i logdiag_i - sum w_i z_i with w_i = m_{i-1} - m_i selecting
// the first clipped column.
ElboResult elbo(const TppModel& q, const MmppParams& theta, std::span<const double> obs, const ElboOptions& opts,
                const Rng& rng);

struct ViConfig {
  std::size_t iterations = 1000;
  double lr = 0.01;
  double theta_lr = 0.01;
  bool learn_theta = false;
  ElboOptions elbo;
  std::uint64_t seed = 0;
  // q architecture: TriTPP with these hyperparameters on [0, T].
  std::size_t knots = 20;
  std::size_t block = 4;
  std::size_t layers = 2;
};

struct ViResult {
  TppModel q;
  MmppParams theta;
  std::vector<double> elbo_history;
};

// Stochastic gradient ascent on the ELBO; q starts as an HPP with the prior
// jump rate sum_k pi_k A_k.
ViResult fit_vi(std::span<const double> obs, double horizon, const MmppParams& theta, const ViConfig& cfg);

// Posterior state marginals at grid times, averaged over `samples` draws from
// q with the exact q(s | t) for each draw.
Eigen::MatrixXd vi_marginals(const TppModel& q, const MmppParams& theta, std::span<const double> obs,
                             std::span<const double> grid, std::size_t samples, const Rng& rng);

// Map between MmppParams and the flat unconstrained vector
// [pi_logits (K), log_A (K*K row-major), log_lambda (K)].
std::vector<double> mmpp_to_unconstrained(const MmppParams& p);
MmppParams mmpp_from_unconstrained(std::span<const double> u, std::size_t K);
std::vector<double> flatten(const MmppGrad& g);

}  // namespace tpp
