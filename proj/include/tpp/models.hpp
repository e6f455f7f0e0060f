#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tpp/rng.hpp"
#include "tpp/seqdata.hpp"
#include "tpp/tpp.hpp"

namespace tpp {

enum class ModelTag { kHpp, kIpp, kRp, kMrp, kTriTpp };

std::string model_tag_name(ModelTag tag);
ModelTag parse_model_tag(const std::string& name);

struct ModelKind {
  ModelTag tag = ModelTag::kTriTpp;
  std::size_t knots = 20;   // K
  std::size_t block = 16;   // H
  std::size_t layers = 4;   // L
  double horizon = 1.0;     // T
  // Every kind starts as HPP(exp(init_log_rate)).
  double init_log_rate = 0.0;

  void validate() const;
};

// Chains, first layer applied first:
//   hpp    lambda
//   ipp    1/T, G1, lambda
//   rp     1/T, D, lambda, psi, G2, psi^-1, C
//   mrp    1/T, G1, lambda, D, psi, G2, psi^-1, C
//   tritpp 1/T, G1, lambda, D, psi, G2, logit, B_1..B_L, sigmoid, G3, psi^-1, C
// G1 has linear tails so extended samples past T stay in its domain.
TppModel build_model(const ModelKind& kind);

// lambda*(t) = mu + alpha * sum_{t_j < t} exp(-beta (t - t_j))
struct HawkesExpParams {
  double mu = 1.0;
  double alpha = 0.0;
  double beta = 1.0;
};

double hawkes_log_prob(const HawkesExpParams& p, const EventSequence& seq);

struct HawkesGrad {
  double value = 0.0;
  double d_log_mu = 0.0;
  double d_log_alpha = 0.0;
  double d_log_beta = 0.0;
};
// Log-likelihood and its gradient w.r.t. (log mu, log alpha, log beta).
HawkesGrad hawkes_log_prob_grad(const HawkesExpParams& p, const EventSequence& seq);

// Compensator values Lambda*(t_i) at each event; consecutive differences are
// exponential(1) under the model.
std::vector<double> hawkes_compensator(const HawkesExpParams& p, const EventSequence& seq);

// Ogata thinning. Requires alpha < beta.
EventSequence hawkes_sample(const HawkesExpParams& p, double horizon, Rng& rng);

struct HawkesFitConfig {
  double lr = 0.05;
  std::size_t iterations = 2000;
};
// Adam on the mean per-event log-likelihood over log-parameters.
HawkesExpParams hawkes_fit(std::span<const EventSequence> data, const HawkesFitConfig& cfg = {},
                           HawkesExpParams init = {1.0, 0.5, 2.0});

}  // namespace tpp
