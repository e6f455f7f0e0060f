#include "tpp/models.hpp"

#include <cmath>

#include "tpp/errors.hpp"

namespace tpp {

std::string model_tag_name(ModelTag tag) {
  switch (tag) {
    case ModelTag::kHpp: return "hpp";
    case ModelTag::kIpp: return "ipp";
    case ModelTag::kRp: return "rp";
    case ModelTag::kMrp: return "mrp";
    case ModelTag::kTriTpp: return "tritpp";
  }
  return "?";
}

ModelTag parse_model_tag(const std::string& name) {
  for (ModelTag t : {ModelTag::kHpp, ModelTag::kIpp, ModelTag::kRp, ModelTag::kMrp, ModelTag::kTriTpp}) {
    if (model_tag_name(t) == name) return t;
  }
  throw ValidationError("unknown model kind '" + name + "'");
}

void ModelKind::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("model: horizon must be positive");
  if (!std::isfinite(init_log_rate)) throw ValidationError("model: init_log_rate must be finite");
  if (tag == ModelTag::kHpp) return;
  if (knots < 2) throw ValidationError("model: spline knots K must be at least 2");
  if (tag != ModelTag::kTriTpp) return;
  if (block < 2 || block % 2 != 0) throw ValidationError("model: block size H must be even and at least 2");
  if (layers < 1) throw ValidationError("model: tritpp needs at least one block layer");
}

TppModel build_model(const ModelKind& kind) {
  kind.validate();
  using Tails = RqsSpline::Tails;
  const std::size_t K = kind.knots;
  TransformSpec spec;
  switch (kind.tag) {
    case ModelTag::kHpp:
      spec.learned_scale("log_rate");
      break;
    case ModelTag::kIpp:
      spec.scale(1.0 / kind.horizon).spline("g1", K, Tails::kLinear).learned_scale("log_rate");
      break;
    case ModelTag::kRp:
      spec.scale(1.0 / kind.horizon)
          .diff()
          .learned_scale("log_rate")
          .bridge(BridgeKind::kPsi)
          .spline("g2", K)
          .bridge(BridgeKind::kPsiInv)
          .cumsum();
      break;
    case ModelTag::kMrp:
      spec.scale(1.0 / kind.horizon)
          .spline("g1", K, Tails::kLinear)
          .learned_scale("log_rate")
          .diff()
          .bridge(BridgeKind::kPsi)
          .spline("g2", K)
          .bridge(BridgeKind::kPsiInv)
          .cumsum();
      break;
    case ModelTag::kTriTpp:
      spec.scale(1.0 / kind.horizon)
          .spline("g1", K, Tails::kLinear)
          .learned_scale("log_rate")
          .diff()
          .bridge(BridgeKind::kPsi)
          .spline("g2", K)
          .bridge(BridgeKind::kLogit);
      for (std::size_t l = 0; l < kind.layers; ++l) {
        spec.block("b" + std::to_string(l + 1), kind.block, l % 2 == 0 ? 0 : kind.block / 2);
      }
      spec.bridge(BridgeKind::kSigmoid).spline("g3", K).bridge(BridgeKind::kPsiInv).cumsum();
      break;
  }
  spec.check_chain();

  TppModel model{spec, ParamStore(spec.slice_table()), kind.horizon};
  const auto init = model.spec.identity_params();
  std::copy(init.begin(), init.end(), model.params.values().begin());
  // Non-HPP chains normalise time by T, so lambda there is the mass on [0, T].
  model.params.slice("log_rate")[0] =
      kind.init_log_rate + (kind.tag == ModelTag::kHpp ? 0.0 : std::log(kind.horizon));
  return model;
}

// ---------------------------------------------------------------------------
// Hawkes with exponential kernel

namespace {

void check_hawkes(const HawkesExpParams& p) {
  if (!(p.mu > 0.0)) throw ValidationError("hawkes: mu must be positive");
  if (!(p.beta > 0.0)) throw ValidationError("hawkes: beta must be positive");
  if (!(p.alpha >= 0.0)) throw ValidationError("hawkes: alpha must be non-negative");
}

}  // namespace

HawkesGrad hawkes_log_prob_grad(const HawkesExpParams& p, const EventSequence& seq) {
  check_hawkes(p);
  validate(seq);
  const double T = seq.horizon;
  HawkesGrad g;
  double s = 0.0;   // sum_{j<i} exp(-beta (t_i - t_j))
  double ds = 0.0;  // d s / d beta
  double prev = 0.0;
  double d_mu = 0.0, d_alpha = 0.0, d_beta = 0.0;
  for (std::size_t i = 0; i < seq.times.size(); ++i) {
    const double t = seq.times[i];
    if (i > 0) {
      const double dt = t - prev;
      const double e = std::exp(-p.beta * dt);
      ds = e * (ds - dt * (s + 1.0));
      s = e * (s + 1.0);
    }
    const double lam = p.mu + p.alpha * s;
    g.value += std::log(lam);
    d_mu += 1.0 / lam;
    d_alpha += s / lam;
    d_beta += p.alpha * ds / lam;
    prev = t;
  }
  double tail = 0.0, dtail = 0.0;  // sum (1 - e_j), sum (T - t_j) e_j
  for (const double t : seq.times) {
    const double e = std::exp(-p.beta * (T - t));
    tail += 1.0 - e;
    dtail += (T - t) * e;
  }
  g.value -= p.mu * T + p.alpha / p.beta * tail;
  d_mu -= T;
  d_alpha -= tail / p.beta;
  d_beta -= -p.alpha / (p.beta * p.beta) * tail + p.alpha / p.beta * dtail;
  g.d_log_mu = d_mu * p.mu;
  g.d_log_alpha = d_alpha * p.alpha;
  g.d_log_beta = d_beta * p.beta;
  return g;
}

double hawkes_log_prob(const HawkesExpParams& p, const EventSequence& seq) {
  return hawkes_log_prob_grad(p, seq).value;
}

std::vector<double> hawkes_compensator(const HawkesExpParams& p, const EventSequence& seq) {
  check_hawkes(p);
  validate(seq);
  std::vector<double> out;
  out.reserve(seq.times.size());
  double s = 0.0;  // sum_{j<i} exp(-beta (t_i - t_j)) evaluated at the previous event
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < seq.times.size(); ++i) {
    const double dt = seq.times[i] - prev;
    const double carry = i == 0 ? 0.0 : s + 1.0;  // excitation just after prev
    acc += p.mu * dt + p.alpha / p.beta * carry * (1.0 - std::exp(-p.beta * dt));
    out.push_back(acc);
    s = carry * std::exp(-p.beta * dt);
    prev = seq.times[i];
  }
  return out;
}

EventSequence hawkes_sample(const HawkesExpParams& p, double horizon, Rng& rng) {
  check_hawkes(p);
  if (!(p.alpha < p.beta)) throw ValidationError("hawkes_sample: requires alpha < beta");
  if (!(horizon > 0.0)) throw ValidationError("hawkes_sample: horizon must be positive");
  EventSequence out;
  out.horizon = horizon;
  double t = 0.0;
  double excite = 0.0;  // alpha * sum exp(-beta (t - t_j)) at time t
  for (;;) {
    // Intensity only decays between events, so its current value bounds it.
    const double bound = p.mu + excite;
    const double gap = rng.exponential(bound);
    if (t + gap > horizon) break;
    t += gap;
    excite *= std::exp(-p.beta * gap);
    if (rng.uniform() * bound <= p.mu + excite) {
      out.times.push_back(t);
      excite += p.alpha;
    }
  }
  return out;
}

HawkesExpParams hawkes_fit(std::span<const EventSequence> data, const HawkesFitConfig& cfg, HawkesExpParams init) {
  if (data.empty()) throw ValidationError("hawkes_fit: empty dataset");
  check_hawkes(init);
  double events = 0.0;
  for (const auto& s : data) events += static_cast<double>(s.times.size());
  const double norm = 1.0 / std::max(1.0, events);
  double th[3] = {std::log(init.mu), std::log(std::max(init.alpha, 1e-6)), std::log(init.beta)};
  double m[3] = {0, 0, 0}, v[3] = {0, 0, 0};
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const HawkesExpParams p{std::exp(th[0]), std::exp(th[1]), std::exp(th[2])};
    double g[3] = {0, 0, 0};
    for (const auto& s : data) {
      const auto r = hawkes_log_prob_grad(p, s);
      g[0] -= r.d_log_mu * norm;
      g[1] -= r.d_log_alpha * norm;
      g[2] -= r.d_log_beta * norm;
    }
    for (int k = 0; k < 3; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
      const double mh = m[k] / (1 - std::pow(b1, static_cast<double>(it)));
      const double vh = v[k] / (1 - std::pow(b2, static_cast<double>(it)));
      th[k] -= cfg.lr * mh / (std::sqrt(vh) + eps);
    }
  }
  return {std::exp(th[0]), std::exp(th[1]), std::exp(th[2])};
}

}  // namespace tpp
