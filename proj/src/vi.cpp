#include "tpp/vi.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "tpp/errors.hpp"
#include "tpp/train.hpp"

namespace tpp {

namespace {

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

// Beyond this many temperatures from a boundary the sigmoid is saturated.
constexpr double kWindow = 40.0;

struct SampleOut {
  double value = 0.0;
  std::vector<double> grad_q;
  Eigen::VectorXd g_pi;       // d/d pi
  Eigen::MatrixXd g_A;        // d/d A
  Eigen::VectorXd g_lambda;   // d/d lambda
};

// Soft count of sorted observations below x and the derivative w.r.t. x.
void soft_cdf(std::span<const double> obs, double x, double gamma, double& value, double& deriv) {
  const auto lo = std::lower_bound(obs.begin(), obs.end(), x - kWindow * gamma);
  const auto hi = std::upper_bound(obs.begin(), obs.end(), x + kWindow * gamma);
  value = static_cast<double>(lo - obs.begin());
  deriv = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double s = sigmoid((x - *it) / gamma);
    value += s;
    deriv += s * (1.0 - s) / gamma;
  }
}

SampleOut elbo_sample(const Flow& flow, const MmppParams& theta, std::span<const double> obs, double T,
                      const ElboOptions& opts, const Rng& stream) {
  const Eigen::Index K = theta.pi.size();
  const std::optional<double> gamma = opts.gamma;
  const double margin = gamma ? opts.margin_factor * *gamma : 0.0;
  std::vector<double> z, that;
  sample_row(flow, stream, T + margin, opts.ext_hint, std::size_t{1} << 20, z, that);
  const std::size_t n = that.size();

  std::vector<double> tbar(n), m(n), F(n), dF(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    tbar[j] = std::min(that[j], T);
    m[j] = gamma ? sigmoid((T - that[j]) / *gamma) : (that[j] < T ? 1.0 : 0.0);
    if (j + 1 == n) {
      F[j] = static_cast<double>(obs.size());
    } else if (gamma) {
      soft_cdf(obs, that[j], *gamma, F[j], dF[j]);
    } else {
      F[j] = that[j] < T ? static_cast<double>(std::lower_bound(obs.begin(), obs.end(), that[j]) - obs.begin())
                         : static_cast<double>(obs.size());
    }
  }

  const Eigen::VectorXd rates = theta.total_rates();
  const Eigen::VectorXd exitlam = rates + theta.lambda;
  const Eigen::VectorXd loglam = theta.lambda.array().log();
  Eigen::MatrixXd unary(static_cast<Eigen::Index>(n), K);
  std::vector<double> delta(n), count(n);
  for (std::size_t j = 0; j < n; ++j) {
    delta[j] = tbar[j] - (j == 0 ? 0.0 : tbar[j - 1]);
    count[j] = F[j] - (j == 0 ? 0.0 : F[j - 1]);
    unary.row(static_cast<Eigen::Index>(j)) = (-delta[j] * exitlam + count[j] * loglam).transpose();
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
  std::vector<Eigen::MatrixXd> trans(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) trans[j] = m[j] * theta.A + (1.0 - m[j]) * I;
  const auto chain = chain_forward_backward(theta.pi, unary, trans, false);

  Tape fwd;
  std::vector<double> zbar(n), ld(n);
  flow.forward(tbar, zbar, ld, &fwd);
  std::vector<double> w(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double prev = j == 0 ? 1.0 : m[j - 1];
    w[j] = j + 1 == n ? prev : prev - m[j];
  }
  double log_q = 0.0;
  for (std::size_t j = 0; j < n; ++j) log_q += m[j] * ld[j] - w[j] * zbar[j];

  SampleOut out;
  out.value = chain.log_z - log_q;
  if (!opts.want_grad) return out;

  const auto& gam = chain.marginals;
  std::vector<double> g_tbar(n, 0.0), g_that(n, 0.0), g_m(n, 0.0), g_count(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto row = gam.row(static_cast<Eigen::Index>(j));
    const double g_delta = -row.dot(exitlam.transpose());
    g_tbar[j] += g_delta;
    if (j > 0) g_tbar[j - 1] -= g_delta;
    g_count[j] = row.dot(loglam.transpose());
  }
  if (gamma) {
    for (std::size_t j = 0; j + 1 < n; ++j) g_that[j] += (g_count[j] - g_count[j + 1]) * dF[j];
  }
  for (std::size_t j = 0; j + 1 < n; ++j) {
    g_m[j] += (chain.dlogz_dM[j].cwiseProduct(theta.A - I)).sum();
    g_m[j] += zbar[j + 1] - zbar[j];
  }
  for (std::size_t j = 0; j < n; ++j) g_m[j] -= ld[j];

  const std::size_t P = flow.param_count();
  out.grad_q.assign(P, 0.0);
  std::vector<double> cot_z(n), cot_ld(n), g_t_flow(n);
  for (std::size_t j = 0; j < n; ++j) {
    cot_z[j] = w[j];
    cot_ld[j] = -m[j];
  }
  flow.backward(fwd, cot_z, cot_ld, out.grad_q, g_t_flow);
  for (std::size_t j = 0; j < n; ++j) {
    g_tbar[j] += g_t_flow[j];
    if (that[j] < T) g_that[j] += g_tbar[j];
    if (gamma) g_that[j] -= g_m[j] * m[j] * (1.0 - m[j]) / *gamma;
  }
  Tape inv;
  std::vector<double> t_check(n), g_z(n);
  flow.inverse(z, t_check, &inv);
  flow.inverse_backward(inv, g_that, out.grad_q, g_z);

  out.g_pi = chain.dlogz_dpi;
  out.g_lambda = Eigen::VectorXd::Zero(K);
  out.g_A = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t j = 0; j < n; ++j) {
    const auto row = gam.row(static_cast<Eigen::Index>(j)).transpose();
    out.g_lambda += row.cwiseProduct(-delta[j] * Eigen::VectorXd::Ones(K) + count[j] * theta.lambda.cwiseInverse());
    out.g_A.colwise() -= delta[j] * row;
    if (j + 1 < n) out.g_A += m[j] * chain.dlogz_dM[j];
  }
  return out;
}

}  // namespace

ElboResult elbo(const TppModel& q, const MmppParams& theta, std::span<const double> obs_in, const ElboOptions& opts,
                const Rng& rng) {
  theta.validate();
  if (opts.samples == 0) throw ValidationError("elbo: need at least one Monte Carlo sample");
  if (opts.gamma && !(*opts.gamma > 0.0)) throw ValidationError("elbo: gamma must be positive");
  std::vector<double> obs(obs_in.begin(), obs_in.end());
  std::sort(obs.begin(), obs.end());
  const double T = q.horizon;
  for (const double o : obs) {
    if (o < 0.0 || o > T) throw ValidationError("elbo: observation outside [0, T]");
  }
  const Flow flow = q.flow();
  const std::size_t S = opts.samples;
  std::vector<SampleOut> outs(S);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(S); ++si) {
    try {
      outs[static_cast<std::size_t>(si)] = elbo_sample(flow, theta, obs, T, opts, rng.split(static_cast<std::uint64_t>(si)));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  const Eigen::Index K = theta.pi.size();
  ElboResult r;
  r.per_sample.resize(S);
  const double inv = 1.0 / static_cast<double>(S);
  for (std::size_t s = 0; s < S; ++s) {
    r.per_sample[s] = outs[s].value;
    r.value += outs[s].value * inv;
  }
  double var = 0.0;
  for (const double v : r.per_sample) var += (v - r.value) * (v - r.value);
  r.std_error = S > 1 ? std::sqrt(var / static_cast<double>(S - 1) * inv) : 0.0;
  if (!opts.want_grad) return r;

  r.grad_q.assign(q.params.size(), 0.0);
  Eigen::VectorXd g_pi = Eigen::VectorXd::Zero(K), g_lam = Eigen::VectorXd::Zero(K);
  Eigen::MatrixXd g_A = Eigen::MatrixXd::Zero(K, K);
  for (const auto& o : outs) {
    for (std::size_t p = 0; p < r.grad_q.size(); ++p) r.grad_q[p] += o.grad_q[p] * inv;
    g_pi += o.g_pi * inv;
    g_lam += o.g_lambda * inv;
    g_A += o.g_A * inv;
  }
  r.grad_theta.pi_logits = theta.pi.cwiseProduct(g_pi - Eigen::VectorXd::Constant(K, theta.pi.dot(g_pi)));
  r.grad_theta.log_A = g_A.cwiseProduct(theta.A);
  r.grad_theta.log_lambda = g_lam.cwiseProduct(theta.lambda);
  return r;
}

std::vector<double> mmpp_to_unconstrained(const MmppParams& p) {
  p.validate();
  const auto K = p.pi.size();
  std::vector<double> u;
  for (Eigen::Index k = 0; k < K; ++k) u.push_back(std::log(std::max(p.pi(k), 1e-300)));
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index l = 0; l < K; ++l) u.push_back(std::log(p.A(k, l)));
  for (Eigen::Index k = 0; k < K; ++k) u.push_back(std::log(p.lambda(k)));
  return u;
}

MmppParams mmpp_from_unconstrained(std::span<const double> u, std::size_t Ks) {
  const auto K = static_cast<Eigen::Index>(Ks);
  if (u.size() != Ks * (Ks + 2)) throw ShapeError("mmpp_from_unconstrained: wrong length");
  MmppParams p;
  p.pi.resize(K);
  p.A.resize(K, K);
  p.lambda.resize(K);
  const double mx = *std::max_element(u.begin(), u.begin() + K);
  for (Eigen::Index k = 0; k < K; ++k) p.pi(k) = std::exp(u[static_cast<std::size_t>(k)] - mx);
  p.pi /= p.pi.sum();
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index l = 0; l < K; ++l) p.A(k, l) = std::exp(u[static_cast<std::size_t>(K + k * K + l)]);
  for (Eigen::Index k = 0; k < K; ++k) p.lambda(k) = std::exp(u[static_cast<std::size_t>(K + K * K + k)]);
  return p;
}

std::vector<double> flatten(const MmppGrad& g) {
  std::vector<double> v(g.pi_logits.data(), g.pi_logits.data() + g.pi_logits.size());
  for (Eigen::Index k = 0; k < g.log_A.rows(); ++k)
    for (Eigen::Index l = 0; l < g.log_A.cols(); ++l) v.push_back(g.log_A(k, l));
  v.insert(v.end(), g.log_lambda.data(), g.log_lambda.data() + g.log_lambda.size());
  return v;
}

ViResult fit_vi(std::span<const double> obs, double horizon, const MmppParams& theta0, const ViConfig& cfg) {
  theta0.validate();
  if (cfg.iterations == 0) throw ValidationError("fit_vi: iterations must be positive");
  ModelKind kind;
  kind.tag = ModelTag::kTriTpp;
  kind.knots = cfg.knots;
  kind.block = cfg.block;
  kind.layers = cfg.layers;
  kind.horizon = horizon;
  kind.init_log_rate = std::log(theta0.pi.dot(theta0.total_rates()));
  ViResult res{build_model(kind), theta0, {}};
  OptState opt_q(res.q.params.size());
  auto u = mmpp_to_unconstrained(theta0);
  OptState opt_t(u.size());
  const Rng root(cfg.seed, 0x7e1);
  std::vector<double> neg(res.q.params.size());
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    ElboOptions eo = cfg.elbo;
    eo.want_grad = true;
    const auto r = elbo(res.q, res.theta, obs, eo, root.split(it));
    if (!std::isfinite(r.value)) throw Error("fit_vi: ELBO diverged at iteration " + std::to_string(it));
    res.elbo_history.push_back(r.value);
    for (std::size_t p = 0; p < neg.size(); ++p) neg[p] = -r.grad_q[p];
    adam_step(res.q.params.values(), neg, opt_q, cfg.lr);
    if (cfg.learn_theta) {
      auto g = flatten(r.grad_theta);
      for (auto& v : g) v = -v;
      adam_step(u, g, opt_t, cfg.theta_lr);
      res.theta = mmpp_from_unconstrained(u, theta0.states());
    }
  }
  return res;
}

Eigen::MatrixXd vi_marginals(const TppModel& q, const MmppParams& theta, std::span<const double> obs,
                             std::span<const double> grid, std::size_t samples, const Rng& rng) {
  theta.validate();
  if (samples == 0) throw ValidationError("vi_marginals: need at least one sample");
  const Eigen::Index K = theta.pi.size();
  const double T = q.horizon;
  const Flow flow = q.flow();
  std::vector<Eigen::MatrixXd> parts(samples);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t si = 0; si < static_cast<std::ptrdiff_t>(samples); ++si) {
    try {
      std::vector<double> z, t;
      sample_row(flow, rng.split(static_cast<std::uint64_t>(si)), T, 64, std::size_t{1} << 20, z, t);
      std::vector<double> jumps;
      for (const double v : t) {
        if (v < T && (jumps.empty() || v > jumps.back())) jumps.push_back(v);
      }
      const auto post = forward_backward(obs, jumps, T, theta);
      Eigen::MatrixXd acc(static_cast<Eigen::Index>(grid.size()), K);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto seg = std::upper_bound(jumps.begin(), jumps.end(), grid[g]) - jumps.begin();
        acc.row(static_cast<Eigen::Index>(g)) = post.marginals.row(seg);
      }
      parts[static_cast<std::size_t>(si)] = std::move(acc);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), K);
  for (const auto& p : parts) out += p;
  return out / static_cast<double>(samples);
}

}  // namespace tpp
