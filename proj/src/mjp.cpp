#include "tpp/mjp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "tpp/errors.hpp"

namespace tpp {

Eigen::MatrixXd MmppParams::generator() const {
  Eigen::MatrixXd Q = A;
  for (Eigen::Index k = 0; k < Q.rows(); ++k) Q(k, k) = 0.0;
  Q.diagonal() = -Q.rowwise().sum();
  return Q;
}

void MmppParams::validate() const {
  const auto K = pi.size();
  if (K < 1) throw ValidationError("mmpp: need at least one state");
  if (A.rows() != K || A.cols() != K || lambda.size() != K) throw ShapeError("mmpp: pi, A and lambda sizes differ");
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-9) {
    throw ValidationError("mmpp: pi must be a probability vector");
  }
  if (!(A.array() > 0.0).all()) throw ValidationError("mmpp: transition rates must be positive");
  if (!(lambda.array() > 0.0).all()) throw ValidationError("mmpp: observation rates must be positive");
}

void Trajectory::validate(std::size_t K) const {
  if (!(horizon > 0.0)) throw ValidationError("trajectory: horizon must be positive");
  if (states.size() != times.size() + 1) throw ShapeError("trajectory: need one more state than jumps");
  for (const int s : states) {
    if (s < 0 || static_cast<std::size_t>(s) >= K) throw ValidationError("trajectory: invalid state index");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > prev) || !(times[i] < horizon)) {
      throw ValidationError("trajectory: jump times must increase inside (0, T)", static_cast<long>(i));
    }
    prev = times[i];
  }
}

int Trajectory::state_at(double time) const {
  const auto it = std::upper_bound(times.begin(), times.end(), time);
  return states[static_cast<std::size_t>(it - times.begin())];
}

namespace {

int categorical(const Eigen::VectorXd& w, Rng& rng) {
  const double u = rng.uniform() * w.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    acc += w(k);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(w.size() - 1);
}

}  // namespace

MmppSample simulate_mmpp(const MmppParams& p, double horizon, Rng& rng) {
  p.validate();
  if (!(horizon > 0.0)) throw ValidationError("simulate_mmpp: horizon must be positive");
  const Eigen::VectorXd rates = p.total_rates();
  MmppSample out;
  out.traj.horizon = horizon;
  int s = categorical(p.pi, rng);
  out.traj.states.push_back(s);
  double t = 0.0;
  for (;;) {
    const double next = t + rng.exponential(rates(s));
    // Observations of the current segment [t, min(next, T)).
    const double end = std::min(next, horizon);
    for (double o = t + rng.exponential(p.lambda(s)); o < end; o += rng.exponential(p.lambda(s))) {
      out.obs.push_back(o);
    }
    if (next >= horizon) break;
    t = next;
    s = categorical(p.A.row(s).transpose(), rng);
    out.traj.times.push_back(t);
    out.traj.states.push_back(s);
  }
  return out;
}

double traj_log_prob(const Trajectory& traj, const MmppParams& p) {
  p.validate();
  traj.validate(p.states());
  const Eigen::VectorXd rates = p.total_rates();
  double lp = std::log(p.pi(traj.states[0]));
  double prev = 0.0;
  for (std::size_t i = 0; i <= traj.times.size(); ++i) {
    const double end = i < traj.times.size() ? traj.times[i] : traj.horizon;
    lp -= (end - prev) * rates(traj.states[i]);
    if (i < traj.times.size()) lp += std::log(p.A(traj.states[i], traj.states[i + 1]));
    prev = end;
  }
  return lp;
}

double obs_log_prob(std::span<const double> obs, const Trajectory& traj, const Eigen::VectorXd& lambda) {
  traj.validate(static_cast<std::size_t>(lambda.size()));
  const auto counts = segment_counts(obs, traj.times, traj.horizon);
  double lp = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i <= traj.times.size(); ++i) {
    const double end = i < traj.times.size() ? traj.times[i] : traj.horizon;
    const double lam = lambda(traj.states[i]);
    lp += counts[i] * std::log(lam) - (end - prev) * lam;
    prev = end;
  }
  return lp;
}

std::vector<double> segment_counts(std::span<const double> obs, std::span<const double> jumps, double horizon) {
  std::vector<double> counts(jumps.size() + 1, 0.0);
  for (const double o : obs) {
    if (o < 0.0 || o > horizon) throw ValidationError("segment_counts: observation outside [0, T]");
    const auto it = std::upper_bound(jumps.begin(), jumps.end(), o);
    counts[static_cast<std::size_t>(it - jumps.begin())] += 1.0;
  }
  return counts;
}

ChainResult chain_forward_backward(const Eigen::VectorXd& pi, const Eigen::MatrixXd& unary,
                                   std::span<const Eigen::MatrixXd> trans, bool want_pairwise) {
  const Eigen::Index n = unary.rows(), K = unary.cols();
  if (n < 1 || pi.size() != K) throw ShapeError("chain_forward_backward: bad shapes");
  if (trans.size() != static_cast<std::size_t>(n - 1)) throw ShapeError("chain_forward_backward: need n-1 transitions");
  Eigen::MatrixXd e(n, K), alpha(n, K), beta(n, K);
  Eigen::VectorXd c(n);
  ChainResult r;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = unary.row(i).maxCoeff();
    e.row(i) = (unary.row(i).array() - mx).exp();
    r.log_z += mx;
  }
  // Scaled forward pass: alpha rows sum to one.
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd a = i == 0 ? Eigen::RowVectorXd(pi.transpose()) : Eigen::RowVectorXd(alpha.row(i - 1) * trans[i - 1]);
    a = a.cwiseProduct(e.row(i));
    c(i) = a.sum();
    if (!(c(i) > 0.0)) {
      r.log_z = -std::numeric_limits<double>::infinity();
      return r;
    }
    alpha.row(i) = a / c(i);
    r.log_z += std::log(c(i));
  }
  beta.row(n - 1).setOnes();
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    beta.row(i) = (trans[i] * e.row(i + 1).cwiseProduct(beta.row(i + 1)).transpose()).transpose() / c(i + 1);
  }
  r.marginals = alpha.cwiseProduct(beta);
  r.dlogz_dpi = (e.row(0).cwiseProduct(beta.row(0)) / c(0)).transpose();
  r.dlogz_dM.resize(static_cast<std::size_t>(n - 1));
  if (want_pairwise) r.pairwise.resize(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Eigen::RowVectorXd right = e.row(i + 1).cwiseProduct(beta.row(i + 1)) / c(i + 1);
    auto& R = r.dlogz_dM[static_cast<std::size_t>(i)];
    R = alpha.row(i).transpose() * right;
    if (want_pairwise) r.pairwise[static_cast<std::size_t>(i)] = R.cwiseProduct(trans[i]);
  }
  return r;
}

HmmPosterior forward_backward(std::span<const double> obs, std::span<const double> jumps, double horizon,
                              const MmppParams& p) {
  p.validate();
  const std::size_t n = jumps.size() + 1;
  const Eigen::Index K = p.pi.size();
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    const double prev = i == 0 ? 0.0 : jumps[i - 1];
    if (!(jumps[i] > prev) || !(jumps[i] < horizon)) {
      throw ValidationError("forward_backward: jump times must increase inside (0, T)", static_cast<long>(i));
    }
  }
  const auto counts = segment_counts(obs, jumps, horizon);
  const Eigen::VectorXd rates = p.total_rates();
  const Eigen::VectorXd loglam = p.lambda.array().log();
  Eigen::MatrixXd unary(static_cast<Eigen::Index>(n), K);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? 0.0 : jumps[i - 1];
    const double hi = i < jumps.size() ? jumps[i] : horizon;
    unary.row(static_cast<Eigen::Index>(i)) =
        (-(hi - lo) * (rates + p.lambda) + counts[i] * loglam).transpose();
  }
  const std::vector<Eigen::MatrixXd> trans(n - 1, p.A);
  auto r = chain_forward_backward(p.pi, unary, trans, true);
  return {std::move(r.marginals), std::move(r.pairwise), r.log_z};
}

double mmpp_log_evidence(std::span<const double> obs, double horizon, const MmppParams& p) {
  p.validate();
  std::vector<double> o(obs.begin(), obs.end());
  std::sort(o.begin(), o.end());
  const Eigen::MatrixXd G = p.generator() - Eigen::MatrixXd(p.lambda.asDiagonal());
  Eigen::RowVectorXd v = p.pi.transpose();
  double log_ev = 0.0;
  double prev = 0.0;
  for (const double t : o) {
    if (t < 0.0 || t > horizon) throw ValidationError("mmpp_log_evidence: observation outside [0, T]");
    v = v * (G * (t - prev)).exp();
    v = v.cwiseProduct(p.lambda.transpose());
    const double s = v.sum();
    log_ev += std::log(s);
    v /= s;
    prev = t;
  }
  v = v * (G * (horizon - prev)).exp();
  return log_ev + std::log(v.sum());
}

Eigen::MatrixXd mmpp_exact_marginals(std::span<const double> obs, double horizon, const MmppParams& p,
                                     std::span<const double> grid) {
  p.validate();
  const Eigen::Index K = p.pi.size();
  const Eigen::MatrixXd G = p.generator() - Eigen::MatrixXd(p.lambda.asDiagonal());
  struct Point {
    double t;
    int kind;  // 0 grid, 1 observation; grid first at ties
    std::size_t idx;
  };
  std::vector<Point> pts;
  for (std::size_t i = 0; i < grid.size(); ++i) pts.push_back({grid[i], 0, i});
  for (std::size_t j = 0; j < obs.size(); ++j) pts.push_back({obs[j], 1, j});
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.t != b.t ? a.t < b.t : a.kind < b.kind;
  });
  Eigen::MatrixXd fwd(static_cast<Eigen::Index>(grid.size()), K), bwd(static_cast<Eigen::Index>(grid.size()), K);
  Eigen::RowVectorXd a = p.pi.transpose();
  double prev = 0.0;
  for (const auto& pt : pts) {
    a = a * (G * (pt.t - prev)).exp();
    a /= a.sum();
    prev = pt.t;
    if (pt.kind == 0) {
      fwd.row(static_cast<Eigen::Index>(pt.idx)) = a;
    } else {
      a = a.cwiseProduct(p.lambda.transpose());
      a /= a.sum();
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Ones(K);
  double next = horizon;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    b = (G * (next - it->t)).exp() * b;
    b /= b.sum();
    next = it->t;
    if (it->kind == 0) {
      bwd.row(static_cast<Eigen::Index>(it->idx)) = b.transpose();
    } else {
      b = b.cwiseProduct(p.lambda);
      b /= b.sum();
    }
  }
  Eigen::MatrixXd m = fwd.cwiseProduct(bwd);
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) /= m.row(r).sum();
  return m;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

}  // namespace tpp
