#include <algorithm>
#include <cmath>

#include "tpp/errors.hpp"
#include "tpp/mjp.hpp"

namespace tpp {

namespace {

int draw(const Eigen::VectorXd& w, Rng& rng) {
  const double u = rng.uniform() * w.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    acc += w(k);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(w.size() - 1);
}

}  // namespace

Eigen::MatrixXd rao_teh_posterior(std::span<const double> obs, double horizon, const MmppParams& p,
                                  std::span<const double> grid, Rng& rng, const RaoTehConfig& cfg) {
  p.validate();
  if (cfg.samples == 0) throw ValidationError("rao_teh_posterior: need at least one retained sample");
  const Eigen::Index K = p.pi.size();
  const Eigen::MatrixXd Q = p.generator();
  const double omega = cfg.omega_factor * p.total_rates().maxCoeff();
  const double max_exit = (-Q.diagonal()).maxCoeff();
  if (!(omega > max_exit)) throw ValidationError("rao_teh_posterior: uniformization rate must exceed every exit rate");
  const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(K, K) + Q / omega;
  const Eigen::VectorXd loglam = p.lambda.array().log();

  // Start from the most likely single state.
  Trajectory path;
  path.horizon = horizon;
  {
    Eigen::VectorXd score = -horizon * p.lambda + static_cast<double>(obs.size()) * loglam;
    Eigen::Index best = 0;
    score.maxCoeff(&best);
    path.states = {static_cast<int>(best)};
  }

  Eigen::MatrixXd occupancy = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), K);
  const std::size_t total = cfg.burn_in + cfg.samples;
  for (std::size_t it = 0; it < total; ++it) {
    // Virtual jumps at rate omega + Q(s, s) within each segment.
    std::vector<double> cand = path.times;
    double lo = 0.0;
    for (std::size_t i = 0; i < path.states.size(); ++i) {
      const double hi = i < path.times.size() ? path.times[i] : horizon;
      const int s = path.states[i];
      const double rate = omega + Q(s, s);
      for (double u = lo + rng.exponential(rate); u < hi; u += rng.exponential(rate)) cand.push_back(u);
      lo = hi;
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    // Forward filter over the candidate grid, then sample backwards.
    const auto counts = segment_counts(obs, cand, horizon);
    const std::size_t n = cand.size() + 1;
    Eigen::MatrixXd alpha(static_cast<Eigen::Index>(n), K);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = i == 0 ? 0.0 : cand[i - 1];
      const double b = i < cand.size() ? cand[i] : horizon;
      Eigen::RowVectorXd loglik = (-(b - a) * p.lambda + counts[i] * loglam).transpose();
      loglik.array() -= loglik.maxCoeff();
      Eigen::RowVectorXd prior =
          i == 0 ? Eigen::RowVectorXd(p.pi.transpose()) : Eigen::RowVectorXd(alpha.row(static_cast<Eigen::Index>(i - 1)) * B);
      Eigen::RowVectorXd v = prior.cwiseProduct(loglik.array().exp().matrix());
      alpha.row(static_cast<Eigen::Index>(i)) = v / v.sum();
    }
    std::vector<int> v(n);
    v[n - 1] = draw(alpha.row(static_cast<Eigen::Index>(n - 1)).transpose(), rng);
    for (std::size_t i = n - 1; i-- > 0;) {
      const Eigen::VectorXd w = alpha.row(static_cast<Eigen::Index>(i)).transpose().cwiseProduct(B.col(v[i + 1]));
      v[i] = draw(w, rng);
    }

    path.times.clear();
    path.states = {v[0]};
    for (std::size_t i = 1; i < n; ++i) {
      if (v[i] != v[i - 1]) {
        path.times.push_back(cand[i - 1]);
        path.states.push_back(v[i]);
      }
    }
    if (it >= cfg.burn_in) {
      for (std::size_t g = 0; g < grid.size(); ++g) occupancy(static_cast<Eigen::Index>(g), path.state_at(grid[g])) += 1.0;
    }
  }
  return occupancy / static_cast<double>(cfg.samples);
}

}  // namespace tpp
