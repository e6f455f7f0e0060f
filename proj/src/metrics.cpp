#include "tpp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tpp/errors.hpp"

namespace tpp {

double counting_distance(const EventSequence& t, const EventSequence& u) {
  if (t.horizon != u.horizon) throw ValidationError("counting_distance: horizons differ");
  const auto& a = t.times.size() <= u.times.size() ? t.times : u.times;
  const auto& b = t.times.size() <= u.times.size() ? u.times : t.times;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  for (std::size_t i = a.size(); i < b.size(); ++i) d += t.horizon - b[i];
  return d;
}

MmdResult mmd(std::span<const EventSequence> a, std::span<const EventSequence> b, const MmdConfig& cfg) {
  if (a.empty() || b.empty()) throw ValidationError("mmd: both sets must be non-empty");
  if (cfg.sigma && !(*cfg.sigma > 0.0)) throw ValidationError("mmd: sigma must be positive");
  const std::size_t n = a.size(), m = b.size(), P = n + m;
  auto at = [&](std::size_t i) -> const EventSequence& { return i < n ? a[i] : b[i - n]; };
  std::vector<double> d(P * P, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(P); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i + 1; j < P; ++j) d[i * P + j] = d[j * P + i] = counting_distance(at(i), at(j));
  }
  MmdResult r;
  if (cfg.sigma) {
    r.sigma = *cfg.sigma;
  } else {
    std::vector<double> off;
    off.reserve(P * (P - 1) / 2);
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t j = i + 1; j < P; ++j) off.push_back(d[i * P + j]);
    if (off.empty()) {
      r.sigma = 1.0;
    } else {
      const std::size_t mid = off.size() / 2;
      std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(mid), off.end());
      double med = off[mid];
      if (off.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(mid)));
      }
      r.sigma = med > 0.0 ? med : 1.0;
    }
  }
  const double s2 = 2.0 * r.sigma * r.sigma;
  auto block = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    double acc = 0.0;
    for (std::size_t i = r0; i < r1; ++i)
      for (std::size_t j = c0; j < c1; ++j) acc += std::exp(-d[i * P + j] / s2);
    return acc / (static_cast<double>(r1 - r0) * static_cast<double>(c1 - c0));
  };
  r.value = std::max(0.0, block(0, n, 0, n) - 2.0 * block(0, n, n, P) + block(n, P, n, P));
  return r;
}

double wasserstein_lengths(std::span<const EventSequence> a, std::span<const EventSequence> b) {
  if (a.empty() || b.empty()) throw ValidationError("wasserstein_lengths: both sets must be non-empty");
  std::vector<double> x, y;
  for (const auto& s : a) x.push_back(static_cast<double>(s.times.size()));
  for (const auto& s : b) y.push_back(static_cast<double>(s.times.size()));
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  // Integrate |F_a^-1(q) - F_b^-1(q)| over the merged quantile breakpoints.
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double q = 0.0, w = 0.0;
  while (i < x.size() && j < y.size()) {
    const double qa = static_cast<double>(i + 1) / na, qb = static_cast<double>(j + 1) / nb;
    const double next = std::min(qa, qb);
    w += (next - q) * std::abs(x[i] - y[j]);
    q = next;
    if (qa <= next) ++i;
    if (qb <= next) ++j;
  }
  return w;
}

double kolmogorov_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("kolmogorov_critical: alpha must be in (0, 1)");
  // Solve 2 sum_k (-1)^(k-1) exp(-2 k^2 c^2) = alpha by bisection.
  auto tail = [](double c) {
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * c * c);
    return s;
  };
  double lo = 0.2, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

KsResult ks_exp1(std::span<const double> gaps, double alpha) {
  if (gaps.empty()) throw ValidationError("ks_exp1: empty sample");
  std::vector<double> x(gaps.begin(), gaps.end());
  for (const double v : x)
    if (!(v >= 0.0)) throw ValidationError("ks_exp1: gaps must be non-negative");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = -std::expm1(-x[i]);
    dmax = std::max({dmax, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  KsResult r;
  r.statistic = dmax;
  r.critical = kolmogorov_critical(alpha) / std::sqrt(n);
  r.passed = dmax <= r.critical;
  return r;
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = dmax;
  r.critical = kolmogorov_critical(alpha) * std::sqrt((n + m) / (n * m));
  r.passed = dmax <= r.critical;
  return r;
}

std::vector<double> gaps_of(std::span<const double> values) {
  std::vector<double> g(values.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    g[i] = values[i] - prev;
    prev = values[i];
  }
  return g;
}

}  // namespace tpp
