#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tpp/models.hpp"
#include "tpp/rng.hpp"
#include "tpp/seqdata.hpp"
#include "tpp/tpp.hpp"

namespace testing {

using tpp::Rng;

inline const std::vector<tpp::ModelTag>& all_tags() {
  static const std::vector<tpp::ModelTag> tags = {tpp::ModelTag::kHpp, tpp::ModelTag::kIpp, tpp::ModelTag::kRp,
                                                  tpp::ModelTag::kMrp, tpp::ModelTag::kTriTpp};
  return tags;
}

inline tpp::ModelKind small_kind(tpp::ModelTag tag, double T, std::size_t K = 6, std::size_t H = 4, std::size_t L = 3) {
  tpp::ModelKind k;
  k.tag = tag;
  k.knots = K;
  k.block = H;
  k.layers = L;
  k.horizon = T;
  return k;
}

// Identity configuration plus N(0, scale^2) noise on every parameter.
inline tpp::TppModel random_model(const tpp::ModelKind& kind, Rng& rng, double scale = 0.5) {
  auto m = tpp::build_model(kind);
  for (auto& v : m.params.values()) v += scale * rng.normal();
  return m;
}

// Sorted uniform times on (0, T); count uniform in [0, max_len].
inline tpp::EventSequence random_sequence(double T, std::size_t max_len, Rng& rng) {
  const auto n = static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_len + 1));
  tpp::EventSequence s;
  s.horizon = T;
  for (std::size_t i = 0; i < n; ++i) s.times.push_back(T * rng.uniform());
  std::sort(s.times.begin(), s.times.end());
  s.times.erase(std::unique(s.times.begin(), s.times.end()), s.times.end());
  return s;
}

inline tpp::Dataset random_dataset(double T, std::size_t rows, std::size_t max_len, Rng& rng) {
  tpp::Dataset d;
  for (std::size_t r = 0; r < rows; ++r) d.push_back(random_sequence(T, max_len, rng));
  return d;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 40) {
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), depth);
}

// Root of an increasing function on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Padded single row plus its forward map.
inline std::vector<double> map_row(const tpp::TppModel& m, const std::vector<double>& t) {
  std::vector<double> z(t.size()), ld(t.size());
  m.flow().forward(t, z, ld);
  return z;
}

}  // namespace testing
