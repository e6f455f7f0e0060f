#include "tpp/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "tpp/errors.hpp"

namespace tpp {

namespace {

// Forward-mode dual number over the seven local inputs of one bin:
// x, x_k, x_{k+1}, y_k, y_{k+1}, d_k, d_{k+1}.
constexpr int kLocal = 7;

struct Dual {
  double v = 0.0;
  std::array<double, kLocal> d{};

  static Dual var(double value, int slot) {
    Dual r;
    r.v = value;
    r.d[static_cast<std::size_t>(slot)] = 1.0;
    return r;
  }
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v + b.v;
  for (int i = 0; i < kLocal; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v - b.v;
  for (int i = 0; i < kLocal; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v * b.v;
  for (int i = 0; i < kLocal; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
Dual operator*(double a, const Dual& b) {
  Dual r;
  r.v = a * b.v;
  for (int i = 0; i < kLocal; ++i) r.d[i] = a * b.d[i];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v / b.v;
  const double inv = 1.0 / b.v;
  for (int i = 0; i < kLocal; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
  return r;
}
Dual operator-(double a, const Dual& b) {
  Dual r;
  r.v = a - b.v;
  for (int i = 0; i < kLocal; ++i) r.d[i] = -b.d[i];
  return r;
}
Dual log(const Dual& a) {
  Dual r;
  r.v = std::log(a.v);
  for (int i = 0; i < kLocal; ++i) r.d[i] = a.d[i] / a.v;
  return r;
}

// Rational-quadratic bin map, generic over double and Dual.
template <class S>
void bin_map(const S& x, const S& xk, const S& xk1, const S& yk, const S& yk1, const S& dk, const S& dk1, S& y,
             S& ld) {
  const S w = xk1 - xk;
  const S h = yk1 - yk;
  const S s = h / w;
  const S xi = (x - xk) / w;
  const S om = 1.0 - xi;
  const S xo = xi * om;
  const S den = s + (dk1 + dk - 2.0 * s) * xo;
  y = yk + h * (s * xi * xi + dk * xo) / den;
  const S dnum = s * s * (dk1 * xi * xi + 2.0 * s * xo + dk * om * om);
  using std::log;
  ld = log(dnum) - 2.0 * log(den);
}

double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }
double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

void softmax(std::span<const double> u, std::span<double> out) {
  const double mx = *std::max_element(u.begin(), u.end());
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] = std::exp(u[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
}

}  // namespace

double RqsSpline::identity_derivative_logit() { return std::log(std::expm1(1.0 - kMinDerivative)); }

std::vector<double> RqsSpline::identity_params(std::size_t bins) {
  std::vector<double> p(param_count(bins), 0.0);
  std::fill(p.begin() + static_cast<std::ptrdiff_t>(2 * bins), p.end(), identity_derivative_logit());
  return p;
}

RqsSpline::RqsSpline(std::span<const double> params, std::size_t bins, Tails tails) : bins_(bins), tails_(tails) {
  if (bins < 1 || static_cast<double>(bins) * kMinBin >= 1.0) throw Error("RqsSpline: invalid bin count");
  if (params.size() != param_count(bins)) throw ShapeError("RqsSpline: parameter count mismatch");
  const std::size_t K = bins;
  wsoft_.resize(K);
  hsoft_.resize(K);
  softmax(params.subspan(0, K), wsoft_);
  softmax(params.subspan(K, K), hsoft_);
  const double scale = 1.0 - static_cast<double>(K) * kMinBin;
  xs_.assign(K + 1, 0.0);
  ys_.assign(K + 1, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    xs_[k + 1] = xs_[k] + kMinBin + scale * wsoft_[k];
    ys_[k + 1] = ys_[k] + kMinBin + scale * hsoft_[k];
  }
  xs_[K] = 1.0;
  ys_[K] = 1.0;
  ds_.resize(K + 1);
  dsig_.resize(K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    const double u = params[2 * K + k];
    ds_[k] = kMinDerivative + softplus(u);
    dsig_[k] = sigmoid(u);
  }
}

std::size_t RqsSpline::locate(std::span<const double> knots, double v) const {
  // Bin k satisfies knots[k] <= v < knots[k+1]; v == 1 falls in the last bin.
  const auto it = std::upper_bound(knots.begin() + 1, knots.end() - 1, v);
  return static_cast<std::size_t>(it - knots.begin()) - 1;
}

double RqsSpline::forward(double x, double* logderiv) const {
  const std::size_t K = bins_;
  if (!(x >= 0.0 && x <= 1.0)) {
    if (tails_ == Tails::kBounded || std::isnan(x)) {
      throw DomainError("spline", "input " + std::to_string(x) + " outside [0, 1]");
    }
    if (x > 1.0) {
      if (logderiv) *logderiv = std::log(ds_[K]);
      return 1.0 + ds_[K] * (x - 1.0);
    }
    if (logderiv) *logderiv = std::log(ds_[0]);
    return ds_[0] * x;
  }
  const std::size_t k = locate(xs_, x);
  double y = 0.0;
  double ld = 0.0;
  bin_map<double>(x, xs_[k], xs_[k + 1], ys_[k], ys_[k + 1], ds_[k], ds_[k + 1], y, ld);
  if (logderiv) *logderiv = ld;
  return y;
}

double RqsSpline::dydx(double x) const {
  double ld = 0.0;
  forward(x, &ld);
  return std::exp(ld);
}

double RqsSpline::inverse(double y) const {
  const std::size_t K = bins_;
  if (!(y >= 0.0 && y <= 1.0)) {
    if (tails_ == Tails::kBounded || std::isnan(y)) {
      throw DomainError("spline", "inverse input " + std::to_string(y) + " outside [0, 1]");
    }
    if (y > 1.0) return 1.0 + (y - 1.0) / ds_[K];
    return y / ds_[0];
  }
  const std::size_t k = locate(ys_, y);
  const double w = xs_[k + 1] - xs_[k];
  const double h = ys_[k + 1] - ys_[k];
  const double s = h / w;
  const double dy = y - ys_[k];
  const double sum = ds_[k + 1] + ds_[k] - 2.0 * s;
  const double a = h * (s - ds_[k]) + dy * sum;
  const double b = h * ds_[k] - dy * sum;
  const double c = -s * dy;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  const double denom = -b - std::sqrt(disc);
  const double xi = denom == 0.0 ? 0.0 : 2.0 * c / denom;
  return xs_[k] + std::clamp(xi, 0.0, 1.0) * w;
}

double RqsSpline::backward(double x, double g_y, double g_ld, Grad& grad) const {
  const std::size_t K = bins_;
  if (!(x >= 0.0 && x <= 1.0)) {
    if (tails_ == Tails::kBounded || std::isnan(x)) {
      throw DomainError("spline", "input " + std::to_string(x) + " outside [0, 1]");
    }
    const std::size_t k = x > 1.0 ? K : 0;
    const double lever = x > 1.0 ? x - 1.0 : x;
    grad.gd[k] += g_y * lever + g_ld / ds_[k];
    return g_y * ds_[k];
  }
  const std::size_t k = locate(xs_, x);
  Dual y, ld;
  bin_map<Dual>(Dual::var(x, 0), Dual::var(xs_[k], 1), Dual::var(xs_[k + 1], 2), Dual::var(ys_[k], 3),
                Dual::var(ys_[k + 1], 4), Dual::var(ds_[k], 5), Dual::var(ds_[k + 1], 6), y, ld);
  auto g = [&](int i) { return g_y * y.d[static_cast<std::size_t>(i)] + g_ld * ld.d[static_cast<std::size_t>(i)]; };
  grad.gx[k] += g(1);
  grad.gx[k + 1] += g(2);
  grad.gy[k] += g(3);
  grad.gy[k + 1] += g(4);
  grad.gd[k] += g(5);
  grad.gd[k + 1] += g(6);
  return g(0);
}

void RqsSpline::finalize(const Grad& grad, std::span<double> param_grad) const {
  const std::size_t K = bins_;
  if (param_grad.size() != param_count(K)) throw ShapeError("RqsSpline::finalize: size mismatch");
  const double scale = 1.0 - static_cast<double>(K) * kMinBin;
  // Interior knots are cumulative sums of bin sizes; the end knots are fixed.
  auto softmax_vjp = [&](std::span<const double> gknot, std::span<const double> soft, std::span<double> out) {
    std::vector<double> gsize(K, 0.0);
    double acc = 0.0;
    for (std::size_t k = K - 1; k >= 1; --k) {
      acc += gknot[k];
      gsize[k - 1] = acc;
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < K; ++k) dot += soft[k] * gsize[k];
    for (std::size_t k = 0; k < K; ++k) out[k] += scale * soft[k] * (gsize[k] - dot);
  };
  softmax_vjp(grad.gx, wsoft_, param_grad.subspan(0, K));
  softmax_vjp(grad.gy, hsoft_, param_grad.subspan(K, K));
  for (std::size_t k = 0; k <= K; ++k) param_grad[2 * K + k] += grad.gd[k] * dsig_[k];
}

SplineResult spline_forward(std::span<const double> x, const RqsSpline& spline) {
  SplineResult r{std::vector<double>(x.size()), std::vector<double>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) r.y[i] = spline.forward(x[i], &r.logderiv[i]);
  return r;
}

std::vector<double> spline_inverse(std::span<const double> y, const RqsSpline& spline) {
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = spline.inverse(y[i]);
  return x;
}

}  // namespace tpp
