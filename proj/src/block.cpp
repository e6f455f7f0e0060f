#include "tpp/block.hpp"

#include <algorithm>
#include <cmath>

#include "tpp/errors.hpp"

namespace tpp {

BlockLayer::BlockLayer(std::span<const double> params, std::size_t block, std::size_t offset)
    : h_(block), offset_(offset), m_(block * block, 0.0), logdiag_(block) {
  if (block == 0) throw Error("BlockLayer: block size must be positive");
  if (params.size() != param_count(block)) throw ShapeError("BlockLayer: parameter count mismatch");
  for (std::size_t r = 0; r < h_; ++r) {
    logdiag_[r] = params[r];
    m_[r * h_ + r] = std::exp(params[r]);
    for (std::size_t c = 0; c < r; ++c) m_[r * h_ + c] = params[lower_index(r, c)];
  }
}

void BlockLayer::forward(std::span<const double> x, std::span<double> y, std::span<double> logderiv) const {
  const std::size_t n = x.size();
  const std::size_t head = std::min(offset_, n);
  for (std::size_t p = 0; p < head; ++p) {
    y[p] = x[p];
    logderiv[p] = 0.0;
  }
  for (std::size_t s = offset_; s < n; s += h_) {
    const std::size_t len = std::min(h_, n - s);
    // Walk rows bottom-up so y may alias x.
    for (std::size_t r = len; r-- > 0;) {
      double acc = 0.0;
      for (std::size_t c = 0; c <= r; ++c) acc += m_[r * h_ + c] * x[s + c];
      y[s + r] = acc;
      logderiv[s + r] = logdiag_[r];
    }
  }
}

void BlockLayer::inverse(std::span<const double> y, std::span<double> x) const {
  const std::size_t n = y.size();
  const std::size_t head = std::min(offset_, n);
  for (std::size_t p = 0; p < head; ++p) x[p] = y[p];
  for (std::size_t s = offset_; s < n; s += h_) {
    const std::size_t len = std::min(h_, n - s);
    for (std::size_t r = 0; r < len; ++r) {
      double acc = y[s + r];
      for (std::size_t c = 0; c < r; ++c) acc -= m_[r * h_ + c] * x[s + c];
      x[s + r] = acc / m_[r * h_ + r];
    }
  }
}

void BlockLayer::backward(std::span<const double> x, std::span<const double> g_y, std::span<const double> g_ld,
                          std::span<double> g_x, std::span<double> g_params) const {
  const std::size_t n = x.size();
  const std::size_t head = std::min(offset_, n);
  for (std::size_t p = 0; p < head; ++p) g_x[p] = g_y[p];
  for (std::size_t s = offset_; s < n; s += h_) {
    const std::size_t len = std::min(h_, n - s);
    for (std::size_t c = 0; c < len; ++c) {
      double acc = 0.0;
      for (std::size_t r = c; r < len; ++r) acc += m_[r * h_ + c] * g_y[s + r];
      g_x[s + c] = acc;
    }
    for (std::size_t r = 0; r < len; ++r) {
      const double gy = g_y[s + r];
      g_params[r] += gy * m_[r * h_ + r] * x[s + r] + g_ld[s + r];
      for (std::size_t c = 0; c < r; ++c) g_params[lower_index(r, c)] += gy * x[s + c];
    }
  }
}

void BlockLayer::solve_transposed(std::span<const double> g, std::span<double> u) const {
  const std::size_t n = g.size();
  const std::size_t head = std::min(offset_, n);
  for (std::size_t p = 0; p < head; ++p) u[p] = g[p];
  for (std::size_t s = offset_; s < n; s += h_) {
    const std::size_t len = std::min(h_, n - s);
    for (std::size_t c = len; c-- > 0;) {
      double acc = g[s + c];
      for (std::size_t r = c + 1; r < len; ++r) acc -= m_[r * h_ + c] * u[s + r];
      u[s + c] = acc / m_[c * h_ + c];
    }
  }
}

void BlockLayer::param_vjp(std::span<const double> x, std::span<const double> u, double scale,
                           std::span<double> g_params) const {
  const std::size_t n = x.size();
  for (std::size_t s = offset_; s < n; s += h_) {
    const std::size_t len = std::min(h_, n - s);
    for (std::size_t r = 0; r < len; ++r) {
      const double gu = scale * u[s + r];
      g_params[r] += gu * m_[r * h_ + r] * x[s + r];
      for (std::size_t c = 0; c < r; ++c) g_params[lower_index(r, c)] += gu * x[s + c];
    }
  }
}

BlockResult block_forward(std::span<const double> x, const BlockLayer& layer) {
  BlockResult r{std::vector<double>(x.size()), std::vector<double>(x.size())};
  layer.forward(x, r.y, r.logderiv);
  return r;
}

std::vector<double> block_inverse(std::span<const double> y, const BlockLayer& layer) {
  std::vector<double> x(y.size());
  layer.inverse(y, x);
  return x;
}

}  // namespace tpp
