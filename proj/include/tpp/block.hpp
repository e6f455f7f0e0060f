#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tpp {

// Lower-triangular linear layer made of one H x H block repeated along the
// diagonal and starting at `offset`. Positions before the offset are left
// untouched; a trailing block cut off by the end of the vector acts through
// its leading principal submatrix, so output i only ever depends on inputs
// 0..i regardless of the vector length.
//
// Parameters: [H diagonal logits | H(H-1)/2 strictly-lower entries, row-major].
// The diagonal is exp(logit).
class BlockLayer {
 public:
  static std::size_t param_count(std::size_t block) { return block + block * (block - 1) / 2; }
  static std::vector<double> identity_params(std::size_t block) { return std::vector<double>(param_count(block), 0.0); }

  BlockLayer(std::span<const double> params, std::size_t block, std::size_t offset);

  std::size_t block() const { return h_; }
  std::size_t offset() const { return offset_; }
  // Entry (r, c) of the block, c <= r.
  double entry(std::size_t r, std::size_t c) const { return m_[r * h_ + c]; }
  double log_diag(std::size_t r) const { return logdiag_[r]; }

  void forward(std::span<const double> x, std::span<double> y, std::span<double> logderiv) const;
  void inverse(std::span<const double> y, std::span<double> x) const;

  // g_x = B^T g_y; accumulates parameter cotangents of g_y.y + g_ld.logderiv.
  void backward(std::span<const double> x, std::span<const double> g_y, std::span<const double> g_ld,
                std::span<double> g_x, std::span<double> g_params) const;
  // u = B^{-T} g (back substitution per block).
  void solve_transposed(std::span<const double> g, std::span<double> u) const;
  // Accumulates scale * (d(Bx)/d params)^T u.
  void param_vjp(std::span<const double> x, std::span<const double> u, double scale, std::span<double> g_params) const;

 private:
  std::size_t lower_index(std::size_t r, std::size_t c) const { return h_ + r * (r - 1) / 2 + c; }

  std::size_t h_;
  std::size_t offset_;
  std::vector<double> m_;  // dense H x H, zero above the diagonal
  std::vector<double> logdiag_;
};

struct BlockResult {
  std::vector<double> y;
  std::vector<double> logderiv;
};
BlockResult block_forward(std::span<const double> x, const BlockLayer& layer);
std::vector<double> block_inverse(std::span<const double> y, const BlockLayer& layer);

}  // namespace tpp
