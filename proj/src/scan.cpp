#include "tpp/scan.hpp"

#include <cstddef>

#include "tpp/errors.hpp"

namespace tpp {

namespace {

void check(std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("scan: input and output sizes differ");
}

}  // namespace

void scan_cumsum(std::span<const double> x, std::span<double> y) {
  check(x, y);
  const std::size_t n = x.size();
  if (n <= kScanChunk) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i];
      y[i] = acc;
    }
    return;
  }
  const std::size_t nchunks = (n + kScanChunk - 1) / kScanChunk;
  std::vector<double> offsets(nchunks, 0.0);

  // Pass 1: local scans.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(nchunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kScanChunk;
    const std::size_t hi = std::min(n, lo + kScanChunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      acc += x[i];
      y[i] = acc;
    }
  }
  // Exclusive scan of chunk totals.
  double carry = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) {
    offsets[c] = carry;
    carry += y[std::min(n, (c + 1) * kScanChunk) - 1];
  }
  // Pass 2: add carries.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 1; c < static_cast<std::ptrdiff_t>(nchunks); ++c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kScanChunk;
    const std::size_t hi = std::min(n, lo + kScanChunk);
    const double off = offsets[static_cast<std::size_t>(c)];
    for (std::size_t i = lo; i < hi; ++i) y[i] += off;
  }
}

std::vector<double> scan_cumsum(std::span<const double> x) {
  std::vector<double> y(x.size());
  scan_cumsum(x, y);
  return y;
}

void pairwise_diff(std::span<const double> x, std::span<double> y) {
  check(x, y);
  const std::size_t n = x.size();
  if (n == 0) return;
  // Backwards so that x and y may alias.
  for (std::size_t i = n - 1; i > 0; --i) y[i] = x[i] - x[i - 1];
  y[0] = x[0];
}

std::vector<double> pairwise_diff(std::span<const double> x) {
  std::vector<double> y(x.size());
  pairwise_diff(x, y);
  return y;
}

void reverse_cumsum(std::span<const double> x, std::span<double> y) {
  check(x, y);
  double acc = 0.0;
  for (std::size_t i = x.size(); i-- > 0;) {
    acc += x[i];
    y[i] = acc;
  }
}

void reverse_diff(std::span<const double> x, std::span<double> y) {
  check(x, y);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + 1 < n; ++i) y[i] = x[i] - x[i + 1];
  if (n > 0) y[n - 1] = x[n - 1];
}

}  // namespace tpp
