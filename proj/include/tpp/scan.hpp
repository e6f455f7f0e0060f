#pragma once

#include <span>
#include <vector>

namespace tpp {

// Inclusive prefix sum. Inputs longer than one chunk are scanned with a
// two-pass blocked algorithm; the chunk size is fixed so results do not
// depend on the number of threads.
void scan_cumsum(std::span<const double> x, std::span<double> y);
std::vector<double> scan_cumsum(std::span<const double> x);

// y_0 = x_0, y_i = x_i - x_{i-1}. Inverse of scan_cumsum.
void pairwise_diff(std::span<const double> x, std::span<double> y);
std::vector<double> pairwise_diff(std::span<const double> x);

// Transposes, used by the gradient engine:
//   reverse_cumsum: y_i = sum_{j >= i} x_j   (C^T)
//   reverse_diff:   y_i = x_i - x_{i+1}       (D^T)
void reverse_cumsum(std::span<const double> x, std::span<double> y);
void reverse_diff(std::span<const double> x, std::span<double> y);

inline constexpr std::size_t kScanChunk = 4096;

}  // namespace tpp
