#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tpp/seqdata.hpp"

namespace tpp {

// sum_{i<=N} |t_i - u_i| + sum_{N<i<=M} (T - u_i), with the shorter sequence as t.
double counting_distance(const EventSequence& t, const EventSequence& u);

struct MmdConfig {
  std::optional<double> sigma;  // unset: median of pooled pairwise distances
};

struct MmdResult {
  double value = 0.0;
  double sigma = 0.0;
};

// V-statistic with kernel exp(-d / (2 sigma^2)).
MmdResult mmd(std::span<const EventSequence> a, std::span<const EventSequence> b, const MmdConfig& cfg = {});

// 1-Wasserstein distance between the empirical distributions of sequence lengths.
double wasserstein_lengths(std::span<const EventSequence> a, std::span<const EventSequence> b);

// Asymptotic Kolmogorov critical value c(alpha) with P(K > c) = alpha.
double kolmogorov_critical(double alpha);

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;
  bool passed = false;
};

// One-sample test against exponential(1).
KsResult ks_exp1(std::span<const double> gaps, double alpha = 0.01);
// Two-sample test.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha = 0.01);

// Differences of consecutive values with 0 prepended.
std::vector<double> gaps_of(std::span<const double> values);

}  // namespace tpp
