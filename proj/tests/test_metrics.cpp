#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "helpers.hpp"
#include "tpp/errors.hpp"
#include "tpp/metrics.hpp"

using namespace tpp;

TEST_CASE("counting distance examples") {
  const EventSequence t{{1.0}, 5.0}, u{{1.0, 3.0}, 5.0}, e{{}, 5.0}, v{{2.0}, 5.0};
  CHECK(counting_distance(t, t) == 0.0);
  CHECK(counting_distance(t, u) == 2.0);
  CHECK(counting_distance(u, t) == 2.0);
  CHECK(counting_distance(e, v) == 3.0);
  CHECK_THROWS(counting_distance(t, EventSequence{{1.0}, 6.0}));
}

TEST_CASE("counting distance is symmetric and satisfies the triangle inequality") {
  testing::Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = testing::random_sequence(5.0, 6, rng);
    const auto b = testing::random_sequence(5.0, 6, rng);
    const auto c = testing::random_sequence(5.0, 6, rng);
    CHECK(counting_distance(a, b) == doctest::Approx(counting_distance(b, a)).epsilon(1e-12));
    worst = std::max(worst, counting_distance(a, c) - counting_distance(a, b) - counting_distance(b, c));
    if (counting_distance(a, b) == 0.0) CHECK(a == b);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("mmd basics") {
  testing::Rng rng(2);
  const auto x = testing::random_dataset(5.0, 30, 8, rng);
  CHECK(std::abs(mmd(x, x).value) < 1e-12);
  const Dataset one = {EventSequence{{1.0}, 5.0}};
  CHECK(mmd(one, one).value == 0.0);
  CHECK_THROWS(mmd(Dataset{}, x));
  CHECK_THROWS(mmd(x, x, MmdConfig{0.0}));
  const auto y = testing::random_dataset(5.0, 20, 8, rng);
  auto xr = x;
  std::reverse(xr.begin(), xr.end());
  CHECK(mmd(x, y).value == doctest::Approx(mmd(xr, y).value).epsilon(1e-12));
  CHECK(mmd(x, y, MmdConfig{2.0}).sigma == 2.0);
  CHECK(mmd(x, y).value >= 0.0);
}

TEST_CASE("mmd: V-statistic oracle with a fixed bandwidth") {
  testing::Rng rng(3);
  const auto a = testing::random_dataset(4.0, 6, 5, rng);
  const auto b = testing::random_dataset(4.0, 4, 5, rng);
  const double s = 1.3;
  auto k = [&](const EventSequence& p, const EventSequence& q) {
    return std::exp(-counting_distance(p, q) / (2 * s * s));
  };
  auto mean_k = [&](const Dataset& p, const Dataset& q) {
    double acc = 0.0;
    for (const auto& i : p)
      for (const auto& j : q) acc += k(i, j);
    return acc / static_cast<double>(p.size() * q.size());
  };
  const double oracle = mean_k(a, a) - 2 * mean_k(a, b) + mean_k(b, b);
  CHECK(mmd(a, b, MmdConfig{s}).value == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("mmd separates HPP(2) from HPP(4)") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Rng rng(seed);
    const auto a = simulate_hpp(2.0, 5.0, 500, rng.split(0));
    const auto b = simulate_hpp(2.0, 5.0, 500, rng.split(1));
    const auto c = simulate_hpp(4.0, 5.0, 500, rng.split(2));
    if (mmd(a, b).value < mmd(a, c).value) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("wasserstein over lengths") {
  auto lens = [](std::initializer_list<int> ns) {
    Dataset d;
    for (const int n : ns) {
      EventSequence s{{}, 100.0};
      for (int i = 0; i < n; ++i) s.times.push_back(i + 1.0);
      d.push_back(s);
    }
    return d;
  };
  CHECK(wasserstein_lengths(lens({1, 2, 3}), lens({3, 1, 2})) == 0.0);
  CHECK(wasserstein_lengths(lens({0}), lens({2})) == 2.0);
  CHECK(wasserstein_lengths(lens({0, 2}), lens({1, 3})) == 1.0);
  // Unequal sizes: {0} vs {0, 4} moves half the mass by 4.
  CHECK(wasserstein_lengths(lens({0}), lens({0, 4})) == doctest::Approx(2.0));
  CHECK(wasserstein_lengths(lens({1, 5}), lens({2, 2, 9})) ==
        doctest::Approx(wasserstein_lengths(lens({2, 2, 9}), lens({1, 5}))));
  CHECK_THROWS(wasserstein_lengths(Dataset{}, lens({1})));
}

TEST_CASE("KS against exponential(1)") {
  // c(0.05) = 1.3581, c(0.01) = 1.6276 for the Kolmogorov distribution.
  CHECK(kolmogorov_critical(0.05) == doctest::Approx(1.35810).epsilon(1e-4));
  CHECK(kolmogorov_critical(0.01) == doctest::Approx(1.62762).epsilon(1e-4));
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed, 9);
    std::vector<double> g(10000);
    for (auto& v : g) v = rng.exponential();
    if (ks_exp1(g).passed) ++passes;
  }
  CHECK(passes >= 98);
  CHECK_FALSE(ks_exp1(std::vector<double>(1000, 0.1)).passed);
  CHECK_THROWS(ks_exp1(std::vector<double>{}));
  CHECK_THROWS(ks_exp1(std::vector<double>{-1.0}));
  // Statistic oracle: a single point x has D = max(F(x), 1 - F(x)).
  const double x = 0.7, F = 1 - std::exp(-x);
  CHECK(ks_exp1(std::vector<double>{x}).statistic == doctest::Approx(std::max(F, 1 - F)));
}

TEST_CASE("two-sample KS") {
  Rng rng(5);
  std::vector<double> a(3000), b(3000), c(3000);
  for (auto& v : a) v = rng.exponential();
  for (auto& v : b) v = rng.exponential();
  for (auto& v : c) v = rng.exponential(1.3);
  CHECK(ks_two_sample(a, b).passed);
  CHECK_FALSE(ks_two_sample(a, c).passed);
  CHECK(ks_two_sample(std::vector<double>{1.0}, std::vector<double>{2.0}).statistic == 1.0);
  CHECK(gaps_of(std::vector<double>{1, 3, 6}) == std::vector<double>{1, 2, 3});
}
