#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>

#include "helpers.hpp"
#include "tpp/errors.hpp"
#include "tpp/metrics.hpp"

using namespace tpp;
using testing::Rng;

namespace {

TppModel hpp(double rate, double T) {
  ModelKind k;
  k.tag = ModelTag::kHpp;
  k.horizon = T;
  k.init_log_rate = std::log(rate);
  return build_model(k);
}

// Composite 5-point Gauss-Legendre; never evaluates the endpoints. Many
// pieces because the intensity has derivative kinks at spline knots.
double gauss_legendre(const std::function<double(double)>& f, double a, double b, int pieces) {
  static constexpr std::array<double, 5> x = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                              0.9061798459386640};
  static constexpr std::array<double, 5> w = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};
  const double h = (b - a) / pieces;
  double acc = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < 5; ++i) acc += w[i] * f(mid + 0.5 * h * x[i]);
  }
  return 0.5 * h * acc;
}

// Masked z gaps of samples mapped forward by the model that drew them.
std::vector<double> rescaled_gaps(const TppModel& m, std::size_t want, std::uint64_t seed) {
  std::vector<double> gaps;
  std::uint64_t round = 0;
  while (gaps.size() < want) {
    const auto d = sample(m, 50, Rng(seed, round++)).to_dataset();
    const auto batch = pad_batch(d);
    const auto f = compose_forward(batch, m.spec, m.params.values());
    for (std::size_t r = 0; r < batch.rows; ++r) {
      double prev = 0.0;
      for (std::size_t c = 0; c < batch.cols && batch.mask[r * batch.cols + c] > 0.5; ++c) {
        gaps.push_back(f.z[r * batch.cols + c] - prev);
        prev = f.z[r * batch.cols + c];
      }
    }
  }
  gaps.resize(want);
  return gaps;
}

}  // namespace

TEST_CASE("log_prob closed-form examples") {
  {
    const auto m = hpp(2.0, 1.0);
    const auto lp = log_prob(m, pad_batch(Dataset{EventSequence{{0.5}, 1.0}}));
    CHECK(lp[0] == doctest::Approx(std::log(2.0) - 2.0).epsilon(1e-14));
    CHECK(lp[0] == doctest::Approx(-1.30685).epsilon(1e-5));
  }
  {
    const auto m = hpp(1.0, 1.0);
    CHECK(log_prob(m, pad_batch(Dataset{EventSequence{{}, 1.0}}))[0] == doctest::Approx(-1.0).epsilon(1e-14));
  }
}

TEST_CASE("log_prob of a random MRP matches quadrature and numerical differentiation") {
  Rng rng(1);
  const double T = 4.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = testing::random_model(testing::small_kind(ModelTag::kMrp, T), rng);
    const auto seq = testing::random_sequence(T, 6, rng);
    std::vector<double> row = seq.times;
    row.push_back(T);
    // lambda*(u) on (t_{i-1}, t_i]: derivative of the i-th compensator output in u.
    auto intensity = [&](std::size_t i, double u) {
      std::vector<double> r(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(i));
      const double lo = r.empty() ? 0.0 : r.back();
      r.push_back(u);
      // The step stays inside (t_{i-1}, ...) where the map is defined.
      const double h = std::min(1e-6, 0.5 * (u - lo));
      auto zu = r, zd = r;
      zu.back() += h;
      zd.back() -= h;
      return (testing::map_row(m, zu).back() - testing::map_row(m, zd).back()) / (2 * h);
    };
    double oracle = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      oracle -= gauss_legendre([&](double u) { return intensity(i, u); }, prev, row[i], 2000);
      // Left limit at an event; the backward side of the difference stays in the interval.
      if (i + 1 < row.size()) oracle += std::log(intensity(i, row[i] - 1e-6));
      prev = row[i];
    }
    const auto lp = log_prob(m, pad_batch(Dataset{seq}));
    CHECK(std::abs(lp[0] - oracle) < 1e-5 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("log_prob is invariant to extra padding") {
  Rng rng(2);
  for (const auto tag : testing::all_tags()) {
    const auto m = testing::random_model(testing::small_kind(tag, 3.0), rng);
    const auto d = testing::random_dataset(3.0, 6, 9, rng);
    const auto a = log_prob(m, pad_batch(d));
    const auto b = log_prob(m, pad_batch(d, 30));
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::isfinite(a[i]));
      CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(a[i])));
    }
  }
}

TEST_CASE("log_prob_grad matches finite differences and weights") {
  Rng rng(3);
  for (const auto tag : testing::all_tags()) {
    const auto m = testing::random_model(testing::small_kind(tag, 2.0), rng, 0.3);
    const auto batch = pad_batch(testing::random_dataset(2.0, 4, 6, rng));
    const std::vector<double> w = {0.5, 1.0, -0.25, 2.0};
    const auto g = log_prob_grad(m, batch, w);
    const auto lp = log_prob(m, batch);
    for (std::size_t r = 0; r < lp.size(); ++r) CHECK(g.values[r] == doctest::Approx(lp[r]).epsilon(1e-12));
    auto obj = [&](const TppModel& mm) {
      const auto v = log_prob(mm, batch);
      double s = 0.0;
      for (std::size_t r = 0; r < v.size(); ++r) s += w[r] * v[r];
      return s;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      auto up = m, dn = m;
      up.params.values()[i] += 1e-5;
      dn.params.values()[i] -= 1e-5;
      const double num = (obj(up) - obj(dn)) / 2e-5;
      worst = std::max(worst, std::abs(num - g.grad[i]) / std::max({1.0, std::abs(num), std::abs(g.grad[i])}));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("sample: clipping and mask invariants") {
  Rng rng(4);
  const auto m = testing::random_model(testing::small_kind(ModelTag::kTriTpp, 3.0), rng, 0.3);
  SampleOptions opts;
  opts.gamma = 0.1;
  opts.ext_hint = 2;
  const auto s = sample(m, 20, Rng(5), opts);
  for (std::size_t r = 0; r < s.rows; ++r) CHECK(s.extended[r * s.cols + s.cols - 1] >= 3.0);
  for (std::size_t k = 0; k < s.extended.size(); ++k) {
    CHECK(s.clipped[k] == std::min(s.extended[k], 3.0));
    CHECK(s.mask[k] == (s.extended[k] < 3.0 ? 1.0 : 0.0));
    CHECK(s.soft_mask[k] == doctest::Approx(1.0 / (1.0 + std::exp(-(3.0 - s.extended[k]) / 0.1))));
  }
  const auto d = s.to_dataset();
  for (const auto& q : d) CHECK_NOTHROW(validate(q));
  CHECK(unpad_batch(s.padded()) == d);
  // Row streams are independent of batch size.
  const auto s2 = sample(m, 5, Rng(5), opts);
  for (std::size_t r = 0; r < 5; ++r) CHECK(s2.to_dataset()[r] == d[r]);
  // Same distribution path as the sequential sampler, given the same streams.
  const auto seq = sample_sequential(m, 20, Rng(5));
  for (std::size_t r = 0; r < 20; ++r) {
    REQUIRE(seq[r].size() == d[r].size());
    for (std::size_t i = 0; i < d[r].size(); ++i) CHECK(seq[r].times[i] == doctest::Approx(d[r].times[i]).epsilon(1e-10));
  }
}

TEST_CASE("sample: clip example") {
  const std::vector<double> ext = {0.8, 2.0, 4.5, 5.1};
  std::vector<double> clipped, mask;
  for (const double t : ext) {
    clipped.push_back(std::min(t, 3.0));
    mask.push_back(t < 3.0 ? 1.0 : 0.0);
  }
  CHECK(clipped == std::vector<double>{0.8, 2.0, 3.0, 3.0});
  CHECK(mask == std::vector<double>{1, 1, 0, 0});
  // The sampler produces exactly this clip rule; an HPP(1) model maps base to itself.
  const auto m = hpp(1.0, 3.0);
  const auto s = sample(m, 1, Rng(6));
  for (std::size_t i = 0; i < s.cols; ++i) {
    CHECK(s.extended[i] == doctest::Approx(s.base[i]).epsilon(1e-15));
    CHECK(s.clipped[i] == std::min(s.base[i], 3.0));
  }
}

TEST_CASE("sample: HPP(3) count mean") {
  const auto m = hpp(3.0, 10.0);
  const auto d = sample(m, 10000, Rng(7)).to_dataset();
  double mean = 0.0;
  for (const auto& s : d) mean += static_cast<double>(s.size());
  mean /= 1e4;
  CHECK(std::abs(mean - 30.0) < 3.0 * std::sqrt(30.0 / 1e4));
}

TEST_CASE("time rescaling: identity TriTPP and a random TriTPP") {
  {
    auto kind = testing::small_kind(ModelTag::kTriTpp, 200.0);
    const auto m = build_model(kind);
    CHECK(ks_exp1(rescaled_gaps(m, 10000, 8)).passed);
  }
  {
    Rng rng(9);
    const auto m = testing::random_model(testing::small_kind(ModelTag::kTriTpp, 200.0), rng, 0.3);
    CHECK(ks_exp1(rescaled_gaps(m, 10000, 10)).passed);
  }
}

TEST_CASE("relaxed mask values and dominance") {
  const auto m = relaxed_mask(std::vector<double>{3.0, 2.0, 4.5}, 3.0, 0.1);
  CHECK(m[0] == 0.5);
  CHECK(m[1] == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(m[2] == doctest::Approx(3.06e-7).epsilon(1e-2));
  CHECK_THROWS(relaxed_mask(std::vector<double>{1.0}, 3.0, 0.0));
  Rng rng(11);
  const double gamma = 0.05, T = 2.0;
  std::vector<double> t(10000);
  for (auto& v : t) v = 4.0 * rng.uniform();
  std::sort(t.begin(), t.end());
  const auto s = relaxed_mask(t, T, gamma);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(s[i] > 0.0);
    CHECK(s[i] <= 1.0);  // rounds to 1 in double once (T - t) / gamma > 37
    if (i > 0) CHECK(s[i] <= s[i - 1]);
    const double hard = t[i] < T ? 1.0 : 0.0;
    if (t[i] < T - 5 * gamma) CHECK(s[i] >= hard - 1e-2);
    if (t[i] > T + 5 * gamma) CHECK(s[i] <= hard + 1e-2);
  }
  // Pointwise convergence to the hard mask as gamma shrinks.
  CHECK(relaxed_mask(std::vector<double>{2.9}, 3.0, 1e-3)[0] > 1 - 1e-12);
  CHECK(relaxed_mask(std::vector<double>{3.1}, 3.0, 1e-3)[0] < 1e-12);
}

TEST_CASE("entropy estimate examples") {
  const std::vector<std::vector<double>> z = {{0.5, 1.5, 2.5}};
  CHECK(entropy_estimate(std::log(2.0), 1.0, z, 0.0).value == doctest::Approx(2 - 2 * std::log(2.0)).epsilon(1e-14));
  CHECK(entropy_estimate(std::log(2.0), 1.0, z, 0.0).value == doctest::Approx(0.6137).epsilon(1e-4));
  const auto base = draw_base_sequences(10, 5.0, Rng(12));
  CHECK(entropy_estimate(0.0, 5.0, base, 0.0).value == doctest::Approx(5.0).epsilon(1e-14));
  for (const auto& b : base) CHECK(b.back() > 5.0);
}

TEST_CASE("entropy gradient matches finite differences") {
  const auto base = draw_base_sequences(50, 20.0, Rng(13));
  for (const double lr : {-0.4, 0.1, 0.6}) {
    const auto e = entropy_estimate(lr, 4.0, base, 0.1);
    const double h = 1e-6;
    const double num =
        (entropy_estimate(lr + h, 4.0, base, 0.1).value - entropy_estimate(lr - h, 4.0, base, 0.1).value) / (2 * h);
    CHECK(std::abs(e.grad_log_rate - num) <= 1e-4 * std::max(1.0, std::abs(num)));
  }
}

TEST_CASE("entropy ascent reaches rate 1") {
  const double T = 10.0;
  for (const double lambda0 : {0.3, 3.0}) {
    double lr = std::log(lambda0);
    const auto base = draw_base_sequences(200, T / 0.2, Rng(14));
    for (int it = 0; it < 3000; ++it) lr += 0.002 * entropy_estimate(lr, T, base, 0.1).grad_log_rate;
    CHECK(std::exp(lr) >= 0.9);
    CHECK(std::exp(lr) <= 1.1);
  }
}
