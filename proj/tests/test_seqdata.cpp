#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "tpp/errors.hpp"
#include "tpp/metrics.hpp"

using namespace tpp;

TEST_CASE("dataset io round trip") {
  const Dataset d = {EventSequence{{1.0, 2.0}, 5.0}};
  std::stringstream ss;
  write_dataset(ss, d);
  CHECK(read_dataset(ss) == d);
}

TEST_CASE("dataset io is bit exact") {
  testing::Rng rng(1);
  const auto d = testing::random_dataset(3.7, 50, 30, rng);
  std::stringstream ss;
  write_dataset(ss, d);
  const auto back = read_dataset(ss);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    REQUIRE(back[i].times.size() == d[i].times.size());
    for (std::size_t j = 0; j < d[i].times.size(); ++j)
      CHECK(std::memcmp(&back[i].times[j], &d[i].times[j], sizeof(double)) == 0);
    CHECK(back[i].horizon == d[i].horizon);
  }
}

TEST_CASE("dataset io errors") {
  SUBCASE("decreasing times name index 1") {
    std::stringstream ss(R"({"t": [2, 1], "T": 5})");
    try {
      read_dataset(ss);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.index() == 1);
      CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
  }
  SUBCASE("duplicates rejected") {
    std::stringstream ss(R"({"t": [1, 1], "T": 5})");
    CHECK_THROWS_AS(read_dataset(ss), ValidationError);
  }
  SUBCASE("malformed line carries its line number") {
    std::stringstream ss("{\"t\": [1], \"T\": 5}\n{\"t\": [1,\n");
    try {
      read_dataset(ss);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("event past the horizon") {
    std::stringstream ss(R"({"t": [1, 6], "T": 5})");
    CHECK_THROWS_AS(read_dataset(ss), ValidationError);
  }
  SUBCASE("empty file") {
    std::stringstream ss("");
    CHECK(read_dataset(ss).empty());
  }
}

TEST_CASE("split sizes, disjointness, determinism") {
  for (const auto [n, a, b, c] : {std::tuple{10u, 6u, 2u, 2u}, std::tuple{1000u, 600u, 200u, 200u}}) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) d.push_back(EventSequence{{static_cast<double>(i + 1)}, 2000.0});
    const auto s = split_dataset(d, 42);
    CHECK(s.train.size() == a);
    CHECK(s.val.size() == b);
    CHECK(s.test.size() == c);
    std::multiset<double> seen;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (const auto& q : *part) seen.insert(q.times[0]);
    CHECK(seen.size() == n);
    CHECK(std::set<double>(seen.begin(), seen.end()).size() == n);
    const auto s2 = split_dataset(d, 42);
    CHECK(s2.train == s.train);
    CHECK(s2.val == s.val);
    CHECK(s2.test == s.test);
  }
}

TEST_CASE("pad_batch layout") {
  const Dataset d = {EventSequence{{1.0, 2.5, 4.0}, 5.0}, EventSequence{{}, 5.0}};
  const auto b = pad_batch(d);
  REQUIRE(b.rows == 2);
  REQUIRE(b.cols == 4);
  CHECK(b.times == std::vector<double>{1, 2.5, 4, 5, 5, 5, 5, 5});
  CHECK(b.mask == std::vector<double>{1, 1, 1, 0, 0, 0, 0, 0});
  const auto wide = pad_batch(d, 7);
  CHECK(wide.cols == 7);
  CHECK(unpad_batch(wide) == d);
  CHECK_THROWS(pad_batch(Dataset{}));
  CHECK_THROWS(pad_batch(Dataset{EventSequence{{1.0}, 5.0}, EventSequence{{1.0}, 6.0}}));
}

TEST_CASE("pad then unpad recovers sequences; rows are monotone with monotone masks") {
  testing::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = testing::random_dataset(2.0, 7, 12, rng);
    const auto b = pad_batch(d, trial % 5);
    CHECK(unpad_batch(b) == d);
    for (std::size_t r = 0; r < b.rows; ++r) {
      const auto t = b.row(r);
      const auto m = b.mask_row(r);
      for (std::size_t c = 1; c < b.cols; ++c) {
        CHECK(t[c] >= t[c - 1]);
        CHECK(m[c] <= m[c - 1]);
      }
      for (std::size_t c = 0; c < b.cols; ++c)
        if (m[c] == 0.0) CHECK(t[c] == 2.0);
    }
  }
}

TEST_CASE("simulate_hpp: count mean, exponential gaps, determinism, errors") {
  const Rng rng(3);
  const auto d = simulate_hpp(3.0, 10.0, 10000, rng);
  double mean = 0.0;
  for (const auto& s : d) mean += static_cast<double>(s.size());
  mean /= static_cast<double>(d.size());
  CHECK(std::abs(mean - 30.0) < 3.0 * std::sqrt(30.0 / 10000.0));

  // First 10^4 gaps rescaled to unit rate.
  std::vector<double> gaps;
  for (const auto& s : d) {
    for (const double g : gaps_of(s.times)) gaps.push_back(3.0 * g);
    if (gaps.size() >= 10000) break;
  }
  gaps.resize(10000);
  CHECK(ks_exp1(gaps, 0.01).passed);

  CHECK(simulate_hpp(3.0, 10.0, 5, rng) == simulate_hpp(3.0, 10.0, 5, rng));
  for (const auto& s : d) CHECK_NOTHROW(validate(s));
  CHECK_THROWS(simulate_hpp(1.0, 0.0, 1, rng));
  CHECK_THROWS(simulate_hpp(0.0, 1.0, 1, rng));
}
