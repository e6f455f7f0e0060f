#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tpp/models.hpp"

namespace tpp {

struct BenchConfig {
  std::vector<std::size_t> lengths = {100, 200, 400, 800, 1600, 3200, 6400, 12800};
  std::size_t batch = 100;
  std::size_t runs = 100;
  std::size_t knots = 20;
  std::size_t block = 16;
  std::size_t layers = 4;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t length = 0;
  std::string operation;  // log_prob_grad | sample
  std::string method;     // parallel | sequential
  double median_seconds = 0.0;
  std::size_t runs = 0;
};

// TriTPP with a perturbed identity configuration on [0, length] at unit
// rate, so a sequence holds about `length` events.
TppModel bench_model(std::size_t length, const BenchConfig& cfg);

std::vector<BenchRow> run_bench(const BenchConfig& cfg);
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

}  // namespace tpp
