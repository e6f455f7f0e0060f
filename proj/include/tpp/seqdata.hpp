#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tpp/rng.hpp"

namespace tpp {

// One realization 0 < t_1 < ... < t_N <= T on [0, T].
struct EventSequence {
  std::vector<double> times;
  double horizon = 1.0;

  std::size_t size() const { return times.size(); }
  bool operator==(const EventSequence&) const = default;
};

using Dataset = std::vector<EventSequence>;

// Throws ValidationError naming the first offending index.
void validate(const EventSequence& seq);

// Rectangular batch of rows padded with the horizon. Row-major storage.
struct PaddedBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> times;
  std::vector<double> mask;
  double horizon = 1.0;

  std::span<double> row(std::size_t r) { return {times.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {times.data() + r * cols, cols}; }
  std::span<double> mask_row(std::size_t r) { return {mask.data() + r * cols, cols}; }
  std::span<const double> mask_row(std::size_t r) const { return {mask.data() + r * cols, cols}; }
};

// Pads every sequence to the longest length plus one trailing horizon column,
// so each row carries the position at which the compensator Lambda*(T) is
// read. min_cols forces extra padding.
PaddedBatch pad_batch(std::span<const EventSequence> sequences, std::size_t min_cols = 0);

// Inverse of pad_batch for hard masks.
Dataset unpad_batch(const PaddedBatch& batch);

// Number of entries with mask > 0.5 in a row.
std::size_t event_count(std::span<const double> mask_row);

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

// 60/20/20 after a seeded shuffle.
DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed);

// Line-delimited records {"t": [...], "T": number}.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

Dataset simulate_hpp(double rate, double horizon, std::size_t count, const Rng& rng);

}  // namespace tpp
