#include "tpp/seqdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <json.hpp>

#include "tpp/errors.hpp"

namespace tpp {

void validate(const EventSequence& seq) {
  if (!(seq.horizon > 0.0) || !std::isfinite(seq.horizon)) {
    throw ValidationError("horizon must be positive and finite");
  }
  for (std::size_t i = 0; i < seq.times.size(); ++i) {
    const double t = seq.times[i];
    if (!std::isfinite(t) || t <= 0.0 || t > seq.horizon) {
      throw ValidationError("event " + std::to_string(i) + " outside (0, T]", static_cast<std::ptrdiff_t>(i));
    }
    if (i > 0 && t <= seq.times[i - 1]) {
      throw ValidationError("times not strictly increasing at index " + std::to_string(i),
                            static_cast<std::ptrdiff_t>(i));
    }
  }
}

PaddedBatch pad_batch(std::span<const EventSequence> sequences, std::size_t min_cols) {
  if (sequences.empty()) throw ValidationError("pad_batch: empty batch");
  const double horizon = sequences.front().horizon;
  std::size_t longest = 0;
  for (const auto& s : sequences) {
    if (s.horizon != horizon) throw ValidationError("pad_batch: sequences have different horizons");
    longest = std::max(longest, s.size());
  }
  PaddedBatch b;
  b.rows = sequences.size();
  b.cols = std::max(longest + 1, min_cols);
  b.horizon = horizon;
  b.times.assign(b.rows * b.cols, horizon);
  b.mask.assign(b.rows * b.cols, 0.0);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& s = sequences[r];
    std::copy(s.times.begin(), s.times.end(), b.times.begin() + static_cast<std::ptrdiff_t>(r * b.cols));
    std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(r * b.cols), s.size(), 1.0);
  }
  return b;
}

std::size_t event_count(std::span<const double> mask_row) {
  return static_cast<std::size_t>(std::count_if(mask_row.begin(), mask_row.end(), [](double m) { return m > 0.5; }));
}

Dataset unpad_batch(const PaddedBatch& batch) {
  Dataset out(batch.rows);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    const auto t = batch.row(r);
    const auto n = event_count(batch.mask_row(r));
    out[r].horizon = batch.horizon;
    out[r].times.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

DatasetSplit split_dataset(const Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0x5911);
  // Fisher-Yates with our own uniform draw keeps splits identical across
  // standard library implementations.
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const auto n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
    dst.push_back(data[order[i]]);
  }
  return split;
}

Dataset read_dataset(std::istream& in) {
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    if (!rec.is_object() || !rec.contains("t") || !rec.contains("T") || !rec["t"].is_array() ||
        !rec["T"].is_number()) {
      throw ParseError(lineno, "expected an object with array \"t\" and number \"T\"");
    }
    EventSequence seq;
    seq.horizon = rec["T"].get<double>();
    for (const auto& v : rec["t"]) {
      if (!v.is_number()) throw ParseError(lineno, "non-numeric event time");
      seq.times.push_back(v.get<double>());
    }
    try {
      validate(seq);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what(), e.index());
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path.string());
  return read_dataset(in);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  for (const auto& s : data) {
    nlohmann::json rec = {{"t", s.times}, {"T", s.horizon}};
    out << rec.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset " + path.string());
  write_dataset(out, data);
}

Dataset simulate_hpp(double rate, double horizon, std::size_t count, const Rng& rng) {
  if (!(rate > 0.0)) throw ValidationError("simulate_hpp: rate must be positive");
  if (!(horizon > 0.0)) throw ValidationError("simulate_hpp: horizon must be positive");
  Dataset out(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng r = rng.split(i);
    out[i].horizon = horizon;
    double t = r.exponential(rate);
    while (t <= horizon) {
      out[i].times.push_back(t);
      t += r.exponential(rate);
    }
  }
  return out;
}

}  // namespace tpp
