#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tpp/flow.hpp"
#include "tpp/rng.hpp"
#include "tpp/seqdata.hpp"

namespace tpp {

// A point process on [0, T] whose compensator is the triangular map `spec`.
struct TppModel {
  TransformSpec spec;
  ParamStore params;
  double horizon = 1.0;

  Flow flow() const { return Flow(spec, params.values()); }
};

// log p(t) = sum(m * logdiag) - z[n] per row, where n is the number of events
// in the row and column n holds the horizon.
std::vector<double> log_prob(const TppModel& model, const PaddedBatch& batch);

// Sum of weight[r] * log p(row r) and its gradient w.r.t. the parameters.
struct LogProbGrad {
  std::vector<double> values;  // per row
  std::vector<double> grad;    // parameter gradient of the weighted sum
};
LogProbGrad log_prob_grad(const TppModel& model, const PaddedBatch& batch, std::span<const double> row_weights);

struct SampleBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double horizon = 1.0;
  std::vector<double> base;      // unit-rate HPP draw
  std::vector<double> extended;  // F^{-1}(base)
  std::vector<double> clipped;   // min(extended, T)
  std::vector<double> mask;      // 1(extended < T)
  std::vector<double> soft_mask; // sigmoid((T - extended) / gamma), when requested

  PaddedBatch padded() const;  // clipped times with the hard mask
  Dataset to_dataset() const;
};

struct SampleOptions {
  std::size_t ext_hint = 64;
  // Every row's last extended time must reach T + margin.
  double margin = 0.0;
  std::optional<double> gamma;
  std::size_t max_cols = std::size_t{1} << 20;
};

// One row of the doubling policy: base holds a unit-rate HPP draw from
// `stream`, grown until the last entry of extended = F^{-1}(base) reaches
// `reach`. Throws once the length would exceed max_cols.
void sample_row(const Flow& flow, const Rng& stream, double reach, std::size_t ext_hint, std::size_t max_cols,
                std::vector<double>& base, std::vector<double>& extended);

// Parallel inversion sampling: draw a unit-rate HPP per row, map it through
// F^{-1}, clip at T. Row r uses stream rng.split(r).
SampleBatch sample(const TppModel& model, std::size_t batch_size, const Rng& rng, const SampleOptions& opts = {});

// One event at a time: each new base point is pushed through the inverse
// chain and generation stops at the first time >= T. Same distribution as
// sample(); used as the sequential baseline.
Dataset sample_sequential(const TppModel& model, std::size_t batch_size, const Rng& rng);

// sigmoid((T - t) / gamma) elementwise.
std::vector<double> relaxed_mask(std::span<const double> extended, double horizon, double gamma);

// Monte Carlo entropy of HPP(exp(log_rate)) on [0, T] from base draws z
// (one unit-rate HPP sequence per entry of `base`):
//   lambda*T - mean_s sum_i m_i log(lambda),   t_i = z_i / lambda.
// gamma > 0 uses sigmoid masks; gamma == 0 uses the hard indicator 1(t <= T).
struct EntropyEstimate {
  double value = 0.0;
  double grad_log_rate = 0.0;
};
EntropyEstimate entropy_estimate(double log_rate, double horizon, std::span<const std::vector<double>> base,
                                 double gamma);
// Unit-rate HPP sequences long enough to cover [0, reach].
std::vector<std::vector<double>> draw_base_sequences(std::size_t count, double reach, const Rng& rng);

}  // namespace tpp
