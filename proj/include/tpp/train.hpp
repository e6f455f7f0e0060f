#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tpp/models.hpp"
#include "tpp/seqdata.hpp"
#include "tpp/tpp.hpp"

namespace tpp {

struct TrainConfig {
  double lr = 0.05;
  double l2 = 0.0;
  std::size_t max_epochs = 5000;
  std::size_t plateau = 100;      // iterations without improvement before lr is halved
  std::size_t early_stop = 500;   // epochs without validation improvement
  std::uint64_t seed = 0;
  // Relative improvement that resets the plateau and early-stop counters.
  double min_rel_improvement = 1e-6;

  void validate() const;
};

struct OptState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  explicit OptState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// In-place bias-corrected Adam update.
void adam_step(std::span<double> params, std::span<const double> grads, OptState& state, double lr);

// -(1/|D|)(1/N_avg) sum log p + l2 * |params|^2 and its gradient.
struct Objective {
  double loss = 0.0;
  double nll = 0.0;  // without the L2 term
  std::vector<double> grad;
};
Objective mle_objective(const TppModel& model, const PaddedBatch& batch, double n_avg, double l2);

// Mean events per sequence, floored at 1.
double average_length(std::span<const EventSequence> data);

// Mean NLL per event: -(sum log p) / (total events), floored at one event.
double nll_per_event(const TppModel& model, std::span<const EventSequence> data);

struct LossRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
  double lr = 0.0;
};

struct FitResult {
  TppModel model;
  std::vector<LossRecord> history;
  std::size_t best_epoch = 0;
};

// Full-batch training; the returned model holds the parameters with the best
// validation loss (train loss when no validation split is given).
FitResult fit_mle(const TppModel& init, std::span<const EventSequence> train, std::span<const EventSequence> val,
                  const TrainConfig& cfg);

void write_history_csv(std::ostream& os, std::span<const LossRecord> history);

struct GradCheckReport {
  double worst_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_slice;
  std::vector<double> analytic;
  std::vector<double> numeric;
  bool passed = true;
};

// Central differences of sum_r log p(row r) against the analytic gradient.
// Relative error is |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const TppModel& model, const PaddedBatch& batch, double h, double tolerance);

// Checkpoint: JSON with the model kind, hyperparameters and named slices.
void save_checkpoint(std::ostream& os, const ModelKind& kind, const TppModel& model);
void save_checkpoint(const std::string& path, const ModelKind& kind, const TppModel& model);
struct Checkpoint {
  ModelKind kind;
  TppModel model;
};
Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tpp
