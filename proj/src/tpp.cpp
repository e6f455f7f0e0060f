#include "tpp/tpp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "tpp/errors.hpp"

namespace tpp {

namespace {

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

std::size_t padding_column(const PaddedBatch& batch, std::size_t row) {
  const std::size_t n = event_count(batch.mask_row(row));
  if (n >= batch.cols) {
    throw ShapeError("log_prob: row " + std::to_string(row) + " has no padding column to read Lambda*(T) from");
  }
  return n;
}

template <class Fn>
void for_rows(std::size_t rows, Fn&& fn) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(rows); ++ri) {
    try {
      fn(static_cast<std::size_t>(ri));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

std::vector<double> log_prob(const TppModel& model, const PaddedBatch& batch) {
  if (batch.horizon != model.horizon) throw ValidationError("log_prob: batch horizon does not match the model");
  const Flow flow = model.flow();
  std::vector<double> out(batch.rows);
  for_rows(batch.rows, [&](std::size_t r) {
    std::vector<double> z(batch.cols), ld(batch.cols);
    flow.forward(batch.row(r), z, ld);
    const std::size_t n = padding_column(batch, r);
    const auto m = batch.mask_row(r);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += m[i] * ld[i];
    out[r] = acc - z[n];
  });
  return out;
}

LogProbGrad log_prob_grad(const TppModel& model, const PaddedBatch& batch, std::span<const double> row_weights) {
  if (batch.horizon != model.horizon) throw ValidationError("log_prob_grad: batch horizon does not match the model");
  if (row_weights.size() != batch.rows) throw ShapeError("log_prob_grad: one weight per row required");
  const Flow flow = model.flow();
  const std::size_t P = model.spec.param_count();
  LogProbGrad out{std::vector<double>(batch.rows), std::vector<double>(P, 0.0)};
  std::vector<double> per_row(batch.rows * P, 0.0);
  for_rows(batch.rows, [&](std::size_t r) {
    Tape tape;
    std::vector<double> z(batch.cols), ld(batch.cols);
    flow.forward(batch.row(r), z, ld, &tape);
    const std::size_t n = padding_column(batch, r);
    const auto m = batch.mask_row(r);
    std::vector<double> gz(batch.cols, 0.0), gld(batch.cols, 0.0), gt(batch.cols);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += m[i] * ld[i];
      gld[i] = row_weights[r] * m[i];
    }
    out.values[r] = acc - z[n];
    gz[n] = -row_weights[r];
    flow.backward(tape, gz, gld, std::span<double>(per_row).subspan(r * P, P), gt);
  });
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t p = 0; p < P; ++p) out.grad[p] += per_row[r * P + p];
  }
  return out;
}

PaddedBatch SampleBatch::padded() const {
  PaddedBatch b;
  b.rows = rows;
  b.cols = cols;
  b.horizon = horizon;
  b.times = clipped;
  b.mask = mask;
  return b;
}

Dataset SampleBatch::to_dataset() const {
  Dataset out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r].horizon = horizon;
    for (std::size_t i = 0; i < cols; ++i) {
      if (mask[r * cols + i] > 0.5) out[r].times.push_back(extended[r * cols + i]);
    }
  }
  return out;
}

void sample_row(const Flow& flow, const Rng& stream, double reach, std::size_t ext_hint, std::size_t max_cols,
                std::vector<double>& base, std::vector<double>& extended) {
  Rng gen = stream;
  base.clear();
  std::size_t len = std::max<std::size_t>(1, ext_hint);
  double acc = 0.0;
  for (;;) {
    while (base.size() < len) {
      acc += gen.exponential();
      base.push_back(acc);
    }
    extended.resize(len);
    flow.inverse(base, extended);
    if (extended.back() >= reach) return;
    if (len >= max_cols) throw Error("sample: extended length exceeded the cap");
    len = std::min(max_cols, 2 * len);
  }
}

SampleBatch sample(const TppModel& model, std::size_t batch_size, const Rng& rng, const SampleOptions& opts) {
  if (batch_size == 0) throw ValidationError("sample: batch size must be positive");
  if (opts.ext_hint == 0) throw ValidationError("sample: ext_hint must be at least 1");
  const Flow flow = model.flow();
  const double T = model.horizon;
  const double reach = T + opts.margin;

  std::vector<std::size_t> need(batch_size);
  for_rows(batch_size, [&](std::size_t r) {
    std::vector<double> z, t;
    sample_row(flow, rng.split(r), reach, opts.ext_hint, opts.max_cols, z, t);
    need[r] = z.size();
  });

  SampleBatch s;
  s.rows = batch_size;
  s.cols = *std::max_element(need.begin(), need.end());
  s.horizon = T;
  s.base.resize(s.rows * s.cols);
  s.extended.resize(s.rows * s.cols);
  s.clipped.resize(s.rows * s.cols);
  s.mask.resize(s.rows * s.cols);
  if (opts.gamma) s.soft_mask.resize(s.rows * s.cols);
  for_rows(batch_size, [&](std::size_t r) {
    // Extending with the same stream keeps the row independent of the others.
    Rng stream = rng.split(r);
    auto z = std::span<double>(s.base).subspan(r * s.cols, s.cols);
    double acc = 0.0;
    for (auto& v : z) {
      acc += stream.exponential();
      v = acc;
    }
    auto t = std::span<double>(s.extended).subspan(r * s.cols, s.cols);
    flow.inverse(z, t);
    for (std::size_t i = 0; i < s.cols; ++i) {
      const std::size_t k = r * s.cols + i;
      s.clipped[k] = std::min(t[i], T);
      s.mask[k] = t[i] < T ? 1.0 : 0.0;
      if (opts.gamma) s.soft_mask[k] = sigmoid((T - t[i]) / *opts.gamma);
    }
  });
  return s;
}

Dataset sample_sequential(const TppModel& model, std::size_t batch_size, const Rng& rng) {
  if (batch_size == 0) throw ValidationError("sample_sequential: batch size must be positive");
  const Flow flow = model.flow();
  Dataset out(batch_size);
  for_rows(batch_size, [&](std::size_t r) {
    Rng stream = rng.split(r);
    Flow::Stepper stepper(flow);
    out[r].horizon = model.horizon;
    double acc = 0.0;
    for (;;) {
      acc += stream.exponential();
      const double t = stepper.push(acc);
      if (t >= model.horizon) break;
      out[r].times.push_back(t);
    }
  });
  return out;
}

std::vector<double> relaxed_mask(std::span<const double> extended, double horizon, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("relaxed_mask: gamma must be positive");
  std::vector<double> m(extended.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = sigmoid((horizon - extended[i]) / gamma);
  return m;
}

std::vector<std::vector<double>> draw_base_sequences(std::size_t count, double reach, const Rng& rng) {
  std::vector<std::vector<double>> out(count);
  for (std::size_t s = 0; s < count; ++s) {
    Rng stream = rng.split(s);
    double acc = stream.exponential();
    while (acc <= reach) {
      out[s].push_back(acc);
      acc += stream.exponential();
    }
    out[s].push_back(acc);
  }
  return out;
}

EntropyEstimate entropy_estimate(double log_rate, double horizon, std::span<const std::vector<double>> base,
                                 double gamma) {
  if (base.empty()) throw ValidationError("entropy_estimate: need at least one sample");
  const double rate = std::exp(log_rate);
  double value = 0.0;
  double grad = 0.0;
  for (const auto& z : base) {
    double mass = 0.0;
    double dmass = 0.0;  // d(mass)/d(log_rate)
    for (const double zi : z) {
      const double t = zi / rate;
      if (gamma > 0.0) {
        const double m = sigmoid((horizon - t) / gamma);
        mass += m;
        dmass += m * (1.0 - m) * t / gamma;
      } else {
        mass += t <= horizon ? 1.0 : 0.0;
      }
    }
    value += rate * horizon - mass * log_rate;
    grad += rate * horizon - mass - log_rate * dmass;
  }
  const double inv = 1.0 / static_cast<double>(base.size());
  return {value * inv, grad * inv};
}

}  // namespace tpp
