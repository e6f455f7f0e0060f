#include "tpp/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>

#include "json.hpp"
#include "tpp/errors.hpp"

namespace tpp {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ValidationError("train: lr must be positive");
  if (!(l2 >= 0.0)) throw ValidationError("train: l2 must be non-negative");
  if (max_epochs == 0) throw ValidationError("train: max_epochs must be positive");
  if (plateau == 0 || early_stop == 0) throw ValidationError("train: patience values must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, OptState& state, double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state shapes differ");
  }
  ++state.step;
  const double k = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, k);
  const double c2 = 1.0 - std::pow(kAdamBeta2, k);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grads[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grads[i] * grads[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + kAdamEps);
  }
}

double average_length(std::span<const EventSequence> data) {
  if (data.empty()) throw ValidationError("average_length: empty dataset");
  double n = 0.0;
  for (const auto& s : data) n += static_cast<double>(s.times.size());
  return std::max(1.0, n / static_cast<double>(data.size()));
}

Objective mle_objective(const TppModel& model, const PaddedBatch& batch, double n_avg, double l2) {
  const double w = -1.0 / (static_cast<double>(batch.rows) * n_avg);
  const std::vector<double> weights(batch.rows, w);
  auto lp = log_prob_grad(model, batch, weights);
  Objective obj;
  for (const double v : lp.values) obj.nll += w * v;
  obj.loss = obj.nll;
  obj.grad = std::move(lp.grad);
  const auto theta = model.params.values();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    obj.loss += l2 * theta[i] * theta[i];
    obj.grad[i] += 2.0 * l2 * theta[i];
  }
  return obj;
}

double nll_per_event(const TppModel& model, std::span<const EventSequence> data) {
  if (data.empty()) throw ValidationError("nll_per_event: empty dataset");
  const auto batch = pad_batch(data);
  const auto lp = log_prob(model, batch);
  double total = 0.0, events = 0.0;
  for (std::size_t r = 0; r < lp.size(); ++r) {
    total += lp[r];
    events += static_cast<double>(data[r].times.size());
  }
  return -total / std::max(1.0, events);
}

FitResult fit_mle(const TppModel& init, std::span<const EventSequence> train, std::span<const EventSequence> val,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ValidationError("fit_mle: empty train split");
  FitResult out{init, {}, 0};
  TppModel model = init;
  const auto train_batch = pad_batch(train);
  const double n_train = average_length(train);
  std::optional<PaddedBatch> val_batch;
  double n_val = 1.0;
  if (!val.empty()) {
    val_batch = pad_batch(val);
    n_val = average_length(val);
  }

  OptState opt(model.params.size());
  double lr = cfg.lr;
  double best_train = std::numeric_limits<double>::infinity();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_train = 0, since_val = 0;
  auto improved = [&](double now, double best) {
    return !std::isfinite(best) || now < best - cfg.min_rel_improvement * std::abs(best);
  };

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto obj = mle_objective(model, train_batch, n_train, cfg.l2);
    if (!std::isfinite(obj.loss)) throw Error("fit_mle: non-finite training loss at epoch " + std::to_string(epoch));
    const double val_nll = val_batch ? mle_objective(model, *val_batch, n_val, 0.0).nll : obj.nll;
    out.history.push_back({epoch, obj.nll, val_nll, lr});

    if (improved(val_nll, best_val)) {
      best_val = val_nll;
      since_val = 0;
      out.model = model;
      out.best_epoch = epoch;
    } else if (++since_val >= cfg.early_stop) {
      break;
    }
    if (improved(obj.loss, best_train)) {
      best_train = obj.loss;
      since_train = 0;
    } else if (++since_train >= cfg.plateau) {
      lr *= 0.5;
      since_train = 0;
    }
    adam_step(model.params.values(), obj.grad, opt, lr);
  }
  return out;
}

void write_history_csv(std::ostream& os, std::span<const LossRecord> history) {
  os << "epoch,train_nll,val_nll,lr\n";
  os.precision(17);
  for (const auto& r : history) os << r.epoch << ',' << r.train_nll << ',' << r.val_nll << ',' << r.lr << '\n';
}

GradCheckReport grad_check(const TppModel& model, const PaddedBatch& batch, double h, double tolerance) {
  if (!(h > 0.0)) throw ValidationError("grad_check: h must be positive");
  const std::vector<double> ones(batch.rows, 1.0);
  GradCheckReport rep;
  rep.analytic = log_prob_grad(model, batch, ones).grad;
  rep.numeric.assign(rep.analytic.size(), 0.0);
  TppModel probe = model;
  auto total = [&]() {
    double s = 0.0;
    for (const double v : log_prob(probe, batch)) s += v;
    return s;
  };
  for (std::size_t i = 0; i < rep.analytic.size(); ++i) {
    const double x = probe.params.values()[i];
    probe.params.values()[i] = x + h;
    const double up = total();
    probe.params.values()[i] = x - h;
    const double down = total();
    probe.params.values()[i] = x;
    rep.numeric[i] = (up - down) / (2.0 * h);
    const double a = rep.analytic[i], n = rep.numeric[i];
    const double err = std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
    if (err > rep.worst_rel_error || i == 0) {
      rep.worst_rel_error = err;
      rep.worst_index = i;
    }
  }
  for (const auto& s : model.params.slices()) {
    if (rep.worst_index >= s.offset && rep.worst_index < s.offset + s.count) rep.worst_slice = s.name;
  }
  rep.passed = rep.worst_rel_error < tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr int kCheckpointVersion = 1;
}

void save_checkpoint(std::ostream& os, const ModelKind& kind, const TppModel& model) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = model_tag_name(kind.tag);
  j["K"] = kind.knots;
  j["H"] = kind.block;
  j["L"] = kind.layers;
  j["T"] = kind.horizon;
  j["init_log_rate"] = kind.init_log_rate;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& s : model.params.slices()) {
    const auto v = model.params.slice(s.name);
    params[s.name] = std::vector<double>(v.begin(), v.end());
  }
  j["params"] = params;
  os << j.dump(1) << '\n';
}

void save_checkpoint(const std::string& path, const ModelKind& kind, const TppModel& model) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write checkpoint '" + path + "'");
  save_checkpoint(os, kind, model);
}

Checkpoint load_checkpoint(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) throw ValidationError("checkpoint: unsupported version");
    ModelKind kind;
    kind.tag = parse_model_tag(j.at("kind").get<std::string>());
    kind.knots = j.at("K").get<std::size_t>();
    kind.block = j.at("H").get<std::size_t>();
    kind.layers = j.at("L").get<std::size_t>();
    kind.horizon = j.at("T").get<double>();
    kind.init_log_rate = j.value("init_log_rate", 0.0);
    Checkpoint ck{kind, build_model(kind)};
    const auto& params = j.at("params");
    for (const auto& s : ck.model.params.slices()) {
      const auto v = params.at(s.name).get<std::vector<double>>();
      if (v.size() != s.count) throw ShapeError("checkpoint: slice '" + s.name + "' has the wrong length");
      std::copy(v.begin(), v.end(), ck.model.params.slice(s.name).begin());
    }
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read checkpoint '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace tpp
