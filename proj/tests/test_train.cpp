#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "helpers.hpp"
#include "tpp/errors.hpp"
#include "tpp/train.hpp"

using namespace tpp;
using testing::Rng;

namespace {

ModelKind hpp_kind(double T, double rate = 1.0) {
  ModelKind k;
  k.tag = ModelTag::kHpp;
  k.horizon = T;
  k.init_log_rate = std::log(rate);
  return k;
}

std::vector<double> values_of(const TppModel& m) { return {m.params.values().begin(), m.params.values().end()}; }

// Per-event NLL of HPP(rate) on a dataset.
double hpp_nll_per_event(double rate, const Dataset& d) {
  double ll = 0.0, n = 0.0;
  for (const auto& s : d) {
    ll += static_cast<double>(s.size()) * std::log(rate) - rate * s.horizon;
    n += static_cast<double>(s.size());
  }
  return -ll / std::max(1.0, n);
}

}  // namespace

TEST_CASE("adam: zero gradient, first step, scale consistency, shape errors") {
  std::vector<double> p = {1.0, -2.0};
  OptState st(2);
  adam_step(p, std::vector<double>{0.0, 0.0}, st, 0.1);
  CHECK(p == std::vector<double>{1.0, -2.0});
  CHECK(st.step == 1);

  std::vector<double> q = {0.0, 0.0, 0.0};
  OptState s1(3);
  const std::vector<double> g = {3.0, -0.5, 1e-3};
  adam_step(q, g, s1, 0.01);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(q[i] == doctest::Approx(-0.01 * g[i] / (std::abs(g[i]) + kAdamEps)).epsilon(1e-12));
    CHECK(std::abs(q[i]) == doctest::Approx(0.01).epsilon(1e-4));
  }
  std::vector<double> r = {0.0, 0.0, 0.0};
  OptState s2(3);
  adam_step(r, g, s2, 0.02);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r[i] == doctest::Approx(2.0 * q[i]).epsilon(1e-12));

  OptState bad(2);
  CHECK_THROWS(adam_step(q, g, bad, 0.01));
}

TEST_CASE("mle objective: value, gradient, and L2") {
  Rng rng(1);
  const auto m = testing::random_model(testing::small_kind(ModelTag::kTriTpp, 2.0), rng, 0.2);
  const auto d = testing::random_dataset(2.0, 5, 6, rng);
  const auto batch = pad_batch(d);
  const double n_avg = average_length(d);
  const auto obj = mle_objective(m, batch, n_avg, 0.01);
  double sum_lp = 0.0;
  for (const double v : log_prob(m, batch)) sum_lp += v;
  double sq = 0.0;
  for (const double v : m.params.values()) sq += v * v;
  CHECK(obj.nll == doctest::Approx(-sum_lp / (5.0 * n_avg)).epsilon(1e-12));
  CHECK(obj.loss == doctest::Approx(obj.nll + 0.01 * sq).epsilon(1e-12));
  double worst = 0.0;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    auto up = m, dn = m;
    up.params.values()[i] += 1e-5;
    dn.params.values()[i] -= 1e-5;
    const double num = (mle_objective(up, batch, n_avg, 0.01).loss - mle_objective(dn, batch, n_avg, 0.01).loss) / 2e-5;
    worst = std::max(worst, std::abs(num - obj.grad[i]) / std::max(1.0, std::abs(num)));
  }
  CHECK(worst < 1e-6);
  CHECK(average_length(Dataset{EventSequence{{}, 1.0}}) == 1.0);
}

TEST_CASE("fit_mle: HPP rate reaches the closed-form MLE") {
  const auto d = simulate_hpp(2.0, 5.0, 200, Rng(2));
  double total = 0.0;
  for (const auto& s : d) total += static_cast<double>(s.size());
  const double mle = total / (200.0 * 5.0);
  TrainConfig cfg;
  cfg.max_epochs = 2000;
  const auto fit = fit_mle(build_model(hpp_kind(5.0)), d, {}, cfg);
  CHECK(std::exp(fit.model.params.slice("log_rate")[0]) == doctest::Approx(mle).epsilon(1e-3));
  // Loss never rises across a 200-iteration window.
  const auto& h = fit.history;
  for (std::size_t i = 0; i + 200 < h.size(); ++i) CHECK(h[i + 200].train_nll <= h[i].train_nll + 1e-9);
  CHECK(nll_per_event(fit.model, d) == doctest::Approx(hpp_nll_per_event(std::exp(fit.model.params.slice("log_rate")[0]), d)));
}

TEST_CASE("fit_mle: first-epoch TriTPP loss equals the HPP loss at the initial rate") {
  const auto d = simulate_hpp(2.0, 5.0, 30, Rng(3));
  auto kind = testing::small_kind(ModelTag::kTriTpp, 5.0);
  kind.init_log_rate = std::log(1.5);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  const auto fit = fit_mle(build_model(kind), d, {}, cfg);
  const auto hfit = fit_mle(build_model(hpp_kind(5.0, 1.5)), d, {}, cfg);
  CHECK(fit.history[0].train_nll == doctest::Approx(hfit.history[0].train_nll).epsilon(1e-10));
}

TEST_CASE("fit_mle: TriTPP on HPP(2) data approaches the true NLL and is reproducible") {
  const auto d = simulate_hpp(2.0, 10.0, 300, Rng(4));
  const auto split = split_dataset(d, 4);
  auto kind = testing::small_kind(ModelTag::kTriTpp, 10.0, 8, 4, 2);
  TrainConfig cfg;
  cfg.max_epochs = 300;
  cfg.lr = 0.02;
  const auto fit = fit_mle(build_model(kind), split.train, split.val, cfg);
  const double truth = hpp_nll_per_event(2.0, split.test);
  CHECK(std::abs(nll_per_event(fit.model, split.test) - truth) < 0.05);
  CHECK(fit.best_epoch >= 1);

  cfg.max_epochs = 40;
  const auto a = fit_mle(build_model(kind), split.train, split.val, cfg);
  const auto b = fit_mle(build_model(kind), split.train, split.val, cfg);
  CHECK(values_of(a.model) == values_of(b.model));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].train_nll == b.history[i].train_nll);
  std::ostringstream os;
  write_history_csv(os, a.history);
  CHECK(os.str().rfind("epoch,train_nll,val_nll,lr\n1,", 0) == 0);
}

TEST_CASE("fit_mle: configuration errors") {
  TrainConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS(fit_mle(build_model(hpp_kind(1.0)), Dataset{EventSequence{{0.5}, 1.0}}, {}, cfg));
  CHECK_THROWS(fit_mle(build_model(hpp_kind(1.0)), Dataset{}, {}, TrainConfig{}));
}

TEST_CASE("grad_check: HPP score and random TriTPP") {
  {
    const auto m = build_model(hpp_kind(3.0, 1.7));
    const Dataset d = {EventSequence{{0.5, 1.0, 2.5}, 3.0}, EventSequence{{2.0}, 3.0}};
    const auto rep = grad_check(m, pad_batch(d), 1e-5, 1e-7);
    CHECK(rep.passed);
    // d/d log(lambda) = lambda * (N / lambda - T), summed over rows.
    CHECK(rep.analytic[0] == doctest::Approx(1.7 * (4.0 / 1.7 - 6.0)).epsilon(1e-13));
  }
  {
    Rng rng(5);
    ModelKind kind = testing::small_kind(ModelTag::kTriTpp, 4.0, 10, 8, 4);
    const auto m = testing::random_model(kind, rng, 0.3);
    const auto rep = grad_check(m, pad_batch(testing::random_dataset(4.0, 6, 12, rng)), 1e-5, 1e-5);
    CHECK(rep.passed);
    CHECK(rep.worst_rel_error < 1e-5);
    CHECK_FALSE(rep.worst_slice.empty());
  }
  {
    // Sequences with no events only see the spline at its fixed endpoint,
    // so the IPP spline receives no gradient.
    const auto m = build_model(testing::small_kind(ModelTag::kIpp, 2.0));
    const Dataset d = {EventSequence{{}, 2.0}, EventSequence{{}, 2.0}};
    const auto rep = grad_check(m, pad_batch(d), 1e-5, 1e-7);
    const auto& g1 = m.params.slice_info("g1");
    for (std::size_t i = g1.offset; i < g1.offset + g1.count; ++i) {
      CHECK(std::abs(rep.analytic[i]) < 1e-12);
      CHECK(rep.numeric[i] == 0.0);
    }
  }
  CHECK_THROWS(grad_check(build_model(hpp_kind(1.0)), pad_batch(Dataset{EventSequence{{}, 1.0}}), 0.0, 1e-7));
}

TEST_CASE("checkpoint round trip") {
  Rng rng(6);
  for (const auto tag : testing::all_tags()) {
    auto kind = testing::small_kind(tag, 3.5);
    kind.init_log_rate = 0.3;
    const auto m = testing::random_model(kind, rng);
    std::stringstream ss;
    save_checkpoint(ss, kind, m);
    const auto c = load_checkpoint(ss);
    CHECK(c.kind.tag == tag);
    CHECK(c.kind.knots == kind.knots);
    CHECK(c.kind.block == kind.block);
    CHECK(c.kind.layers == kind.layers);
    CHECK(c.kind.horizon == kind.horizon);
    CHECK(values_of(c.model) == values_of(m));
    const auto batch = pad_batch(testing::random_dataset(3.5, 3, 5, rng));
    CHECK(log_prob(c.model, batch) == log_prob(m, batch));
  }
  std::stringstream bad(R"({"version": 1, "kind": "tritpp"})");
  CHECK_THROWS(load_checkpoint(bad));
}
