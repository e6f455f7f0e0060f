#include "tpp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

#include "tpp/errors.hpp"
#include "tpp/tpp.hpp"

namespace tpp {

TppModel bench_model(std::size_t length, const BenchConfig& cfg) {
  ModelKind kind;
  kind.tag = ModelTag::kTriTpp;
  kind.knots = cfg.knots;
  kind.block = cfg.block;
  kind.layers = cfg.layers;
  kind.horizon = static_cast<double>(length);
  TppModel m = build_model(kind);
  Rng rng(cfg.seed, 0xbe7c);
  for (const auto& s : m.params.slices()) {
    if (s.name == "log_rate") continue;
    for (auto& v : m.params.slice(s.name)) v += 0.05 * rng.normal();
  }
  return m;
}

namespace {

template <class Fn>
double median_time(std::size_t runs, Fn&& fn) {
  std::vector<double> t(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto a = std::chrono::steady_clock::now();
    fn(r);
    const auto b = std::chrono::steady_clock::now();
    t[r] = std::chrono::duration<double>(b - a).count();
  }
  std::sort(t.begin(), t.end());
  return runs % 2 ? t[runs / 2] : 0.5 * (t[runs / 2 - 1] + t[runs / 2]);
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.lengths.empty() || cfg.batch == 0 || cfg.runs == 0) throw ValidationError("bench: empty configuration");
  std::vector<BenchRow> rows;
  for (const std::size_t len : cfg.lengths) {
    const TppModel model = bench_model(len, cfg);
    const Rng root(cfg.seed, len);
    const auto data = sample(model, cfg.batch, root.split(0)).to_dataset();
    const auto batch = pad_batch(data);
    const std::vector<double> w(batch.rows, 1.0 / static_cast<double>(batch.rows));
    SampleOptions opts;
    opts.ext_hint = std::max<std::size_t>(64, 2 * len);

    rows.push_back({len, "log_prob_grad", "parallel",
                    median_time(cfg.runs, [&](std::size_t) { (void)log_prob_grad(model, batch, w); }), cfg.runs});
    rows.push_back({len, "sample", "parallel",
                    median_time(cfg.runs, [&](std::size_t r) { (void)sample(model, cfg.batch, root.split(r + 1), opts); }),
                    cfg.runs});
    rows.push_back({len, "sample", "sequential",
                    median_time(cfg.runs,
                                [&](std::size_t r) { (void)sample_sequential(model, cfg.batch, root.split(r + 1)); }),
                    cfg.runs});
  }
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "length,operation,method,median_seconds,runs\n";
  os.precision(9);
  for (const auto& r : rows) {
    os << r.length << ',' << r.operation << ',' << r.method << ',' << r.median_seconds << ',' << r.runs << '\n';
  }
}

}  // namespace tpp
