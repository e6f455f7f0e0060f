// Command-line front end: simulate, train, sample, eval, vi, bench.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tpp/bench.hpp"
#include "tpp/config.hpp"
#include "tpp/errors.hpp"
#include "tpp/metrics.hpp"
#include "tpp/mjp.hpp"
#include "tpp/models.hpp"
#include "tpp/seqdata.hpp"
#include "tpp/train.hpp"
#include "tpp/vi.hpp"

namespace fs = std::filesystem;
using namespace tpp;

namespace {

struct Run {
  Config cfg;
  std::uint64_t seed = 0;
  fs::path out;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (const char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  os.precision(17);
  return os;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty() || !fs::is_regular_file(path)) throw Error(what + " '" + path + "' does not exist");
}

ModelKind model_kind(const Config& c, double horizon) {
  ModelKind k;
  k.tag = parse_model_tag(c.str("model.kind", "tritpp"));
  k.knots = static_cast<std::size_t>(c.integer("model.K", 20));
  k.block = static_cast<std::size_t>(c.integer("model.H", 16));
  k.layers = static_cast<std::size_t>(c.integer("model.L", 4));
  k.horizon = c.num("model.T", horizon);
  k.init_log_rate = c.num("model.init_log_rate", 0.0);
  return k;
}

TrainConfig train_config(const Config& c, std::uint64_t seed) {
  TrainConfig t;
  t.lr = c.num("train.lr", t.lr);
  t.l2 = c.num("train.l2", t.l2);
  t.max_epochs = static_cast<std::size_t>(c.integer("train.max_epochs", static_cast<long long>(t.max_epochs)));
  t.plateau = static_cast<std::size_t>(c.integer("train.plateau", static_cast<long long>(t.plateau)));
  t.early_stop = static_cast<std::size_t>(c.integer("train.early_stop", static_cast<long long>(t.early_stop)));
  t.seed = seed;
  t.validate();
  return t;
}

MmppParams mmpp_from_config(const Config& c) {
  MmppParams p;
  const auto pi = c.list("mmpp.pi");
  const auto lam = c.list("mmpp.lambda");
  const auto K = static_cast<Eigen::Index>(pi.size());
  p.pi = Eigen::Map<const Eigen::VectorXd>(pi.data(), K);
  p.lambda = Eigen::Map<const Eigen::VectorXd>(lam.data(), static_cast<Eigen::Index>(lam.size()));
  const auto a = c.list("mmpp.A");
  if (a.size() == 1) {
    p.A = Eigen::MatrixXd::Constant(K, K, a[0]);
  } else if (a.size() == pi.size() * pi.size()) {
    p.A = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(a.data(), K, K);
  } else {
    throw ValidationError("mmpp.A needs one value or K*K row-major values");
  }
  p.validate();
  return p;
}

double common_horizon(const Dataset& d) {
  if (d.empty()) throw ValidationError("dataset is empty");
  return d.front().horizon;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Run& run) {
  const auto& c = run.cfg;
  const std::string kind = c.str("simulate.kind", "hpp");
  const double T = c.num("simulate.T", 10.0);
  const auto count = static_cast<std::size_t>(c.integer("simulate.count", 1000));
  fs::create_directories(run.out);
  const Rng root(run.seed, 0x5101);
  if (kind == "hpp") {
    const auto data = simulate_hpp(c.num("simulate.rate", 1.0), T, count, root);
    write_dataset(run.out / "data.jsonl", data);
  } else if (kind == "hawkes") {
    const HawkesExpParams p{c.num("hawkes.mu", 1.0), c.num("hawkes.alpha", 0.5), c.num("hawkes.beta", 1.0)};
    Dataset data;
    for (std::size_t i = 0; i < count; ++i) {
      Rng r = root.split(i);
      data.push_back(hawkes_sample(p, T, r));
    }
    write_dataset(run.out / "data.jsonl", data);
  } else if (kind == "mmpp") {
    const auto p = mmpp_from_config(c);
    Rng r = root.split(0);
    const auto s = simulate_mmpp(p, T, r);
    write_dataset(run.out / "obs.jsonl", Dataset{EventSequence{s.obs, T}});
    auto os = open_out(run.out / "trajectory.csv");
    os << "time,state\n0," << s.traj.states[0] << '\n';
    for (std::size_t i = 0; i < s.traj.times.size(); ++i) os << s.traj.times[i] << ',' << s.traj.states[i + 1] << '\n';
  } else {
    throw ValidationError("simulate.kind must be hpp, hawkes or mmpp");
  }
  std::cout << "wrote " << run.out.string() << '\n';
  return 0;
}

int cmd_train(const Run& run) {
  const auto& c = run.cfg;
  const std::string path = c.str("data.path", "");
  require_file(path, "dataset");
  const auto data = read_dataset(path);
  const auto split = split_dataset(data, run.seed);
  const auto kind = model_kind(c, common_horizon(data));
  const auto tc = train_config(c, run.seed);
  const auto fit = fit_mle(build_model(kind), split.train, split.val, tc);
  const double test_nll = split.test.empty() ? std::nan("") : nll_per_event(fit.model, split.test);

  fs::create_directories(run.out);
  save_checkpoint((run.out / "checkpoint.json").string(), kind, fit.model);
  auto hist = open_out(run.out / "loss.csv");
  write_history_csv(hist, fit.history);
  auto met = open_out(run.out / "metrics.csv");
  met << "model,dataset,metric,value\n";
  met << csv_field(model_tag_name(kind.tag)) << ',' << csv_field(path) << ",test_nll_per_event," << test_nll << '\n';
  if (kind.tag == ModelTag::kHpp) {
    met << csv_field(model_tag_name(kind.tag)) << ',' << csv_field(path) << ",rate,"
        << std::exp(fit.model.params.slice("log_rate")[0]) << '\n';
  }
  std::cout << "best epoch " << fit.best_epoch << ", test NLL/event " << test_nll << '\n';
  return 0;
}

int cmd_sample(const Run& run) {
  const auto& c = run.cfg;
  const std::string ck = c.str("sample.checkpoint", "");
  require_file(ck, "checkpoint");
  const auto count = c.integer("sample.count", 1000);
  if (count <= 0) throw ValidationError("sample.count must be positive");
  const auto cp = load_checkpoint(ck);
  const auto s = sample(cp.model, static_cast<std::size_t>(count), Rng(run.seed, 0x5a3e));
  const auto data = s.to_dataset();
  fs::create_directories(run.out);
  write_dataset(run.out / "samples.jsonl", data);
  auto os = open_out(run.out / "lengths.csv");
  os << "sequence,length\n";
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << i << ',' << data[i].times.size() << '\n';
    total += static_cast<double>(data[i].times.size());
  }
  std::cout << "mean length " << total / static_cast<double>(data.size()) << '\n';
  return 0;
}

int cmd_eval(const Run& run) {
  const auto& c = run.cfg;
  const std::string ck = c.str("eval.checkpoint", "");
  const std::string path = c.str("data.path", "");
  require_file(ck, "checkpoint");
  require_file(path, "dataset");
  const auto cp = load_checkpoint(ck);
  const auto test = read_dataset(path);
  if (test.empty()) throw ValidationError("eval: test set is empty");
  const double nll = nll_per_event(cp.model, test);
  const auto gen = sample(cp.model, test.size(), Rng(run.seed, 0xe7a1)).to_dataset();
  const auto mm = mmd(gen, test);
  const double wl = wasserstein_lengths(gen, test);
  fs::create_directories(run.out);
  auto os = open_out(run.out / "eval.csv");
  const std::string model = csv_field(model_tag_name(cp.kind.tag)), ds = csv_field(path);
  os << "model,dataset,metric,value\n";
  os << model << ',' << ds << ",nll_per_event," << nll << '\n';
  os << model << ',' << ds << ",mmd," << mm.value << '\n';
  os << model << ',' << ds << ",wasserstein_lengths," << wl << '\n';
  std::cout << "nll/event " << nll << "  mmd " << mm.value << "  wasserstein " << wl << '\n';
  return 0;
}

int cmd_vi(const Run& run) {
  const auto& c = run.cfg;
  const std::string path = c.str("data.path", "");
  require_file(path, "observation file");
  const auto seqs = read_dataset(path);
  if (seqs.size() != 1) throw ValidationError("vi: observation file must hold exactly one sequence");
  const auto& o = seqs.front();
  const auto theta = mmpp_from_config(c);
  ViConfig vc;
  vc.iterations = static_cast<std::size_t>(c.integer("vi.iterations", 1000));
  vc.lr = c.num("vi.lr", 0.01);
  vc.theta_lr = c.num("vi.theta_lr", 0.01);
  vc.learn_theta = c.flag("vi.learn_theta", false);
  vc.elbo.samples = static_cast<std::size_t>(c.integer("vi.samples", 512));
  vc.elbo.gamma = c.num("vi.gamma", 0.1);
  vc.knots = static_cast<std::size_t>(c.integer("model.K", 20));
  vc.block = static_cast<std::size_t>(c.integer("model.H", 4));
  vc.layers = static_cast<std::size_t>(c.integer("model.L", 2));
  vc.seed = run.seed;
  const auto res = fit_vi(o.times, o.horizon, theta, vc);
  const auto grid = linspace(0.0, o.horizon, static_cast<std::size_t>(c.integer("vi.grid", 200)));
  const auto vm = vi_marginals(res.q, res.theta, o.times, grid,
                               static_cast<std::size_t>(c.integer("vi.curve_samples", 2048)), Rng(run.seed, 0xc0fe));

  fs::create_directories(run.out);
  auto os = open_out(run.out / "posterior.csv");
  os << "time,state,probability,method\n";
  auto emit = [&](const Eigen::MatrixXd& m, const char* method) {
    for (Eigen::Index g = 0; g < m.rows(); ++g)
      for (Eigen::Index k = 0; k < m.cols(); ++k)
        os << grid[static_cast<std::size_t>(g)] << ',' << k << ',' << m(g, k) << ',' << method << '\n';
  };
  emit(vm, "vi");
  if (c.flag("vi.mcmc", false)) {
    RaoTehConfig rc;
    rc.samples = static_cast<std::size_t>(c.integer("mcmc.samples", 1000));
    rc.burn_in = static_cast<std::size_t>(c.integer("mcmc.burn_in", 100));
    Rng r(run.seed, 0x3c3c);
    emit(rao_teh_posterior(o.times, o.horizon, theta, grid, r, rc), "mcmc");
  }
  auto hist = open_out(run.out / "elbo.csv");
  hist << "iteration,elbo\n";
  for (std::size_t i = 0; i < res.elbo_history.size(); ++i) hist << i << ',' << res.elbo_history[i] << '\n';
  if (vc.learn_theta) {
    nlohmann::json j;
    j["pi"] = std::vector<double>(res.theta.pi.data(), res.theta.pi.data() + res.theta.pi.size());
    std::vector<double> a;
    for (Eigen::Index k = 0; k < res.theta.A.rows(); ++k)
      for (Eigen::Index l = 0; l < res.theta.A.cols(); ++l) a.push_back(res.theta.A(k, l));
    j["A"] = a;
    j["lambda"] = std::vector<double>(res.theta.lambda.data(), res.theta.lambda.data() + res.theta.lambda.size());
    std::ofstream(run.out / "theta.json") << j.dump(1) << '\n';
  }
  std::cout << "final ELBO " << res.elbo_history.back() << '\n';
  return 0;
}

int cmd_bench(const Run& run) {
  const auto& c = run.cfg;
  BenchConfig bc;
  bc.batch = static_cast<std::size_t>(c.integer("bench.batch", 100));
  bc.runs = static_cast<std::size_t>(c.integer("bench.runs", 100));
  bc.seed = run.seed;
  const auto maxlen = static_cast<std::size_t>(c.integer("bench.max_length", 12800));
  bc.lengths.clear();
  for (std::size_t l = 100; l <= maxlen; l *= 2) bc.lengths.push_back(l);
  const auto rows = run_bench(bc);
  fs::create_directories(run.out);
  auto os = open_out(run.out / "bench.csv");
  write_bench_csv(os, rows);
  write_bench_csv(std::cout, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triangular-map temporal point processes"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "key = value settings file");
  app.add_option("--seed", seed, "random seed")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "OpenMP thread count (0 keeps the default)");
  app.add_option("--set", overrides, "key=value override, repeatable");
  const char* names[] = {"simulate", "train", "sample", "eval", "vi", "bench"};
  for (const char* n : names) app.add_subcommand(n);
  CLI11_PARSE(app, argc, argv);

  try {
    Run run;
    if (!config_path.empty()) run.cfg.merge_file(config_path);
    for (const auto& kv : overrides) run.cfg.merge_assignment(kv);
    run.seed = seed;
    run.out = out_dir;
    if (threads <= 0) threads = static_cast<int>(run.cfg.integer("threads", 0));
    if (threads > 0) omp_set_num_threads(threads);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "simulate") return cmd_simulate(run);
    if (cmd == "train") return cmd_train(run);
    if (cmd == "sample") return cmd_sample(run);
    if (cmd == "eval") return cmd_eval(run);
    if (cmd == "vi") return cmd_vi(run);
    if (cmd == "bench") return cmd_bench(run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
