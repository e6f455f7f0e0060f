#include "tpp/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tpp/errors.hpp"
#include "tpp/scan.hpp"

namespace tpp {

// ---------------------------------------------------------------------------
// LayerSpec / ParamStore / TransformSpec

std::string LayerSpec::label() const {
  switch (kind) {
    case LayerKind::kSpline: return "spline(" + name + ")";
    case LayerKind::kBridge: return std::string(bridge_name(bridge));
    case LayerKind::kScale: return "scale(" + std::to_string(scale) + ")";
    case LayerKind::kLearnedScale: return "learned_scale(" + name + ")";
    case LayerKind::kCumsum: return "cumsum";
    case LayerKind::kDiff: return "diff";
    case LayerKind::kBlock: return "block(" + name + ")";
  }
  return "?";
}

ParamStore::ParamStore(std::vector<ParamSlice> slices) : slices_(std::move(slices)) {
  std::size_t n = 0;
  for (const auto& s : slices_) {
    if (s.offset != n) throw ShapeError("ParamStore: slices must partition the vector in order");
    n += s.count;
  }
  values_.assign(n, 0.0);
  grad_.assign(n, 0.0);
}

void ParamStore::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

const ParamSlice& ParamStore::slice_info(const std::string& name) const {
  for (const auto& s : slices_) {
    if (s.name == name) return s;
  }
  throw Error("ParamStore: no slice named " + name);
}

bool ParamStore::has_slice(const std::string& name) const {
  return std::any_of(slices_.begin(), slices_.end(), [&](const auto& s) { return s.name == name; });
}

std::span<double> ParamStore::slice(const std::string& name) {
  const auto& s = slice_info(name);
  return std::span<double>(values_).subspan(s.offset, s.count);
}

std::span<const double> ParamStore::slice(const std::string& name) const {
  const auto& s = slice_info(name);
  return std::span<const double>(values_).subspan(s.offset, s.count);
}

std::span<double> ParamStore::grad_slice(const std::string& name) {
  const auto& s = slice_info(name);
  return std::span<double>(grad_).subspan(s.offset, s.count);
}

TransformSpec& TransformSpec::push(LayerSpec spec) {
  spec.param_offset = param_count_;
  param_count_ += spec.param_count;
  layers_.push_back(std::move(spec));
  return *this;
}

TransformSpec& TransformSpec::spline(const std::string& name, std::size_t bins, RqsSpline::Tails tails) {
  LayerSpec l;
  l.kind = LayerKind::kSpline;
  l.name = name;
  l.bins = bins;
  l.tails = tails;
  l.param_count = RqsSpline::param_count(bins);
  return push(std::move(l));
}

TransformSpec& TransformSpec::bridge(BridgeKind kind) {
  if (kind == BridgeKind::kScale) throw Error("TransformSpec: use scale() for constant scaling");
  LayerSpec l;
  l.kind = LayerKind::kBridge;
  l.bridge = kind;
  return push(std::move(l));
}

TransformSpec& TransformSpec::scale(double factor) {
  if (!(factor > 0.0)) throw Error("TransformSpec: scale factor must be positive");
  LayerSpec l;
  l.kind = LayerKind::kScale;
  l.scale = factor;
  return push(std::move(l));
}

TransformSpec& TransformSpec::learned_scale(const std::string& name) {
  LayerSpec l;
  l.kind = LayerKind::kLearnedScale;
  l.name = name;
  l.param_count = 1;
  return push(std::move(l));
}

TransformSpec& TransformSpec::cumsum() {
  LayerSpec l;
  l.kind = LayerKind::kCumsum;
  return push(std::move(l));
}

TransformSpec& TransformSpec::diff() {
  LayerSpec l;
  l.kind = LayerKind::kDiff;
  return push(std::move(l));
}

TransformSpec& TransformSpec::block(const std::string& name, std::size_t size, std::size_t offset) {
  LayerSpec l;
  l.kind = LayerKind::kBlock;
  l.name = name;
  l.block = size;
  l.offset = offset;
  l.param_count = BlockLayer::param_count(size);
  return push(std::move(l));
}

std::vector<ParamSlice> TransformSpec::slice_table() const {
  std::vector<ParamSlice> out;
  for (const auto& l : layers_) {
    if (l.param_count > 0) out.push_back({l.name, l.param_offset, l.param_count});
  }
  return out;
}

std::vector<double> TransformSpec::identity_params() const {
  std::vector<double> p(param_count_, 0.0);
  for (const auto& l : layers_) {
    if (l.kind == LayerKind::kSpline) {
      const auto id = RqsSpline::identity_params(l.bins);
      std::copy(id.begin(), id.end(), p.begin() + static_cast<std::ptrdiff_t>(l.param_offset));
    }
  }
  return p;
}

void TransformSpec::check_chain() const {
  enum class Dom { kPositive, kUnit, kReal };
  auto name = [](Dom d) {
    switch (d) {
      case Dom::kPositive: return "R+";
      case Dom::kUnit: return "(0,1)";
      case Dom::kReal: return "R";
    }
    return "?";
  };
  Dom cur = Dom::kPositive;
  auto expect = [&](const LayerSpec& l, Dom want) {
    if (cur != want) {
      throw Error("TransformSpec: layer " + l.label() + " expects " + name(want) + " but receives " + name(cur));
    }
  };
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::kSpline:
        if (l.tails == RqsSpline::Tails::kBounded) {
          expect(l, Dom::kUnit);
        } else if (cur == Dom::kReal) {
          expect(l, Dom::kPositive);
        }
        break;
      case LayerKind::kBridge:
        switch (l.bridge) {
          case BridgeKind::kPsi: expect(l, Dom::kPositive); cur = Dom::kUnit; break;
          case BridgeKind::kPsiInv: expect(l, Dom::kUnit); cur = Dom::kPositive; break;
          case BridgeKind::kSigmoid: expect(l, Dom::kReal); cur = Dom::kUnit; break;
          case BridgeKind::kLogit: expect(l, Dom::kUnit); cur = Dom::kReal; break;
          case BridgeKind::kScale: break;
        }
        break;
      case LayerKind::kScale:
      case LayerKind::kLearnedScale:
        if (cur == Dom::kUnit) cur = Dom::kPositive;
        break;
      case LayerKind::kCumsum:
      case LayerKind::kDiff:
        if (cur == Dom::kUnit) cur = Dom::kPositive;
        break;
      case LayerKind::kBlock:
        expect(l, Dom::kReal);
        if (l.block == 0 || (l.offset != 0 && l.offset >= l.block)) throw Error("TransformSpec: bad block geometry");
        break;
    }
  }
  if (cur != Dom::kPositive) throw Error("TransformSpec: chain must end in R+");
}

// ---------------------------------------------------------------------------
// Flow

Flow::Flow(const TransformSpec& spec, std::span<const double> params)
    : spec_(&spec), params_(params.begin(), params.end()) {
  if (params.size() != spec.param_count()) throw ShapeError("Flow: parameter vector size mismatch");
  const auto& layers = spec.layers();
  splines_.resize(layers.size());
  blocks_.resize(layers.size());
  scales_.assign(layers.size(), 1.0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto p = std::span<const double>(params_).subspan(l.param_offset, l.param_count);
    switch (l.kind) {
      case LayerKind::kSpline: splines_[i] = std::make_unique<RqsSpline>(p, l.bins, l.tails); break;
      case LayerKind::kBlock: blocks_[i] = std::make_unique<BlockLayer>(p, l.block, l.offset); break;
      case LayerKind::kScale: scales_[i] = l.scale; break;
      case LayerKind::kLearnedScale: scales_[i] = std::exp(p[0]); break;
      default: break;
    }
  }
}

namespace {

[[noreturn]] void rethrow_domain(std::size_t index, const LayerSpec& l, const DomainError& e) {
  throw DomainError("layer " + std::to_string(index) + " " + l.label(), e.what());
}

}  // namespace

void Flow::forward(std::span<const double> t, std::span<double> z, std::span<double> logdiag, Tape* tape) const {
  const auto& layers = spec_->layers();
  const std::size_t n = t.size();
  if (z.size() != n || logdiag.size() != n) throw ShapeError("Flow::forward: size mismatch");
  std::vector<double> cur(t.begin(), t.end());
  std::vector<double> next(n);
  std::fill(logdiag.begin(), logdiag.end(), 0.0);
  if (tape) tape->acts.assign(layers.size() + 1, {});
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    if (tape) tape->acts[li] = cur;
    try {
      switch (l.kind) {
        case LayerKind::kSpline: {
          const auto& s = *splines_[li];
          for (std::size_t i = 0; i < n; ++i) {
            double ld = 0.0;
            next[i] = s.forward(cur[i], &ld);
            logdiag[i] += ld;
          }
          break;
        }
        case LayerKind::kBridge:
          for (std::size_t i = 0; i < n; ++i) {
            const auto e = bridge_eval(l.bridge, cur[i]);
            next[i] = e.y;
            logdiag[i] += e.logderiv;
          }
          break;
        case LayerKind::kScale:
        case LayerKind::kLearnedScale: {
          const double c = scales_[li];
          const double lc = std::log(c);
          for (std::size_t i = 0; i < n; ++i) {
            next[i] = c * cur[i];
            logdiag[i] += lc;
          }
          break;
        }
        case LayerKind::kCumsum: scan_cumsum(cur, next); break;
        case LayerKind::kDiff: pairwise_diff(cur, next); break;
        case LayerKind::kBlock: {
          std::vector<double> ld(n);
          blocks_[li]->forward(cur, next, ld);
          for (std::size_t i = 0; i < n; ++i) logdiag[i] += ld[i];
          break;
        }
      }
    } catch (const DomainError& e) {
      rethrow_domain(li, l, e);
    }
    std::swap(cur, next);
  }
  if (tape) tape->acts[layers.size()] = cur;
  std::copy(cur.begin(), cur.end(), z.begin());
}

void Flow::inverse(std::span<const double> z, std::span<double> t, Tape* tape) const {
  const auto& layers = spec_->layers();
  const std::size_t n = z.size();
  if (t.size() != n) throw ShapeError("Flow::inverse: size mismatch");
  std::vector<double> cur(z.begin(), z.end());
  std::vector<double> next(n);
  if (tape) {
    tape->acts.assign(layers.size() + 1, {});
    tape->acts[layers.size()] = cur;
  }
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    try {
      switch (l.kind) {
        case LayerKind::kSpline: {
          const auto& s = *splines_[li];
          for (std::size_t i = 0; i < n; ++i) next[i] = s.inverse(cur[i]);
          break;
        }
        case LayerKind::kBridge:
          for (std::size_t i = 0; i < n; ++i) next[i] = bridge_inverse(l.bridge, cur[i]);
          break;
        case LayerKind::kScale:
        case LayerKind::kLearnedScale: {
          const double c = scales_[li];
          for (std::size_t i = 0; i < n; ++i) next[i] = cur[i] / c;
          break;
        }
        case LayerKind::kCumsum: pairwise_diff(cur, next); break;
        case LayerKind::kDiff: scan_cumsum(cur, next); break;
        case LayerKind::kBlock: blocks_[li]->inverse(cur, next); break;
      }
    } catch (const DomainError& e) {
      rethrow_domain(li, l, e);
    }
    std::swap(cur, next);
    if (tape) tape->acts[li] = cur;
  }
  std::copy(cur.begin(), cur.end(), t.begin());
}

void Flow::backward(const Tape& tape, std::span<const double> g_z, std::span<const double> g_logdiag,
                    std::span<double> g_params, std::span<double> g_t) const {
  const auto& layers = spec_->layers();
  if (tape.acts.size() != layers.size() + 1) throw ShapeError("Flow::backward: tape does not match the chain");
  const std::size_t n = g_z.size();
  if (g_logdiag.size() != n || g_t.size() != n || tape.acts.front().size() != n) {
    throw ShapeError("Flow::backward: size mismatch");
  }
  if (g_params.size() != spec_->param_count()) throw ShapeError("Flow::backward: parameter gradient size mismatch");
  std::vector<double> g(g_z.begin(), g_z.end());
  std::vector<double> gx(n);
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    const auto& x = tape.acts[li];
    auto gp = g_params.subspan(l.param_offset, l.param_count);
    switch (l.kind) {
      case LayerKind::kSpline: {
        const auto& s = *splines_[li];
        RqsSpline::Grad sg(s.bins());
        for (std::size_t i = 0; i < n; ++i) gx[i] = s.backward(x[i], g[i], g_logdiag[i], sg);
        s.finalize(sg, gp);
        break;
      }
      case LayerKind::kBridge:
        for (std::size_t i = 0; i < n; ++i) {
          const auto e = bridge_eval(l.bridge, x[i]);
          gx[i] = g[i] * e.dydx + g_logdiag[i] * e.dlogderiv_dx;
        }
        break;
      case LayerKind::kScale:
        for (std::size_t i = 0; i < n; ++i) gx[i] = g[i] * scales_[li];
        break;
      case LayerKind::kLearnedScale: {
        const double c = scales_[li];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          gx[i] = g[i] * c;
          acc += g[i] * c * x[i] + g_logdiag[i];
        }
        gp[0] += acc;
        break;
      }
      case LayerKind::kCumsum: reverse_cumsum(g, gx); break;
      case LayerKind::kDiff: reverse_diff(g, gx); break;
      case LayerKind::kBlock: blocks_[li]->backward(x, g, g_logdiag, gx, gp); break;
    }
    std::swap(g, gx);
  }
  std::copy(g.begin(), g.end(), g_t.begin());
}

void Flow::inverse_backward(const Tape& tape, std::span<const double> g_t, std::span<double> g_params,
                            std::span<double> g_z) const {
  const auto& layers = spec_->layers();
  if (tape.acts.size() != layers.size() + 1) throw ShapeError("Flow::inverse_backward: tape does not match the chain");
  const std::size_t n = g_t.size();
  if (g_z.size() != n || tape.acts.front().size() != n) throw ShapeError("Flow::inverse_backward: size mismatch");
  if (g_params.size() != spec_->param_count()) {
    throw ShapeError("Flow::inverse_backward: parameter gradient size mismatch");
  }
  // Layer l maps x = acts[l] to y = acts[l+1]; x = f^{-1}(y; theta), so
  // dx = J^{-1}(dy - df/dtheta dtheta). With u = J^{-T} g_x the cotangent of
  // y is u and the parameters receive -(df/dtheta)^T u.
  std::vector<double> g(g_t.begin(), g_t.end());
  std::vector<double> u(n);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    const auto& x = tape.acts[li];
    const auto& y = tape.acts[li + 1];
    auto gp = g_params.subspan(l.param_offset, l.param_count);
    switch (l.kind) {
      case LayerKind::kSpline: {
        const auto& s = *splines_[li];
        RqsSpline::Grad sg(s.bins());
        for (std::size_t i = 0; i < n; ++i) {
          u[i] = g[i] / s.dydx(x[i]);
          s.backward(x[i], -u[i], 0.0, sg);
        }
        s.finalize(sg, gp);
        break;
      }
      case LayerKind::kBridge:
        for (std::size_t i = 0; i < n; ++i) {
          // Derivative of the inverse at y; avoids the clamp of the forward map.
          double dxdy = 1.0;
          switch (l.bridge) {
            case BridgeKind::kPsi: dxdy = 1.0 / (1.0 - y[i]); break;
            case BridgeKind::kPsiInv: dxdy = std::exp(-y[i]); break;
            case BridgeKind::kSigmoid: dxdy = 1.0 / (y[i] * (1.0 - y[i])); break;
            case BridgeKind::kLogit: dxdy = x[i] * (1.0 - x[i]); break;
            case BridgeKind::kScale: break;
          }
          u[i] = g[i] * dxdy;
        }
        break;
      case LayerKind::kScale:
        for (std::size_t i = 0; i < n; ++i) u[i] = g[i] / scales_[li];
        break;
      case LayerKind::kLearnedScale: {
        const double c = scales_[li];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          u[i] = g[i] / c;
          acc += u[i] * y[i];
        }
        gp[0] -= acc;
        break;
      }
      case LayerKind::kCumsum: reverse_diff(g, u); break;
      case LayerKind::kDiff: reverse_cumsum(g, u); break;
      case LayerKind::kBlock:
        blocks_[li]->solve_transposed(g, u);
        blocks_[li]->param_vjp(x, u, -1.0, gp);
        break;
    }
    std::swap(g, u);
  }
  std::copy(g.begin(), g.end(), g_z.begin());
}

Flow::Stepper::Stepper(const Flow& flow)
    : flow_(&flow), ys_(flow.spec().layers().size()), xs_(flow.spec().layers().size()) {}

double Flow::Stepper::push(double z) {
  const auto& layers = flow_->spec_->layers();
  double cur = z;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& l = layers[li];
    auto& ys = ys_[li];
    auto& xs = xs_[li];
    const std::size_t i = ys.size();
    ys.push_back(cur);
    double x = 0.0;
    switch (l.kind) {
      case LayerKind::kSpline: x = flow_->splines_[li]->inverse(cur); break;
      case LayerKind::kBridge: x = bridge_inverse(l.bridge, cur); break;
      case LayerKind::kScale:
      case LayerKind::kLearnedScale: x = cur / flow_->scales_[li]; break;
      case LayerKind::kCumsum: x = i == 0 ? cur : cur - ys[i - 1]; break;
      case LayerKind::kDiff: x = i == 0 ? cur : xs[i - 1] + cur; break;
      case LayerKind::kBlock: {
        const auto& b = *flow_->blocks_[li];
        if (i < b.offset()) {
          x = cur;
        } else {
          const std::size_t s = i - (i - b.offset()) % b.block();
          const std::size_t r = i - s;
          double acc = cur;
          for (std::size_t c = 0; c < r; ++c) acc -= b.entry(r, c) * xs[s + c];
          x = acc / b.entry(r, r);
        }
        break;
      }
    }
    xs.push_back(x);
    cur = x;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Batched helpers

ComposeResult compose_forward(const PaddedBatch& batch, const TransformSpec& spec, std::span<const double> params) {
  const Flow flow(spec, params);
  ComposeResult r;
  r.rows = batch.rows;
  r.cols = batch.cols;
  r.z.assign(batch.rows * batch.cols, 0.0);
  r.logdiag.assign(batch.rows * batch.cols, 0.0);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(batch.rows); ++ri) {
    const auto row = static_cast<std::size_t>(ri);
    try {
      flow.forward(batch.row(row), std::span<double>(r.z).subspan(row * r.cols, r.cols),
                   std::span<double>(r.logdiag).subspan(row * r.cols, r.cols));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return r;
}

std::vector<double> compose_inverse(std::span<const double> z, std::size_t rows, std::size_t cols,
                                    const TransformSpec& spec, std::span<const double> params) {
  if (z.size() != rows * cols) throw ShapeError("compose_inverse: shape mismatch");
  const Flow flow(spec, params);
  std::vector<double> t(z.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(rows); ++ri) {
    const auto row = static_cast<std::size_t>(ri);
    try {
      flow.inverse(z.subspan(row * cols, cols), std::span<double>(t).subspan(row * cols, cols));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return t;
}

ChainGrad chain_vjp(const PaddedBatch& batch, const TransformSpec& spec, std::span<const double> params,
                    std::span<const double> cot_z, std::span<const double> cot_logdiag) {
  const std::size_t n = batch.rows * batch.cols;
  if (cot_z.size() != n || cot_logdiag.size() != n) throw ShapeError("chain_vjp: cotangent shape mismatch");
  const Flow flow(spec, params);
  const std::size_t P = spec.param_count();
  std::vector<double> per_row(batch.rows * P, 0.0);
  ChainGrad out{std::vector<double>(P, 0.0), std::vector<double>(n, 0.0)};
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(batch.rows); ++ri) {
    const auto row = static_cast<std::size_t>(ri);
    try {
      Tape tape;
      std::vector<double> z(batch.cols), ld(batch.cols);
      flow.forward(batch.row(row), z, ld, &tape);
      flow.backward(tape, cot_z.subspan(row * batch.cols, batch.cols), cot_logdiag.subspan(row * batch.cols, batch.cols),
                    std::span<double>(per_row).subspan(row * P, P),
                    std::span<double>(out.times).subspan(row * batch.cols, batch.cols));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t p = 0; p < P; ++p) out.params[p] += per_row[r * P + p];
  }
  return out;
}

}  // namespace tpp
