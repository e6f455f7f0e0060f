#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tpp/block.hpp"
#include "tpp/bridge.hpp"
#include "tpp/seqdata.hpp"
#include "tpp/spline.hpp"

namespace tpp {

enum class LayerKind { kSpline, kBridge, kScale, kLearnedScale, kCumsum, kDiff, kBlock };

struct LayerSpec {
  LayerKind kind = LayerKind::kScale;
  std::string name;
  // kSpline
  std::size_t bins = 0;
  RqsSpline::Tails tails = RqsSpline::Tails::kBounded;
  // kBridge
  BridgeKind bridge = BridgeKind::kPsi;
  // kScale
  double scale = 1.0;
  // kBlock
  std::size_t block = 0;
  std::size_t offset = 0;
  // Slice of the parameter vector owned by the layer.
  std::size_t param_offset = 0;
  std::size_t param_count = 0;

  std::string label() const;
};

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t count = 0;
};

// Flat parameter vector with a named slice table and a same-shaped gradient.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::vector<ParamSlice> slices);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }
  void zero_grad();

  const std::vector<ParamSlice>& slices() const { return slices_; }
  const ParamSlice& slice_info(const std::string& name) const;
  bool has_slice(const std::string& name) const;
  std::span<double> slice(const std::string& name);
  std::span<const double> slice(const std::string& name) const;
  std::span<double> grad_slice(const std::string& name);

 private:
  std::vector<ParamSlice> slices_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

// Ordered chain of layers, first entry applied first.
class TransformSpec {
 public:
  TransformSpec& spline(const std::string& name, std::size_t bins, RqsSpline::Tails tails = RqsSpline::Tails::kBounded);
  TransformSpec& bridge(BridgeKind kind);
  TransformSpec& scale(double factor);
  TransformSpec& learned_scale(const std::string& name);
  TransformSpec& cumsum();
  TransformSpec& diff();
  TransformSpec& block(const std::string& name, std::size_t size, std::size_t offset);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t param_count() const { return param_count_; }
  std::vector<ParamSlice> slice_table() const;
  // Parameters that make every learnable layer the identity; learned scales
  // start at log-scale 0.
  std::vector<double> identity_params() const;

  // Checks domain/codomain compatibility of adjacent layers; throws Error.
  void check_chain() const;

 private:
  TransformSpec& push(LayerSpec spec);

  std::vector<LayerSpec> layers_;
  std::size_t param_count_ = 0;
};

// Intermediate activations of one row, recorded for the gradient pass.
// acts[l] is the input of layer l; acts.back() is the output of the chain.
struct Tape {
  std::vector<std::vector<double>> acts;
};

// A TransformSpec bound to concrete parameter values.
class Flow {
 public:
  Flow(const TransformSpec& spec, std::span<const double> params);

  const TransformSpec& spec() const { return *spec_; }
  std::size_t param_count() const { return spec_->param_count(); }

  // z = F(t) and the per-position log Jacobian diagonal.
  void forward(std::span<const double> t, std::span<double> z, std::span<double> logdiag, Tape* tape = nullptr) const;
  void inverse(std::span<const double> z, std::span<double> t, Tape* tape = nullptr) const;

  // Reverse pass through forward(): given cotangents of z and logdiag,
  // accumulates parameter cotangents and writes the cotangent of t.
  void backward(const Tape& tape, std::span<const double> g_z, std::span<const double> g_logdiag,
                std::span<double> g_params, std::span<double> g_t) const;

  // Reverse pass through inverse(): given the cotangent of t, accumulates
  // parameter cotangents and writes the cotangent of z.
  void inverse_backward(const Tape& tape, std::span<const double> g_t, std::span<double> g_params,
                        std::span<double> g_z) const;

  // Incremental inverse: base points are fed one at a time and each call
  // returns the next time. Output matches inverse() on the same prefix.
  class Stepper {
   public:
    explicit Stepper(const Flow& flow);
    double push(double z);

   private:
    const Flow* flow_;
    std::vector<std::vector<double>> ys_;  // per layer: outputs seen so far
    std::vector<std::vector<double>> xs_;  // per layer: recovered inputs
  };

 private:
  const TransformSpec* spec_;
  std::vector<double> params_;
  std::vector<std::unique_ptr<RqsSpline>> splines_;
  std::vector<std::unique_ptr<BlockLayer>> blocks_;
  std::vector<double> scales_;
};

struct ComposeResult {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> z;
  std::vector<double> logdiag;
};

// Batched map over the rows of a padded batch.
ComposeResult compose_forward(const PaddedBatch& batch, const TransformSpec& spec, std::span<const double> params);
std::vector<double> compose_inverse(std::span<const double> z, std::size_t rows, std::size_t cols,
                                    const TransformSpec& spec, std::span<const double> params);

struct ChainGrad {
  std::vector<double> params;
  std::vector<double> times;
};

// Reverse-mode gradient of sum(cot_z * z + cot_logdiag * logdiag) where
// (z, logdiag) = compose_forward(batch). Row contributions are reduced in
// row order.
ChainGrad chain_vjp(const PaddedBatch& batch, const TransformSpec& spec, std::span<const double> params,
                    std::span<const double> cot_z, std::span<const double> cot_logdiag);

}  // namespace tpp
