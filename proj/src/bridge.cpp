#include "tpp/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tpp/errors.hpp"

namespace tpp {

namespace {

double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

[[noreturn]] void out_of_domain(BridgeKind kind, double x) {
  throw DomainError(std::string(bridge_name(kind)), "input " + std::to_string(x) + " outside domain");
}

}  // namespace

std::string_view bridge_name(BridgeKind kind) {
  switch (kind) {
    case BridgeKind::kPsi: return "psi";
    case BridgeKind::kPsiInv: return "psi_inv";
    case BridgeKind::kSigmoid: return "sigmoid";
    case BridgeKind::kLogit: return "logit";
    case BridgeKind::kScale: return "scale";
  }
  return "?";
}

BridgeEval bridge_eval(BridgeKind kind, double x, double scale) {
  if (std::isnan(x)) out_of_domain(kind, x);
  switch (kind) {
    case BridgeKind::kPsi: {
      if (x < 0.0) out_of_domain(kind, x);
      return {-std::expm1(-x), -x, -1.0, std::exp(-x)};
    }
    case BridgeKind::kPsiInv: {
      if (x < 0.0 || x > 1.0) out_of_domain(kind, x);
      const bool clamped = x > 1.0 - kBridgeClamp;
      const double v = clamped ? 1.0 - kBridgeClamp : x;
      const double inv = 1.0 / (1.0 - v);
      return {-std::log1p(-v), -std::log1p(-v), clamped ? 0.0 : inv, clamped ? 0.0 : inv};
    }
    case BridgeKind::kSigmoid: {
      if (std::isinf(x)) out_of_domain(kind, x);
      const double s = sigmoid(x);
      return {s, -softplus(-x) - softplus(x), 1.0 - 2.0 * s, s * (1.0 - s)};
    }
    case BridgeKind::kLogit: {
      if (x < 0.0 || x > 1.0) out_of_domain(kind, x);
      const bool clamped = x < kBridgeClamp || x > 1.0 - kBridgeClamp;
      const double v = std::clamp(x, kBridgeClamp, 1.0 - kBridgeClamp);
      const double ld = -std::log(v) - std::log1p(-v);
      return {std::log(v) - std::log1p(-v), ld, clamped ? 0.0 : -1.0 / v + 1.0 / (1.0 - v),
              clamped ? 0.0 : 1.0 / (v * (1.0 - v))};
    }
    case BridgeKind::kScale: {
      if (std::isinf(x)) out_of_domain(kind, x);
      return {scale * x, std::log(scale), 0.0, scale};
    }
  }
  out_of_domain(kind, x);
}

double bridge_inverse(BridgeKind kind, double y, double scale) {
  if (std::isnan(y)) out_of_domain(kind, y);
  switch (kind) {
    case BridgeKind::kPsi:
      return bridge_eval(BridgeKind::kPsiInv, y).y;
    case BridgeKind::kPsiInv:
      return bridge_eval(BridgeKind::kPsi, y).y;
    case BridgeKind::kSigmoid:
      return bridge_eval(BridgeKind::kLogit, y).y;
    case BridgeKind::kLogit:
      return sigmoid(y);
    case BridgeKind::kScale:
      return y / scale;
  }
  out_of_domain(kind, y);
}

BridgeResult bridge_forward(std::span<const double> x, BridgeKind kind, double scale) {
  BridgeResult r{std::vector<double>(x.size()), std::vector<double>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto e = bridge_eval(kind, x[i], scale);
    r.y[i] = e.y;
    r.logderiv[i] = e.logderiv;
  }
  return r;
}

}  // namespace tpp
