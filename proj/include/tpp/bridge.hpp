#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace tpp {

// Elementwise maps that move values between R+, (0, 1) and R.
enum class BridgeKind {
  kPsi,      // 1 - exp(-x): R+ -> (0, 1)
  kPsiInv,   // -log(1 - y): (0, 1) -> R+
  kSigmoid,  // R -> (0, 1)
  kLogit,    // (0, 1) -> R
  kScale,    // c * x
};

std::string_view bridge_name(BridgeKind kind);

// Inputs of psi^-1 and logit are clamped this far from the open ends.
inline constexpr double kBridgeClamp = 1e-12;

struct BridgeEval {
  double y;
  double logderiv;
  double dlogderiv_dx;  // derivative of logderiv w.r.t. the input
  double dydx;          // zero where the input was clamped
};

// Throws DomainError when x is outside the kind's domain.
BridgeEval bridge_eval(BridgeKind kind, double x, double scale = 1.0);
double bridge_inverse(BridgeKind kind, double y, double scale = 1.0);

struct BridgeResult {
  std::vector<double> y;
  std::vector<double> logderiv;
};
BridgeResult bridge_forward(std::span<const double> x, BridgeKind kind, double scale = 1.0);

}  // namespace tpp
