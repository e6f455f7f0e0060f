#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tpp {

// Monotone rational-quadratic spline on [0, 1] with K bins.
//
// Unconstrained parameters are laid out as
//   [K width logits | K height logits | K+1 derivative logits]
// Widths/heights: eps + (1 - K*eps) * softmax(logits). Derivatives:
// eps + softplus(logit). All-zero width/height logits together with
// identity_derivative_logit() give the identity map.
class RqsSpline {
 public:
  enum class Tails {
    // Inputs must lie in [0, 1].
    kBounded,
    // Outside [0, 1] the map continues linearly with the boundary slope.
    kLinear,
  };

  static constexpr double kMinBin = 1e-3;
  static constexpr double kMinDerivative = 1e-3;

  static std::size_t param_count(std::size_t bins) { return 3 * bins + 1; }
  static double identity_derivative_logit();
  static std::vector<double> identity_params(std::size_t bins);

  RqsSpline(std::span<const double> params, std::size_t bins, Tails tails = Tails::kBounded);

  std::size_t bins() const { return bins_; }
  Tails tails() const { return tails_; }
  std::span<const double> knot_x() const { return xs_; }
  std::span<const double> knot_y() const { return ys_; }
  std::span<const double> knot_d() const { return ds_; }

  // y and log dy/dx. Throws DomainError for inputs the tail mode rejects.
  double forward(double x, double* logderiv = nullptr) const;
  double inverse(double y) const;

  // Knot-level cotangents. finalize() maps them onto the unconstrained
  // parameter layout.
  struct Grad {
    std::vector<double> gx, gy, gd;
    explicit Grad(std::size_t bins) : gx(bins + 1, 0.0), gy(bins + 1, 0.0), gd(bins + 1, 0.0) {}
  };

  // Accumulates d(g_y*y + g_ld*logderiv)/d(knots) into grad and returns the
  // cotangent with respect to x.
  double backward(double x, double g_y, double g_ld, Grad& grad) const;

  double dydx(double x) const;

  void finalize(const Grad& grad, std::span<double> param_grad) const;

 private:
  std::size_t locate(std::span<const double> knots, double v) const;

  std::size_t bins_;
  Tails tails_;
  std::vector<double> xs_, ys_, ds_;
  std::vector<double> wsoft_, hsoft_;  // softmax outputs
  std::vector<double> dsig_;           // softplus' (derivative logits)
};

// Convenience vector wrappers matching the layer API.
struct SplineResult {
  std::vector<double> y;
  std::vector<double> logderiv;
};
SplineResult spline_forward(std::span<const double> x, const RqsSpline& spline);
std::vector<double> spline_inverse(std::span<const double> y, const RqsSpline& spline);

}  // namespace tpp
