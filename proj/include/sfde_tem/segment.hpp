#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sfde {

/// Discretized history function on [-tau, 0].
///
/// Node j (j = 0..N) holds the value at theta_j = (j - N) * step, so node N is
/// the head at theta = 0. Values are stored row-major, `dim` doubles per node.
/// Segments are immutable values.
class Segment {
 public:
  Segment(std::vector<double> values, std::size_t dim, double tau, std::size_t n_steps);

  static Segment constant(std::span<const double> value, double tau, std::size_t n_steps);
  static Segment sample(const std::function<void(double, std::span<double>)>& path,
                        std::size_t dim, double tau, std::size_t n_steps);

  std::size_t dim() const { return dim_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  double tau() const { return tau_; }
  double step() const { return tau_ / static_cast<double>(n_steps_); }
  double theta(std::size_t j) const;

  std::span<const double> node(std::size_t j) const;
  std::span<const double> head() const { return node(n_steps_); }
  std::span<const double> values() const { return values_; }

  /// Piecewise-linear evaluation; returns the stored node bit-exactly when theta
  /// hits a node (within 1e-9 in units of the step). Throws DomainError outside [-tau, 0]
  /// widened by the same tolerance.
  std::vector<double> lerp_eval(double theta) const;

  /// Drops the oldest node and appends `new_head`.
  Segment shift_append(std::span<const double> new_head) const;

  bool operator==(const Segment&) const = default;

 private:
  std::vector<double> values_;
  std::size_t dim_;
  double tau_;
  std::size_t n_steps_;
};

/// Nonnegative weight on [-tau, 0] with a declared support [lo, hi].
///
/// Quadrature treats the weight as zero outside the support: a grid
/// subinterval contributes only when its midpoint lies in [lo, hi]. Inside the
/// support the weight is sampled at the nodes, so `eval` must return the
/// interior limit at the support endpoints.
class WeightFunction {
 public:
  WeightFunction(std::function<double(double)> eval, double support_lo, double support_hi);

  /// `level` on [lo, hi].
  static WeightFunction constant(double level, double support_lo, double support_hi);

  double operator()(double theta) const { return scale_ * eval_(theta); }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  bool in_support(double theta) const { return theta >= lo_ && theta <= hi_; }

  /// Level of a weight built with `constant` (after any rescaling); empty otherwise.
  std::optional<double> constant_level() const;

  WeightFunction scaled(double factor) const;

 private:
  std::function<double(double)> eval_;
  double lo_;
  double hi_;
  double scale_ = 1.0;
  std::optional<double> level_;
};

/// Composite trapezoid rule on the segment grid restricted to the support of `weight`.
double weighted_integral(const Segment& seg, const WeightFunction& weight,
                         const std::function<double(std::span<const double>)>& transform);

/// Trapezoid mass of `weight` on the (tau, n_steps) grid.
double trapezoid_mass(const WeightFunction& weight, double tau, std::size_t n_steps);

/// Rescales `weight` so its trapezoid mass on the (tau, n_steps) grid is 1.
WeightFunction normalize(const WeightFunction& weight, double tau, std::size_t n_steps);

/// Per-node quadrature coefficients c_j such that the weighted integral equals
/// sum_j c_j * h(node j). Shared by the segment quadrature and the scheme's
/// sliding-window evaluation.
std::vector<double> quadrature_coefficients(const WeightFunction& weight, double tau,
                                            std::size_t n_steps);

}  // namespace sfde
