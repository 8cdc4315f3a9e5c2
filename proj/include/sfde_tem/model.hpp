#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sfde_tem/segment.hpp"

namespace sfde {

using ScalarMap = std::function<double(double)>;
using Transform = std::function<double(std::span<const double>)>;

/// Growth bound of the coefficients' local Lipschitz constants, its inverse,
/// and the truncation parameters derived from it.
struct GammaSpec {
  ScalarMap forward;   // strictly increasing on [1, inf)
  ScalarMap inverse;   // defined on [forward(1), inf)
  double k_const = 0;  // max(forward(1), |f(0)|, |g(0)|^2)
  double lambda = 0;   // in (0, 1/2)
};

/// Inverse of an increasing `forward` by doubling from l = 1 and bisection.
/// Throws NumericalError when no bracket is found or y < forward(1).
double gamma_inverse_numeric(const ScalarMap& forward, double y);

/// Gamma^{-1}(K * step^{-lambda}). Throws ConfigError outside 0 < step <= 1 or
/// when the level falls below Gamma(1).
double truncation_radius(const GammaSpec& spec, double step);

/// Radial clip (|x| ^ radius) x/|x| with the zero vector mapped to itself.
std::vector<double> truncate(std::span<const double> x, double radius);

/// In-place radial clip; returns true when x was outside the ball.
/// Throws NumericalError on non-finite input.
bool truncate_in_place(std::span<double> x, double radius);

/// q_bar * r / (2 (p - q_bar)); requires q_bar >= 2, r > 0 and q_bar < p / (r + 1).
double rate_lambda(double q_bar, double p, double r);

/// Spot-checks monotonicity and the inverse round trip on a geometric grid of
/// [1, 1e6]; throws ConfigError on failure.
void validate_gamma(const GammaSpec& spec);

/// Declared constants of the moment, rate and stability conditions. Never verified.
struct AssumptionConstants {
  // Khasminskii-type moment condition.
  std::optional<double> p, varrho, a1, a2, a3;
  // Stability condition.
  std::optional<double> b1, b2, b3, b4;
  std::optional<WeightFunction> rho3, rho4;
  // Rate conditions.
  std::optional<double> q_bar, p_bar, a5, a6, r, mu, a4;
};

/// One distributed-delay term: integral over [-tau, 0] of transform(phi(theta)) * weight(theta).
struct DelayIntegral {
  Transform transform;
  WeightFunction weight;
};

/// Stochastic functional differential equation dx = f(x_t) dt + g(x_t) dB.
///
/// Coefficients are given either as general functionals of a Segment or in
/// distributed form f(phi) = F(phi(0), I_1(phi), ..., I_m(phi)) where each
/// I_i is a DelayIntegral. The distributed form lets the scheme update the
/// integrals with a sliding window instead of re-integrating the segment.
/// Diffusion matrices are n x d, row-major.
class SfdeModel {
 public:
  using Functional = std::function<void(const Segment&, std::span<double>)>;
  using LocalCoefficient =
      std::function<void(std::span<const double> head, std::span<const double> integrals,
                         std::span<double> out)>;
  using InitialData = std::function<void(double theta, std::span<double> out)>;
  /// Closed-form solution x(t) given B(t); used as strong-error oracle.
  using ExactSolution =
      std::function<void(double t, std::span<const double> brownian, std::span<double> out)>;

  struct DistributedForm {
    std::vector<DelayIntegral> integrals;
    LocalCoefficient drift;
    LocalCoefficient diffusion;
  };

  struct Info {
    std::string name;
    std::size_t dim_state = 1;
    std::size_t dim_noise = 1;
    double tau = 1.0;
    InitialData initial_data;
    ScalarMap gamma_forward;
    ScalarMap gamma_inverse;  // empty: numeric inverse
    double lambda = 0.25;
    std::optional<double> k_const;  // empty: computed from Gamma(1), f(0), g(0)
    AssumptionConstants constants;
    /// The delay grid size N must be a multiple of this (support boundaries on nodes).
    std::size_t grid_multiple = 1;
    ExactSolution exact_solution;
  };

  static SfdeModel distributed(Info info, DistributedForm form);
  static SfdeModel functional(Info info, Functional drift, Functional diffusion);

  const std::string& name() const { return info_.name; }
  std::size_t dim_state() const { return info_.dim_state; }
  std::size_t dim_noise() const { return info_.dim_noise; }
  double tau() const { return info_.tau; }
  std::size_t grid_multiple() const { return info_.grid_multiple; }
  const GammaSpec& gamma() const { return gamma_; }
  const AssumptionConstants& constants() const { return info_.constants; }
  const DistributedForm* distributed_form() const {
    return form_ ? &*form_ : nullptr;
  }
  const ExactSolution& exact_solution() const { return info_.exact_solution; }

  void drift(const Segment& seg, std::span<double> out) const;
  void diffusion(const Segment& seg, std::span<double> out) const;
  std::vector<double> drift(const Segment& seg) const;
  std::vector<double> diffusion(const Segment& seg) const;

  void initial_data(double theta, std::span<double> out) const;
  std::vector<double> initial_data(double theta) const;

  /// Copy with K overridden; must satisfy K >= Gamma(1).
  SfdeModel with_k_const(double k) const;
  SfdeModel with_initial_data(InitialData xi) const;

 private:
  SfdeModel(Info info, std::optional<DistributedForm> form, Functional drift, Functional diffusion);
  void finalize();

  Info info_;
  std::optional<DistributedForm> form_;
  Functional drift_;
  Functional diffusion_;
  GammaSpec gamma_;
};

/// Scalar SFDE dx = (1 + 4x - 4x^3) dt + 2 (int_{-1/2}^0 x^2(t+theta) dtheta) dB,
/// x(t) = t - 1 on [-1/2, 0]; Gamma(l) = 6 sqrt2 (1 + 4 l^2), lambda = 1/3.
SfdeModel builtin_example1();

/// Two-dimensional stable system with distributed delays over [-1/4, 0] and
/// [-1/2, 0], diagonal multiplicative noise; Gamma(l) = 4 + 18 l^2, lambda = 0.001.
/// Requires an even delay grid so -1/4 is a node.
SfdeModel builtin_example2();

/// dx = a x dt + b x dB without functional dependence; exact solution
/// x0 exp((a - b^2/2) t + b B(t)). `tau` only sets the (unused) history length.
SfdeModel builtin_gbm_oracle(double a, double b, double x0, double tau = 1.0);

struct BuiltinParams {
  double a = 1.0;
  double b = 0.5;
  double x0 = 1.0;
};

/// Registry lookup: "example1", "example2", "gbm". Throws ConfigError for unknown names.
SfdeModel make_builtin(std::string_view name, const BuiltinParams& params = {});

std::vector<std::string> builtin_names();

}  // namespace sfde
