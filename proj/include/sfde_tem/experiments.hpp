#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sfde_tem/model.hpp"
#include "sfde_tem/scheme.hpp"
#include "sfde_tem/segment.hpp"

namespace sfde {

// ---------------------------------------------------------------------------
// Strong convergence
// ---------------------------------------------------------------------------

enum class Reference {
  fine_scheme,  // the scheme itself at step_ref on the same Brownian path
  closed_form,  // model.exact_solution() evaluated at B(T) of the same path
};

struct StrongErrorOptions {
  std::vector<double> steps;  // each step_ref * 2^j, any order
  double step_ref = 0x1.0p-14;
  double horizon = 10.0;
  std::size_t samples = 1000;
  std::uint64_t seed = 42;
  Reference reference = Reference::fine_scheme;
  Variant variant = Variant::truncated_em;
  std::size_t threads = 0;
};

struct ErrorTable {
  std::vector<double> steps;  // strictly decreasing
  std::vector<double> rms_errors;
  std::vector<double> std_errors;  // delta-method standard error of each RMS estimate
  double fitted_slope = 0.0;       // NaN when degenerate
  bool degenerate = false;         // some RMS error is zero: no log-log fit
  std::size_t samples = 0;
};

/// RMS terminal error (E|x(T) - Y_step(T)|^2)^{1/2} per step, coupled through
/// one fine Brownian path per replica, plus the fitted log-log slope.
ErrorTable strong_error(const SfdeModel& model, const StrongErrorOptions& options);

/// Least-squares slope of log(error) against log(step). Throws NumericalError
/// with fewer than two points or any non-positive error.
double fit_rate(std::span<const double> steps, std::span<const double> errors);
double fit_rate(const ErrorTable& table);

// ---------------------------------------------------------------------------
// Moment bound
// ---------------------------------------------------------------------------

struct MomentOptions {
  SchemeConfig scheme;
  double p = 2.0;
  std::size_t samples = 1000;
  std::uint64_t seed = 42;
  std::size_t report_every = 1;  // in scheme steps
  std::size_t threads = 0;
};

struct MomentReport {
  std::vector<double> times;
  std::vector<double> moments;      // Monte Carlo estimate of E|Y(t)|^p at each reported time
  std::vector<double> running_max;  // max of the estimate over all steps up to that time
  double max_moment = 0.0;
  std::size_t diverged = 0;         // classic_em replicas excluded from the estimate
  std::size_t samples = 0;
};

MomentReport moment_estimate(const SfdeModel& model, const MomentOptions& options);

// ---------------------------------------------------------------------------
// Exponential stability
// ---------------------------------------------------------------------------

struct StabilityOptions {
  SchemeConfig scheme;
  double p = 2.0;
  std::size_t samples = 1000;
  std::uint64_t seed = 42;
  double tail_fraction = 0.6;
  std::size_t report_every = 1;
  std::size_t threads = 0;
};

struct StabilityReport {
  std::size_t dim = 0;
  std::vector<double> times;
  std::vector<double> log_moment;      // log of the E|Y(t)|^p estimate, clamped below at log(1e-300)
  std::vector<double> sample_mean;     // dim entries per reported time
  std::vector<double> pathwise_rates;  // (1/T) log|Y(T)| per replica
  double moment_rate = 0.0;            // slope of log_moment on the tail window
  bool clamped = false;
  std::size_t diverged = 0;

  std::span<const double> mean_at(std::size_t i) const { return {sample_mean.data() + i * dim, dim}; }
  double negative_rate_fraction() const;
};

StabilityReport stability_decay(const SfdeModel& model, const StabilityOptions& options);

/// Largest nu with (p/2)(b1 - b2 e^{nu tau}) - nu >= 0 and b3 - b4 e^{nu tau} >= 0,
/// bisected to 1e-9. Throws DomainError unless b1 > b2 >= 0, b3 > b4 >= 0, p >= 2, tau > 0.
double admissible_nu(double b1, double b2, double b3, double b4, double p, double tau);

/// 1 + (1 - eps0)|phi(0)|^2 + (eps0 / tau) int |phi(theta)|^2 dtheta.
double phi_diagnostic(const Segment& seg, double epsilon0);

}  // namespace sfde
