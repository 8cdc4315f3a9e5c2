#include "sfde_tem/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sfde_tem/brownian.hpp"
#include "sfde_tem/error.hpp"
#include "sfde_tem/parallel.hpp"

namespace sfde {

namespace {

constexpr double kLogFloor = 1e-300;
constexpr std::size_t kMinSamples = 100;
constexpr std::size_t kChunk = 64;

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw NumericalError("regression: abscissae are all equal");
  return sxy / sxx;
}

void require_samples(std::size_t samples, const char* what) {
  if (samples < kMinSamples) {
    throw ConfigError(std::string(what) + ": samples must be >= " + std::to_string(kMinSamples));
  }
}

// Computes replicas in parallel chunks and hands each result to `consume` in
// replica order, so reductions are identical for every thread count.
template <typename Result, typename Compute, typename Consume>
void for_each_replica(std::size_t samples, std::size_t threads, Compute compute, Consume consume) {
  std::vector<Result> chunk;
  for (std::size_t begin = 0; begin < samples; begin += kChunk) {
    const std::size_t size = std::min(kChunk, samples - begin);
    chunk.assign(size, Result{});
    parallel_for(
        size,
        [&](std::size_t i) {
          try {
            chunk[i] = compute(begin + i);
          } catch (const NumericalError& e) {
            throw NumericalError("replica " + std::to_string(begin + i) + ": " + e.what());
          }
        },
        threads);
    for (std::size_t i = 0; i < size; ++i) consume(begin + i, std::move(chunk[i]));
  }
}

std::vector<double> all_states(const SfdeModel& model, const SchemeConfig& config,
                               std::uint64_t seed, std::uint64_t replica, bool* diverged) {
  const ResolvedGrid grid = resolve_grid(model, config);
  const auto noise = BrownianGrid::generate(seed, replica, model.dim_noise(), grid.step,
                                            static_cast<double>(grid.total_steps) * grid.step);
  PathRecord rec = simulate(model, config, noise.increments());
  *diverged = rec.diverged;
  return std::move(rec.states);
}

}  // namespace

double fit_rate(std::span<const double> steps, std::span<const double> errors) {
  if (steps.size() != errors.size()) throw NumericalError("fit_rate: length mismatch");
  if (steps.size() < 2) throw NumericalError("fit_rate: need at least two points");
  std::vector<double> lx(steps.size());
  std::vector<double> ly(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(errors[i] > 0.0) || !std::isfinite(errors[i]) || !(steps[i] > 0.0)) {
      throw NumericalError("fit_rate: degenerate point (step=" + std::to_string(steps[i]) +
                           ", error=" + std::to_string(errors[i]) + ")");
    }
    lx[i] = std::log(steps[i]);
    ly[i] = std::log(errors[i]);
  }
  return ols_slope(lx, ly);
}

double fit_rate(const ErrorTable& table) { return fit_rate(table.steps, table.rms_errors); }

ErrorTable strong_error(const SfdeModel& model, const StrongErrorOptions& options) {
  require_samples(options.samples, "strong_error");
  if (options.steps.empty()) throw ConfigError("strong_error: no step sizes given");
  const bool closed = options.reference == Reference::closed_form;
  if (closed && !model.exact_solution()) {
    throw ConfigError("strong_error: model " + model.name() + " has no closed-form solution");
  }

  std::vector<double> steps = options.steps;
  std::sort(steps.begin(), steps.end(), std::greater<>());
  if (std::adjacent_find(steps.begin(), steps.end()) != steps.end()) {
    throw ConfigError("strong_error: duplicate step sizes");
  }
  const SchemeConfig ref_config{options.step_ref, options.horizon, options.variant};
  const ResolvedGrid ref_grid = resolve_grid(model, ref_config);

  // Factors relative to the fine grid, finest level first for incremental coarsening.
  std::vector<std::size_t> factors(steps.size());
  std::vector<SchemeConfig> configs(steps.size());
  for (std::size_t l = 0; l < steps.size(); ++l) {
    factors[l] = integral_ratio(steps[l], ref_grid.step, "strong_error step/reference step");
    if ((factors[l] & (factors[l] - 1)) != 0 || (!closed && factors[l] == 1)) {
      throw ConfigError("strong_error: step " + std::to_string(steps[l]) +
                        " must be the reference step times 2^j with j >= 1");
    }
    configs[l] = SchemeConfig{steps[l], options.horizon, options.variant};
    resolve_grid(model, configs[l]);
  }

  const std::size_t levels = steps.size();
  const std::size_t n = model.dim_state();
  const std::size_t d = model.dim_noise();
  const double horizon = static_cast<double>(ref_grid.total_steps) * ref_grid.step;

  auto compute = [&](std::size_t replica) {
    const auto grid = BrownianGrid::generate(options.seed, replica, d, ref_grid.step, horizon);
    std::vector<double> reference(n);
    if (closed) {
      model.exact_solution()(horizon, grid.brownian_at(grid.size()), reference);
    } else {
      const auto rec = simulate(model, ref_config, grid.increments(),
                                RecordOptions{.stride = ref_grid.total_steps});
      const auto y = rec.terminal();
      reference.assign(y.begin(), y.end());
    }
    std::vector<double> sq(levels);
    std::vector<double> current(grid.increments().begin(), grid.increments().end());
    std::size_t current_factor = 1;
    for (std::size_t l = levels; l-- > 0;) {
      current = coarsen(current, d, factors[l] / current_factor);
      current_factor = factors[l];
      const auto rec = simulate(model, configs[l], current, RecordOptions{.stride = current.size() / d});
      const auto y = rec.terminal();
      double e = 0.0;
      for (std::size_t i = 0; i < n; ++i) e += (y[i] - reference[i]) * (y[i] - reference[i]);
      sq[l] = rec.diverged ? std::numeric_limits<double>::infinity() : e;
    }
    return sq;
  };

  std::vector<double> all(options.samples * levels);
  for_each_replica<std::vector<double>>(
      options.samples, options.threads, compute, [&](std::size_t replica, std::vector<double> sq) {
        std::copy(sq.begin(), sq.end(), all.begin() + static_cast<std::ptrdiff_t>(replica * levels));
      });

  ErrorTable table;
  table.steps = steps;
  table.samples = options.samples;
  const double m = static_cast<double>(options.samples);
  for (std::size_t l = 0; l < levels; ++l) {
    double mean = 0.0;
    for (std::size_t r = 0; r < options.samples; ++r) mean += all[r * levels + l];
    mean /= m;
    double var = 0.0;
    for (std::size_t r = 0; r < options.samples; ++r) {
      const double dev = all[r * levels + l] - mean;
      var += dev * dev;
    }
    var /= (m - 1.0);
    const double rms = std::sqrt(mean);
    table.rms_errors.push_back(rms);
    table.std_errors.push_back(rms > 0.0 ? std::sqrt(var / m) / (2.0 * rms) : 0.0);
  }
  const bool usable = levels >= 2 && std::all_of(table.rms_errors.begin(), table.rms_errors.end(),
                                                 [](double e) { return e > 0.0 && std::isfinite(e); });
  if (usable) {
    table.fitted_slope = fit_rate(table);
  } else {
    table.degenerate = true;
    table.fitted_slope = std::numeric_limits<double>::quiet_NaN();
  }
  return table;
}

MomentReport moment_estimate(const SfdeModel& model, const MomentOptions& options) {
  require_samples(options.samples, "moment_estimate");
  if (!(options.p >= 2.0)) throw ConfigError("moment_estimate: p must be >= 2");
  const ResolvedGrid grid = resolve_grid(model, options.scheme);
  const std::size_t n = model.dim_state();
  const std::size_t points = grid.total_steps + 1;

  struct Replica {
    std::vector<double> powers;
    bool diverged = false;
  };
  std::vector<double> sums(points, 0.0);
  MomentReport report;
  report.samples = options.samples;
  std::size_t used = 0;
  for_each_replica<Replica>(
      options.samples, options.threads,
      [&](std::size_t replica) {
        Replica out;
        const auto states = all_states(model, options.scheme, options.seed, replica, &out.diverged);
        if (out.diverged) {
          if (options.scheme.variant == Variant::truncated_em) {
            throw NumericalError("truncated_em replica diverged");
          }
          return out;
        }
        out.powers.resize(points);
        for (std::size_t k = 0; k < points; ++k) {
          out.powers[k] = std::pow(squared_norm({states.data() + k * n, n}), 0.5 * options.p);
        }
        return out;
      },
      [&](std::size_t, Replica r) {
        if (r.diverged) {
          ++report.diverged;
          return;
        }
        ++used;
        for (std::size_t k = 0; k < points; ++k) sums[k] += r.powers[k];
      });

  if (used == 0) {
    report.max_moment = std::numeric_limits<double>::infinity();
    return report;
  }
  const std::size_t every = std::max<std::size_t>(1, options.report_every);
  double running = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double estimate = sums[k] / static_cast<double>(used);
    running = std::max(running, estimate);
    if (k % every == 0 || k + 1 == points) {
      report.times.push_back(static_cast<double>(k) * grid.step);
      report.moments.push_back(estimate);
      report.running_max.push_back(running);
    }
  }
  report.max_moment = running;
  return report;
}

double StabilityReport::negative_rate_fraction() const {
  if (pathwise_rates.empty()) return 0.0;
  const auto negative = std::count_if(pathwise_rates.begin(), pathwise_rates.end(),
                                      [](double r) { return r < 0.0; });
  return static_cast<double>(negative) / static_cast<double>(pathwise_rates.size());
}

StabilityReport stability_decay(const SfdeModel& model, const StabilityOptions& options) {
  require_samples(options.samples, "stability_decay");
  if (!(options.p >= 2.0)) throw ConfigError("stability_decay: p must be >= 2");
  if (!(options.tail_fraction > 0.0 && options.tail_fraction <= 1.0)) {
    throw ConfigError("stability_decay: tail_fraction must lie in (0, 1]");
  }
  const ResolvedGrid grid = resolve_grid(model, options.scheme);
  const std::size_t n = model.dim_state();
  const std::size_t points = grid.total_steps + 1;
  const double horizon = static_cast<double>(grid.total_steps) * grid.step;

  struct Replica {
    std::vector<double> states;
    bool diverged = false;
  };
  std::vector<double> moment_sums(points, 0.0);
  std::vector<double> mean_sums(points * n, 0.0);
  StabilityReport report;
  report.dim = n;
  std::size_t used = 0;
  for_each_replica<Replica>(
      options.samples, options.threads,
      [&](std::size_t replica) {
        Replica out;
        out.states = all_states(model, options.scheme, options.seed, replica, &out.diverged);
        if (out.diverged && options.scheme.variant == Variant::truncated_em) {
          throw NumericalError("truncated_em replica diverged");
        }
        return out;
      },
      [&](std::size_t, Replica r) {
        if (r.diverged) {
          ++report.diverged;
          return;
        }
        ++used;
        for (std::size_t k = 0; k < points; ++k) {
          const std::span<const double> y(r.states.data() + k * n, n);
          moment_sums[k] += std::pow(squared_norm(y), 0.5 * options.p);
          for (std::size_t i = 0; i < n; ++i) mean_sums[k * n + i] += y[i];
        }
        const double terminal = std::sqrt(squared_norm({r.states.data() + (points - 1) * n, n}));
        if (terminal < kLogFloor) report.clamped = true;
        report.pathwise_rates.push_back(std::log(std::max(terminal, kLogFloor)) / horizon);
      });
  if (used == 0) throw NumericalError("stability_decay: every replica diverged");

  const std::size_t every = std::max<std::size_t>(1, options.report_every);
  const double tail_start = (1.0 - options.tail_fraction) * horizon;
  std::vector<double> fit_t;
  std::vector<double> fit_log;
  for (std::size_t k = 0; k < points; ++k) {
    if (k % every != 0 && k + 1 != points) continue;
    const double t = static_cast<double>(k) * grid.step;
    const double estimate = moment_sums[k] / static_cast<double>(used);
    const bool clamp = estimate < kLogFloor;
    report.clamped = report.clamped || clamp;
    const double logm = std::log(std::max(estimate, kLogFloor));
    report.times.push_back(t);
    report.log_moment.push_back(logm);
    for (std::size_t i = 0; i < n; ++i) {
      report.sample_mean.push_back(mean_sums[k * n + i] / static_cast<double>(used));
    }
    if (t >= tail_start - 1e-12 && !clamp) {
      fit_t.push_back(t);
      fit_log.push_back(logm);
    }
  }
  if (fit_t.size() < 2) throw NumericalError("stability_decay: fewer than two unclamped tail points");
  report.moment_rate = ols_slope(fit_t, fit_log);
  return report;
}

namespace {

// Largest x in [0, hi] with g(x) >= 0 for decreasing g with g(0) > 0.
template <typename F>
double last_nonnegative(F g, double hi) {
  double lo = 0.0;
  if (g(hi) >= 0.0) return hi;
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (g(mid) >= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

double admissible_nu(double b1, double b2, double b3, double b4, double p, double tau) {
  if (!(b2 >= 0.0 && b1 > b2 && b4 >= 0.0 && b3 > b4)) {
    throw DomainError("admissible_nu: requires b1 > b2 >= 0 and b3 > b4 >= 0");
  }
  if (!(p >= 2.0) || !(tau > 0.0)) throw DomainError("admissible_nu: requires p >= 2 and tau > 0");

  auto moment = [&](double nu) { return 0.5 * p * (b1 - b2 * std::exp(nu * tau)) - nu; };
  auto growth = [&](double nu) { return b3 - b4 * std::exp(nu * tau); };

  // The first constraint fails beyond p*b1/2 whatever b2 is.
  const double nu_moment = last_nonnegative(moment, 0.5 * p * b1);
  double nu_growth = std::numeric_limits<double>::infinity();
  if (b4 > 0.0) {
    double hi = 1.0;
    while (growth(hi) >= 0.0) hi *= 2.0;
    nu_growth = last_nonnegative(growth, hi);
  }
  return std::min(nu_moment, nu_growth);
}

double phi_diagnostic(const Segment& seg, double epsilon0) {
  if (!(epsilon0 > 0.0 && epsilon0 < 1.0)) throw DomainError("phi_diagnostic: epsilon0 outside (0, 1)");
  const double tau = seg.tau();
  const auto weight = WeightFunction::constant(1.0 / tau, -tau, 0.0);
  const double mean_square =
      weighted_integral(seg, weight, [](std::span<const double> x) { return squared_norm(x); });
  return 1.0 + (1.0 - epsilon0) * squared_norm(seg.head()) + epsilon0 * mean_square;
}

}  // namespace sfde
