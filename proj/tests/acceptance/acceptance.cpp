// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfde_tem/brownian.hpp"
#include "sfde_tem/cli.hpp"
#include "sfde_tem/error.hpp"
#include "sfde_tem/experiments.hpp"
#include "sfde_tem/model.hpp"
#include "sfde_tem/scheme.hpp"
#include "sfde_tem/segment.hpp"

namespace fs = std::filesystem;
using namespace sfde;

namespace {

// Tolerances.
constexpr double kSlope1Lo = 0.35, kSlope1Hi = 0.65;
constexpr double kSlope2Lo = 0.40, kSlope2Hi = 0.60;
constexpr double kAgreementSe = 3.0;
constexpr double kMinRadius3 = 10.0;
constexpr double kMomentRatio = 2.0;
constexpr double kRate5 = -1.0;
constexpr double kMeanBand5 = 0.05;
constexpr double kNegativeFraction5 = 0.95;
constexpr double kNu6 = 2.0;
constexpr double kMass7 = 1e-8;
constexpr double kFit7 = 1e-10;

// Shared settings.
constexpr std::uint64_t kSeed = 42;
constexpr std::size_t kSamples = 1000;
// The oracle criterion leaves T open; T = 1/4 keeps the gbm paths inside the truncation ball at every level.
constexpr double kOracleHorizon = 0.25;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) { return cli::format_number(v); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / "sfde_tem_acceptance";
  fs::create_directories(dir);
  return dir;
}

// Criterion 1 output is reused by criterion 7's reproducibility check.
struct ConvergenceRun {
  std::string csv_one_thread;
  std::string csv_many_threads;
  std::string summary;
};

ConvergenceRun convergence_run;

Outcome criterion1() {
  const auto dir = scratch_dir();
  auto make = [&](const fs::path& out, std::size_t threads) {
    cli::RunConfig c = cli::parse_config(
        "command = convergence\nmodel = example1\nstep_exponents = 5,6,7,8,10\nref_exponent = 14\n"
        "horizon = 10\nsamples = 1000\nseed = 42\noutput = " +
        out.string() + "\n");
    c.threads = threads;
    return c;
  };
  std::ostringstream out1, out2, err;
  const int rc1 = cli::run(make(dir / "convergence_t1.csv", 1), out1, err);
  const int rc2 = cli::run(make(dir / "convergence_t4.csv", 4), out2, err);
  if (rc1 != 0 || rc2 != 0) return {false, "run failed: " + err.str()};
  convergence_run.csv_one_thread = slurp(dir / "convergence_t1.csv");
  convergence_run.csv_many_threads = slurp(dir / "convergence_t4.csv");
  convergence_run.summary = out1.str();

  std::vector<double> steps, errors;
  std::istringstream in(convergence_run.csv_one_thread);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string a, b;
    std::getline(ls, a, ',');
    std::getline(ls, b, ',');
    steps.push_back(std::stod(a));
    errors.push_back(std::stod(b));
  }
  const double slope = fit_rate(steps, errors);
  std::ostringstream d;
  d << "slope=" << fmt(slope) << " rms=";
  for (std::size_t i = 0; i < errors.size(); ++i) d << (i ? "," : "") << fmt(errors[i]);
  return {steps.size() == 5 && slope >= kSlope1Lo && slope <= kSlope1Hi, d.str()};
}

Outcome criterion2() {
  const auto gbm = builtin_gbm_oracle(1.0, 0.5, 1.0);
  StrongErrorOptions opts;
  for (int j = 5; j <= 10; ++j) opts.steps.push_back(std::ldexp(1.0, -j));
  opts.step_ref = std::ldexp(1.0, -14);
  opts.horizon = kOracleHorizon;
  opts.samples = kSamples;
  opts.seed = kSeed;
  opts.reference = Reference::closed_form;
  const auto closed = strong_error(gbm, opts);
  opts.reference = Reference::fine_scheme;
  const auto fine = strong_error(gbm, opts);

  bool agree = true;
  double worst = 0;
  for (std::size_t i = 0; i < closed.steps.size(); ++i) {
    const double z = std::abs(closed.rms_errors[i] - fine.rms_errors[i]) / closed.std_errors[i];
    worst = std::max(worst, z);
    if (!(z <= kAgreementSe)) agree = false;
  }
  const bool slope_ok = closed.fitted_slope >= kSlope2Lo && closed.fitted_slope <= kSlope2Hi;
  std::ostringstream d;
  d << "T=" << fmt(kOracleHorizon) << " slope_closed=" << fmt(closed.fitted_slope)
    << " slope_fine=" << fmt(fine.fitted_slope) << " max_gap_in_se=" << fmt(worst);
  return {slope_ok && agree, d.str()};
}

Outcome criterion3() {
  const auto base = builtin_gbm_oracle(1.0, 0.5, 0.01);
  const auto model = base.with_k_const(5.0);
  const double step = std::ldexp(1.0, -6);
  const SchemeConfig tem{step, 1.0, Variant::truncated_em};
  const SchemeConfig em{step, 1.0, Variant::classic_em};
  const double radius = resolve_grid(model, tem).radius;
  std::size_t identical = 0;
  std::size_t hits = 0;
  std::mt19937_64 pick(kSeed);
  for (int r = 0; r < 100; ++r) {
    const std::uint64_t replica = pick();
    const auto grid = BrownianGrid::generate(kSeed, replica, 1, step, 1.0);
    const auto a = simulate(model, tem, grid);
    const auto b = simulate(model, em, grid);
    hits += a.truncation_hits;
    if (a.states == b.states && a.times == b.times) ++identical;
  }
  std::ostringstream d;
  d << "radius=" << fmt(radius) << " identical=" << identical << "/100 truncation_hits=" << hits;
  return {radius >= kMinRadius3 && identical == 100, d.str()};
}

Outcome criterion4() {
  const auto ex1 = builtin_example1();
  std::vector<double> maxima;
  std::size_t diverged = 0;
  for (int j : {5, 6, 7}) {
    MomentOptions opts;
    opts.scheme = {std::ldexp(1.0, -j), 10.0, Variant::truncated_em};
    opts.p = 8.0;
    opts.samples = kSamples;
    opts.seed = kSeed;
    const auto rep = moment_estimate(ex1, opts);
    maxima.push_back(rep.running_max.back());
    diverged += rep.diverged;
  }
  const double hi = *std::max_element(maxima.begin(), maxima.end());
  const double lo = *std::min_element(maxima.begin(), maxima.end());
  const bool finite = std::all_of(maxima.begin(), maxima.end(), [](double v) { return std::isfinite(v); });
  std::ostringstream d;
  d << "running_max=" << fmt(maxima[0]) << "," << fmt(maxima[1]) << "," << fmt(maxima[2])
    << " ratio=" << fmt(hi / lo);
  return {finite && diverged == 0 && lo > 0 && hi / lo <= kMomentRatio, d.str()};
}

Outcome criterion5() {
  const auto ex2 = builtin_example2();
  StabilityOptions opts;
  opts.scheme = {std::ldexp(1.0, -6), 10.0, Variant::truncated_em};
  opts.p = 2.0;
  opts.samples = kSamples;
  opts.seed = kSeed;
  opts.tail_fraction = 0.6;
  const auto rep = stability_decay(ex2, opts);
  const auto mean = rep.mean_at(rep.times.size() - 1);
  const bool mean_ok = std::all_of(mean.begin(), mean.end(), [](double m) { return std::abs(m) <= kMeanBand5; });
  const double frac = rep.negative_rate_fraction();
  std::ostringstream d;
  d << "moment_rate=" << fmt(rep.moment_rate) << " mean_T=" << fmt(mean[0]) << "," << fmt(mean[1])
    << " negative_fraction=" << fmt(frac);
  return {rep.moment_rate <= kRate5 && mean_ok && frac >= kNegativeFraction5 && rep.diverged == 0, d.str()};
}

Outcome criterion6() {
  const double b1 = 11.0 / 4, b2 = 1.0 / 4, b3 = 15.0 / 4, b4 = 3.0 / 4, p = 2, tau = 0.5;
  const double nu = admissible_nu(b1, b2, b3, b4, p, tau);
  const double first = p / 2 * (b1 - b2 * std::exp(nu * tau)) - nu;
  const double second = b3 - b4 * std::exp(nu * tau);
  std::ostringstream d;
  d << "nu=" << fmt(nu) << " first=" << fmt(first) << " second=" << fmt(second);
  return {nu >= kNu6 && first >= 0 && second >= 0, d.str()};
}

// Each invariant returns the number of violations found.
struct Invariant {
  const char* name;
  std::function<std::size_t()> check;
};

double norm(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

Outcome criterion7() {
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::vector<Invariant> invariants{
      {"truncation",
       [&] {
         std::size_t bad = 0;
         for (int t = 0; t < 10000; ++t) {
           std::vector<double> x(1 + t % 5);
           const double scale = std::exp(4 * normal(rng));
           for (auto& v : x) v = scale * normal(rng);
           const double r = 0.01 + 10 * unif(rng);
           const auto y = truncate(x, r);
           if (truncate(y, r) != y) ++bad;
           if (std::abs(norm(y) - std::min(norm(x), r)) > 1e-12 * std::max(1.0, r)) ++bad;
           if (norm(x) <= r && y != x) ++bad;
         }
         return bad;
       }},
      {"origin",
       [&] {
         std::size_t bad = 0;
         for (std::size_t n = 1; n <= 6; ++n) {
           const std::vector<double> z(n, 0.0);
           for (double r : {1e-300, 1e-3, 1.0, 1e300}) {
             if (truncate(z, r) != z) ++bad;
           }
         }
         return bad;
       }},
      {"interpolation",
       [&] {
         std::size_t bad = 0;
         for (int t = 0; t < 500; ++t) {
           const std::size_t n = 1 + t % 40;
           const double tau = 0.05 + 3 * unif(rng);
           std::vector<double> v(n + 1);
           for (auto& x : v) x = normal(rng);
           const Segment s(v, 1, tau, n);
           for (std::size_t j = 0; j <= n; ++j) {
             if (s.lerp_eval(-tau + static_cast<double>(j) * s.step())[0] != v[j]) ++bad;
           }
           for (int q = 0; q < 20; ++q) {
             const double th = -tau * unif(rng);
             auto j = static_cast<std::size_t>(std::floor((th + tau) / s.step()));
             j = std::min(j, n - 1);
             const double val = s.lerp_eval(th)[0];
             if (val < std::min(v[j], v[j + 1]) - 1e-14 || val > std::max(v[j], v[j + 1]) + 1e-14) ++bad;
           }
         }
         return bad;
       }},
      {"shift_append",
       [&] {
         std::size_t bad = 0;
         for (int t = 0; t < 200; ++t) {
           const std::size_t n = 1 + t % 20;
           const std::size_t dim = 1 + t % 3;
           std::vector<double> v(dim * (n + 1));
           for (auto& x : v) x = normal(rng);
           Segment s(v, dim, 0.5, n);
           std::vector<double> head(dim);
           for (auto& x : head) x = normal(rng);
           const Segment u = s.shift_append(head);
           if (u.n_nodes() != n + 1 || u.dim() != dim) ++bad;
           if (!std::equal(u.values().begin(), u.values().end() - static_cast<std::ptrdiff_t>(dim),
                           v.begin() + static_cast<std::ptrdiff_t>(dim))) {
             ++bad;
           }
           if (u.lerp_eval(0.0) != head) ++bad;
         }
         return bad;
       }},
      {"coarsen",
       [&] {
         std::size_t bad = 0;
         const auto g = BrownianGrid::generate(5, 3, 2, std::ldexp(1.0, -14), 1.0);
         const std::vector<std::size_t> dyadic{1, 2, 4, 8, 32, 128};
         for (std::size_t a : dyadic) {
           for (std::size_t b : dyadic) {
             if (coarsen(g, a * b) != coarsen(coarsen(g, a), 2, b)) ++bad;
           }
         }
         std::uniform_int_distribution<int> small(-50, 50);
         for (std::size_t factor : {2u, 3u, 6u, 16u}) {
           std::vector<double> inc(factor * 11 * 2);
           for (auto& x : inc) x = small(rng);
           const auto c = coarsen(inc, 2, factor);
           for (std::size_t k = 0; k < 11; ++k) {
             for (std::size_t i = 0; i < 2; ++i) {
               double s = 0;
               for (std::size_t j = 0; j < factor; ++j) s += inc[(k * factor + j) * 2 + i];
               if (c[k * 2 + i] != s) ++bad;
             }
           }
         }
         return bad;
       }},
      {"normalization",
       [&] {
         std::size_t bad = 0;
         for (int t = 0; t < 300; ++t) {
           const double tau = 0.05 + 2 * unif(rng);
           const std::size_t n = 1 + static_cast<std::size_t>(500 * unif(rng));
           const double a = unif(rng), b = 3 * unif(rng), c = 5 * unif(rng);
           const WeightFunction w([=](double th) { return a + b * th * th + c * std::exp(th); }, -tau, 0.0);
           if (std::abs(trapezoid_mass(normalize(w, tau, n), tau, n) - 1.0) > kMass7) ++bad;
         }
         for (std::size_t n = 2; n <= 256; n += 2) {
           const auto ind = normalize(WeightFunction::constant(1.0, -0.25, 0.0), 0.5, n);
           if (std::abs(trapezoid_mass(ind, 0.5, n) - 1.0) > kMass7) ++bad;
         }
         return bad;
       }},
      {"lyapunov_functional",
       [&] {
         std::size_t bad = 0;
         const Segment zero = Segment::constant(std::vector<double>{0.0, 0.0}, 0.5, 16);
         if (phi_diagnostic(zero, 0.5) != 1.0) ++bad;
         for (int t = 0; t < 500; ++t) {
           const std::size_t n = 1 + t % 30;
           std::vector<double> v(2 * (n + 1));
           for (auto& x : v) x = 5 * normal(rng);
           const Segment s(v, 2, 0.1 + unif(rng), n);
           const double eps = 0.001 + 0.998 * unif(rng);
           const double phi = phi_diagnostic(s, eps);
           const double head = norm(s.head());
           if (!(phi >= 1.0) || phi < 1.0 + (1.0 - eps) * head * head - 1e-12 * phi) ++bad;
         }
         return bad;
       }},
      {"fit_rate",
       [&] {
         std::size_t bad = 0;
         for (int t = 0; t < 200; ++t) {
           const double slope = -2 + 4 * unif(rng);
           const double c = std::exp(4 * normal(rng));
           std::vector<double> steps, errors;
           const std::size_t levels = 2 + t % 8;
           for (std::size_t l = 0; l < levels; ++l) {
             const double h = std::ldexp(1.0, -static_cast<int>(3 + l + (t % 3) * l));
             steps.push_back(h);
             errors.push_back(c * std::pow(h, slope));
           }
           if (std::abs(fit_rate(steps, errors) - slope) > kFit7) ++bad;
         }
         return bad;
       }},
      {"csv_reproducibility",
       [&] {
         const bool ok = !convergence_run.csv_one_thread.empty() &&
                         convergence_run.csv_one_thread == convergence_run.csv_many_threads;
         return ok ? std::size_t{0} : std::size_t{1};
       }},
  };

  bool pass = true;
  std::ostringstream d;
  for (const auto& inv : invariants) {
    std::size_t bad = 0;
    try {
      bad = inv.check();
    } catch (const std::exception& e) {
      bad = 1;
      d << inv.name << " threw '" << e.what() << "' ";
    }
    if (bad != 0) pass = false;
    d << inv.name << "=" << (bad == 0 ? "ok" : std::to_string(bad) + " violations") << " ";
  }
  std::string detail = d.str();
  if (!detail.empty()) detail.pop_back();
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}};
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ", "
              << std::fixed;
    std::cout.precision(1);
    std::cout << secs << "s)" << std::defaultfloat << std::endl;
    std::cout.precision(6);
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
