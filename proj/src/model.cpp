#include "sfde_tem/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sfde_tem/error.hpp"

namespace sfde {

namespace {

double euclidean_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double gamma_inverse_numeric(const ScalarMap& forward, double y) {
  const double tol = 1e-10 * std::max(1.0, std::abs(y));
  const double at_one = forward(1.0);
  if (std::abs(at_one - y) <= tol) return 1.0;
  if (!(y > at_one)) {
    throw NumericalError("gamma inverse: y=" + std::to_string(y) + " below Gamma(1)=" +
                         std::to_string(at_one));
  }
  double lo = 1.0;
  double hi = 2.0;
  bool bracketed = false;
  for (int i = 0; i < 1023; ++i) {
    if (forward(hi) >= y) {
      bracketed = true;
      break;
    }
    lo = hi;
    hi *= 2.0;
  }
  if (!bracketed) {
    throw NumericalError("gamma inverse: Gamma does not reach y=" + std::to_string(y));
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = forward(mid);
    if (std::abs(fm - y) <= tol) return mid;
    if (mid == lo || mid == hi) break;
    (fm < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double truncation_radius(const GammaSpec& spec, double step) {
  if (!(step > 0.0 && step <= 1.0)) {
    throw ConfigError("truncation radius: step " + std::to_string(step) + " outside (0, 1]");
  }
  const double level = spec.k_const * std::pow(step, -spec.lambda);
  const double floor = spec.forward(1.0);
  if (level < floor) {
    throw ConfigError("truncation radius: level K*step^-lambda=" + std::to_string(level) +
                      " below Gamma(1)=" + std::to_string(floor));
  }
  return spec.inverse(level);
}

bool truncate_in_place(std::span<double> x, double radius) {
  const double norm = euclidean_norm(x);
  if (!std::isfinite(norm)) throw NumericalError("truncate: non-finite input");
  if (norm <= radius) return false;
  double scale = radius / norm;
  std::vector<double> scaled(x.size());
  for (;;) {
    for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = x[i] * scale;
    if (euclidean_norm(scaled) <= radius) break;
    scale = std::nextafter(scale, 0.0);
  }
  std::copy(scaled.begin(), scaled.end(), x.begin());
  return true;
}

std::vector<double> truncate(std::span<const double> x, double radius) {
  if (!(radius > 0.0)) throw DomainError("truncate: radius must be positive");
  std::vector<double> out(x.begin(), x.end());
  truncate_in_place(out, radius);
  return out;
}

double rate_lambda(double q_bar, double p, double r) {
  if (!(q_bar >= 2.0) || !(r > 0.0)) {
    throw DomainError("rate_lambda: requires q_bar >= 2 and r > 0");
  }
  if (!(q_bar < p / (r + 1.0))) {
    throw DomainError("rate_lambda: q_bar=" + std::to_string(q_bar) + " must be below p/(r+1)=" +
                      std::to_string(p / (r + 1.0)));
  }
  return q_bar * r / (2.0 * (p - q_bar));
}

void validate_gamma(const GammaSpec& spec) {
  if (!spec.forward || !spec.inverse) throw ConfigError("gamma: forward and inverse are required");
  if (!(spec.lambda > 0.0 && spec.lambda < 0.5)) {
    throw ConfigError("gamma: lambda=" + std::to_string(spec.lambda) + " outside (0, 1/2)");
  }
  if (!(spec.k_const >= spec.forward(1.0))) {
    throw ConfigError("gamma: K=" + std::to_string(spec.k_const) + " below Gamma(1)");
  }
  double prev_l = 0.0;
  double prev_g = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double l = i == 20 ? 1e6 : std::ldexp(1.0, i);
    const double g = spec.forward(l);
    if (i > 0 && !(g > prev_g)) {
      throw ConfigError("gamma: not strictly increasing between l=" + std::to_string(prev_l) +
                        " and l=" + std::to_string(l));
    }
    const double back = spec.inverse(g);
    if (!(std::abs(back - l) <= 1e-9 * std::max(1.0, l))) {
      throw ConfigError("gamma: inverse round trip failed at l=" + std::to_string(l));
    }
    prev_l = l;
    prev_g = g;
  }
}

SfdeModel::SfdeModel(Info info, std::optional<DistributedForm> form, Functional drift,
                     Functional diffusion)
    : info_(std::move(info)),
      form_(std::move(form)),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)) {
  finalize();
}

SfdeModel SfdeModel::distributed(Info info, DistributedForm form) {
  if (!form.drift || !form.diffusion) throw ConfigError("model: distributed form needs drift and diffusion");
  return SfdeModel(std::move(info), std::move(form), {}, {});
}

SfdeModel SfdeModel::functional(Info info, Functional drift, Functional diffusion) {
  if (!drift || !diffusion) throw ConfigError("model: drift and diffusion functionals are required");
  return SfdeModel(std::move(info), std::nullopt, std::move(drift), std::move(diffusion));
}

void SfdeModel::finalize() {
  if (info_.dim_state == 0 || info_.dim_noise == 0) throw ConfigError("model: dimensions must be >= 1");
  if (!(info_.tau > 0.0)) throw ConfigError("model: tau must be positive");
  if (info_.grid_multiple == 0) throw ConfigError("model: grid_multiple must be >= 1");
  if (!info_.initial_data) throw ConfigError("model: initial data is required");
  if (!info_.gamma_forward) throw ConfigError("model: Gamma is required");

  if (form_) {
    // Functional view of the distributed form, used by single-segment evaluation.
    auto integrals = [form = *form_](const Segment& seg) {
      std::vector<double> values;
      values.reserve(form.integrals.size());
      for (const auto& term : form.integrals) {
        values.push_back(weighted_integral(seg, term.weight, term.transform));
      }
      return values;
    };
    drift_ = [integrals, local = form_->drift](const Segment& seg, std::span<double> out) {
      const auto values = integrals(seg);
      local(seg.head(), values, out);
    };
    diffusion_ = [integrals, local = form_->diffusion](const Segment& seg, std::span<double> out) {
      const auto values = integrals(seg);
      local(seg.head(), values, out);
    };
  }

  gamma_.forward = info_.gamma_forward;
  gamma_.lambda = info_.lambda;
  if (info_.gamma_inverse) {
    gamma_.inverse = info_.gamma_inverse;
  } else {
    gamma_.inverse = [fwd = info_.gamma_forward](double y) { return gamma_inverse_numeric(fwd, y); };
  }

  if (info_.k_const) {
    gamma_.k_const = *info_.k_const;
  } else {
    const std::vector<double> zero(info_.dim_state, 0.0);
    const auto seg = Segment::constant(zero, info_.tau, info_.grid_multiple);
    const double f0 = euclidean_norm(drift(seg));
    const double g0 = euclidean_norm(diffusion(seg));  // Frobenius norm
    gamma_.k_const = std::max({gamma_.forward(1.0), f0, g0 * g0});
  }
  validate_gamma(gamma_);
}

void SfdeModel::drift(const Segment& seg, std::span<double> out) const {
  if (seg.dim() != info_.dim_state || out.size() != info_.dim_state) {
    throw DomainError("model " + info_.name + ": drift dimension mismatch");
  }
  drift_(seg, out);
}

void SfdeModel::diffusion(const Segment& seg, std::span<double> out) const {
  if (seg.dim() != info_.dim_state || out.size() != info_.dim_state * info_.dim_noise) {
    throw DomainError("model " + info_.name + ": diffusion dimension mismatch");
  }
  diffusion_(seg, out);
}

std::vector<double> SfdeModel::drift(const Segment& seg) const {
  std::vector<double> out(info_.dim_state);
  drift(seg, out);
  return out;
}

std::vector<double> SfdeModel::diffusion(const Segment& seg) const {
  std::vector<double> out(info_.dim_state * info_.dim_noise);
  diffusion(seg, out);
  return out;
}

void SfdeModel::initial_data(double theta, std::span<double> out) const {
  if (!(theta >= -info_.tau && theta <= 0.0)) {
    throw DomainError("model " + info_.name + ": initial data queried at theta=" +
                      std::to_string(theta));
  }
  info_.initial_data(theta, out);
  for (double v : out) {
    if (!std::isfinite(v)) throw NumericalError("model " + info_.name + ": non-finite initial data");
  }
}

std::vector<double> SfdeModel::initial_data(double theta) const {
  std::vector<double> out(info_.dim_state);
  initial_data(theta, out);
  return out;
}

SfdeModel SfdeModel::with_k_const(double k) const {
  SfdeModel copy = *this;
  copy.info_.k_const = k;
  copy.gamma_.k_const = k;
  validate_gamma(copy.gamma_);
  return copy;
}

SfdeModel SfdeModel::with_initial_data(InitialData xi) const {
  if (!xi) throw ConfigError("model: initial data is required");
  SfdeModel copy = *this;
  copy.info_.initial_data = std::move(xi);
  return copy;
}

SfdeModel builtin_example1() {
  constexpr double kSqrt2 = std::numbers::sqrt2;
  SfdeModel::Info info;
  info.name = "example1";
  info.dim_state = 1;
  info.dim_noise = 1;
  info.tau = 0.5;
  info.initial_data = [](double theta, std::span<double> out) { out[0] = theta - 1.0; };
  info.gamma_forward = [](double l) { return 6.0 * kSqrt2 * (1.0 + 4.0 * l * l); };
  info.gamma_inverse = [](double y) { return std::sqrt(y / (24.0 * kSqrt2) - 0.25); };
  info.lambda = rate_lambda(2.0, 8.0, 2.0);
  info.constants.p = 8.0;
  info.constants.varrho = 2.0;
  info.constants.a2 = 8.0;
  info.constants.a3 = 7.0;
  info.constants.q_bar = 2.0;
  info.constants.p_bar = 3.0;
  info.constants.a6 = 6.0;
  info.constants.r = 2.0;

  SfdeModel::DistributedForm form;
  // int_{-1/2}^0 x^2(t + theta) dtheta, plain Lebesgue measure.
  form.integrals.push_back(
      {[](std::span<const double> x) { return x[0] * x[0]; }, WeightFunction::constant(1.0, -0.5, 0.0)});
  form.drift = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    const double v = x[0];
    out[0] = 1.0 + 4.0 * v - 4.0 * v * v * v;
  };
  form.diffusion = [](std::span<const double>, std::span<const double> integrals,
                      std::span<double> out) { out[0] = 2.0 * integrals[0]; };
  return SfdeModel::distributed(std::move(info), std::move(form));
}

SfdeModel builtin_example2() {
  SfdeModel::Info info;
  info.name = "example2";
  info.dim_state = 2;
  info.dim_noise = 2;
  info.tau = 0.5;
  info.grid_multiple = 2;
  info.initial_data = [](double theta, std::span<double> out) {
    out[0] = theta * theta;
    out[1] = std::sin(-theta + 2.0);
  };
  info.gamma_forward = [](double l) { return 4.0 + 18.0 * l * l; };
  info.gamma_inverse = [](double y) { return std::sqrt(y / 18.0 - 2.0 / 9.0); };
  info.lambda = 0.001;
  info.constants.p = 2.0;
  info.constants.varrho = 2.0;
  info.constants.b1 = 11.0 / 4.0;
  info.constants.b2 = 1.0 / 4.0;
  info.constants.b3 = 15.0 / 4.0;
  info.constants.b4 = 3.0 / 4.0;
  info.constants.rho3 = WeightFunction::constant(4.0, -0.25, 0.0);
  info.constants.rho4 = WeightFunction::constant(2.0, -0.5, 0.0);

  SfdeModel::DistributedForm form;
  form.integrals.push_back(
      {[](std::span<const double> x) { return x[1]; }, WeightFunction::constant(1.0, -0.25, 0.0)});
  form.integrals.push_back({[](std::span<const double> x) { return x[0] * x[0] * x[0]; },
                            WeightFunction::constant(1.0, -0.5, 0.0)});
  form.drift = [](std::span<const double> x, std::span<const double> integrals,
                  std::span<double> out) {
    out[0] = -2.0 * x[0] - 3.0 * x[0] * x[0] * x[0] + integrals[0];
    out[1] = -2.0 * x[1] - 2.0 * x[1] * x[1] * x[1] + integrals[1];
  };
  form.diffusion = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = x[0];
    out[1] = 0.0;
    out[2] = 0.0;
    out[3] = x[1];
  };
  return SfdeModel::distributed(std::move(info), std::move(form));
}

SfdeModel builtin_gbm_oracle(double a, double b, double x0, double tau) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(x0)) {
    throw ConfigError("gbm: parameters must be finite");
  }
  const double slope = std::max(1.0, std::abs(a) + b * b);
  SfdeModel::Info info;
  info.name = "gbm";
  info.tau = tau;
  info.initial_data = [x0](double, std::span<double> out) { out[0] = x0; };
  info.gamma_forward = [slope](double l) { return slope * (1.0 + l); };
  info.lambda = 0.25;
  info.exact_solution = [a, b, x0](double t, std::span<const double> brownian,
                                   std::span<double> out) {
    out[0] = x0 * std::exp((a - 0.5 * b * b) * t + b * brownian[0]);
  };

  SfdeModel::DistributedForm form;
  form.drift = [a](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = a * x[0];
  };
  form.diffusion = [b](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = b * x[0];
  };
  return SfdeModel::distributed(std::move(info), std::move(form));
}

SfdeModel make_builtin(std::string_view name, const BuiltinParams& params) {
  if (name == "example1") return builtin_example1();
  if (name == "example2") return builtin_example2();
  if (name == "gbm") return builtin_gbm_oracle(params.a, params.b, params.x0);
  throw ConfigError("unknown model '" + std::string(name) + "' (expected example1, example2 or gbm)");
}

std::vector<std::string> builtin_names() { return {"example1", "example2", "gbm"}; }

}  // namespace sfde
