#include "sfde_tem/segment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sfde_tem/error.hpp"

namespace sfde {

namespace {

constexpr double kNodeSnap = 1e-9;

}  // namespace

Segment::Segment(std::vector<double> values, std::size_t dim, double tau, std::size_t n_steps)
    : values_(std::move(values)), dim_(dim), tau_(tau), n_steps_(n_steps) {
  if (dim_ == 0) throw DomainError("segment: dimension must be >= 1");
  if (!(tau_ > 0.0)) throw DomainError("segment: tau must be positive");
  if (n_steps_ == 0) throw DomainError("segment: n_steps must be >= 1");
  if (values_.size() != dim_ * (n_steps_ + 1)) {
    throw DomainError("segment: expected " + std::to_string(n_steps_ + 1) + " nodes of dimension " +
                      std::to_string(dim_) + ", got " + std::to_string(values_.size()) + " values");
  }
}

Segment Segment::constant(std::span<const double> value, double tau, std::size_t n_steps) {
  std::vector<double> values;
  values.reserve(value.size() * (n_steps + 1));
  for (std::size_t j = 0; j <= n_steps; ++j) values.insert(values.end(), value.begin(), value.end());
  return Segment(std::move(values), value.size(), tau, n_steps);
}

Segment Segment::sample(const std::function<void(double, std::span<double>)>& path, std::size_t dim,
                        double tau, std::size_t n_steps) {
  std::vector<double> values(dim * (n_steps + 1));
  const double step = tau / static_cast<double>(n_steps);
  for (std::size_t j = 0; j <= n_steps; ++j) {
    const double theta = (static_cast<double>(j) - static_cast<double>(n_steps)) * step;
    path(theta, std::span<double>(values.data() + j * dim, dim));
  }
  return Segment(std::move(values), dim, tau, n_steps);
}

double Segment::theta(std::size_t j) const {
  return (static_cast<double>(j) - static_cast<double>(n_steps_)) * step();
}

std::span<const double> Segment::node(std::size_t j) const {
  if (j > n_steps_) throw DomainError("segment: node index out of range");
  return {values_.data() + j * dim_, dim_};
}

std::vector<double> Segment::lerp_eval(double theta) const {
  const double slack = kNodeSnap * step();
  if (!(theta >= -tau_ - slack && theta <= slack)) {
    throw DomainError("segment: theta=" + std::to_string(theta) + " outside [-tau, 0]");
  }
  const double h = step();
  const double ratio = theta / h;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) < kNodeSnap) {
    auto idx = static_cast<std::ptrdiff_t>(nearest) + static_cast<std::ptrdiff_t>(n_steps_);
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(n_steps_));
    auto v = node(static_cast<std::size_t>(idx));
    return {v.begin(), v.end()};
  }
  // Subinterval [j*h, (j+1)*h] with j in [-N, -1].
  auto j = static_cast<std::ptrdiff_t>(std::floor(ratio));
  j = std::clamp<std::ptrdiff_t>(j, -static_cast<std::ptrdiff_t>(n_steps_), -1);
  const double jd = static_cast<double>(j);
  const double w_left = ((jd + 1.0) * h - theta) / h;
  const double w_right = (theta - jd * h) / h;
  const auto left = node(static_cast<std::size_t>(j + static_cast<std::ptrdiff_t>(n_steps_)));
  const auto right = node(static_cast<std::size_t>(j + 1 + static_cast<std::ptrdiff_t>(n_steps_)));
  std::vector<double> out(dim_);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = w_left * left[i] + w_right * right[i];
  return out;
}

Segment Segment::shift_append(std::span<const double> new_head) const {
  if (new_head.size() != dim_) {
    throw DomainError("segment: shift_append head has dimension " + std::to_string(new_head.size()) +
                      ", expected " + std::to_string(dim_));
  }
  std::vector<double> values(values_.begin() + static_cast<std::ptrdiff_t>(dim_), values_.end());
  values.insert(values.end(), new_head.begin(), new_head.end());
  return Segment(std::move(values), dim_, tau_, n_steps_);
}

WeightFunction::WeightFunction(std::function<double(double)> eval, double support_lo,
                               double support_hi)
    : eval_(std::move(eval)), lo_(support_lo), hi_(support_hi) {
  if (!eval_) throw DomainError("weight: empty evaluation function");
  if (!(support_lo <= support_hi)) throw DomainError("weight: support must satisfy lo <= hi");
}

WeightFunction WeightFunction::constant(double level, double support_lo, double support_hi) {
  if (!(level >= 0.0)) throw DomainError("weight: level must be nonnegative");
  WeightFunction w([level](double) { return level; }, support_lo, support_hi);
  w.level_ = level;
  return w;
}

std::optional<double> WeightFunction::constant_level() const {
  if (!level_) return std::nullopt;
  return scale_ * *level_;
}

WeightFunction WeightFunction::scaled(double factor) const {
  WeightFunction w = *this;
  w.scale_ *= factor;
  return w;
}

namespace {

// Half-step contributions of each node: 0, 1 or 2 included neighbouring subintervals.
std::vector<int> adjacent_subinterval_counts(const WeightFunction& weight, double tau,
                                             std::size_t n_steps) {
  const double h = tau / static_cast<double>(n_steps);
  std::vector<int> counts(n_steps + 1, 0);
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double mid = (static_cast<double>(i) - static_cast<double>(n_steps) + 0.5) * h;
    if (weight.in_support(mid)) {
      ++counts[i];
      ++counts[i + 1];
    }
  }
  return counts;
}

double checked_weight(const WeightFunction& weight, double theta) {
  const double w = weight(theta);
  if (!std::isfinite(w) || w < 0.0) {
    throw DomainError("weight: value " + std::to_string(w) + " at theta=" + std::to_string(theta) +
                      " is not a finite nonnegative number");
  }
  return w;
}

}  // namespace

double weighted_integral(const Segment& seg, const WeightFunction& weight,
                         const std::function<double(std::span<const double>)>& transform) {
  const std::size_t n = seg.n_steps();
  const double h = seg.step();
  std::vector<double> node_terms(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double t = transform(seg.node(j));
    if (!std::isfinite(t)) {
      throw NumericalError("weighted_integral: non-finite transform at node " + std::to_string(j));
    }
    node_terms[j] = t;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mid = seg.theta(i) + 0.5 * h;
    if (!weight.in_support(mid)) continue;
    sum += 0.5 * h *
           (node_terms[i] * checked_weight(weight, seg.theta(i)) +
            node_terms[i + 1] * checked_weight(weight, seg.theta(i + 1)));
  }
  return sum;
}

double trapezoid_mass(const WeightFunction& weight, double tau, std::size_t n_steps) {
  const std::vector<double> ones(n_steps + 1, 1.0);
  const Segment unit(ones, 1, tau, n_steps);
  return weighted_integral(unit, weight, [](std::span<const double>) { return 1.0; });
}

WeightFunction normalize(const WeightFunction& weight, double tau, std::size_t n_steps) {
  const double mass = trapezoid_mass(weight, tau, n_steps);
  if (!(mass > 0.0)) {
    throw DomainError("normalize: weight has non-positive trapezoid mass " + std::to_string(mass));
  }
  return weight.scaled(1.0 / mass);
}

std::vector<double> quadrature_coefficients(const WeightFunction& weight, double tau,
                                            std::size_t n_steps) {
  const double h = tau / static_cast<double>(n_steps);
  const auto counts = adjacent_subinterval_counts(weight, tau, n_steps);
  std::vector<double> coeffs(n_steps + 1, 0.0);
  for (std::size_t j = 0; j <= n_steps; ++j) {
    if (counts[j] == 0) continue;
    const double theta = (static_cast<double>(j) - static_cast<double>(n_steps)) * h;
    coeffs[j] = 0.5 * h * counts[j] * checked_weight(weight, theta);
  }
  return coeffs;
}

}  // namespace sfde
