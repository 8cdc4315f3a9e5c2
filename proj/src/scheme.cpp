#include "sfde_tem/scheme.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "sfde_tem/error.hpp"

namespace sfde {

std::string_view to_string(Variant v) {
  return v == Variant::truncated_em ? "truncated_em" : "classic_em";
}

Variant parse_variant(std::string_view text) {
  if (text == "truncated_em") return Variant::truncated_em;
  if (text == "classic_em") return Variant::classic_em;
  throw ConfigError("unknown scheme variant '" + std::string(text) + "'");
}

ResolvedGrid resolve_grid(const SfdeModel& model, const SchemeConfig& config) {
  if (!(config.step > 0.0 && config.step <= 1.0)) {
    throw ConfigError("scheme: step " + std::to_string(config.step) + " outside (0, 1]");
  }
  if (!(config.horizon > 0.0)) throw ConfigError("scheme: horizon must be positive");
  ResolvedGrid grid;
  grid.delay_steps = integral_ratio(model.tau(), config.step, "scheme tau/step");
  if (grid.delay_steps % model.grid_multiple() != 0) {
    throw ConfigError("scheme: model " + model.name() + " needs tau/step divisible by " +
                      std::to_string(model.grid_multiple()) + ", got " +
                      std::to_string(grid.delay_steps));
  }
  grid.step = model.tau() / static_cast<double>(grid.delay_steps);
  grid.total_steps = integral_ratio(config.horizon, grid.step, "scheme horizon/step");
  grid.radius = config.variant == Variant::truncated_em
                    ? truncation_radius(model.gamma(), grid.step)
                    : std::numeric_limits<double>::infinity();
  return grid;
}

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Balanced-tree sums over a fixed set of slots. Every internal node is
// recomputed from its children on update, so sums never accumulate drift.
class WindowSum {
 public:
  explicit WindowSum(std::size_t slots) : leaves_(std::bit_ceil(slots)), tree_(2 * leaves_, 0.0) {}

  void set(std::size_t pos, double value) {
    std::size_t i = pos + leaves_;
    tree_[i] = value;
    for (i >>= 1; i > 0; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
  }

  // Sum over slots [lo, hi).
  double sum(std::size_t lo, std::size_t hi) const {
    double left = 0.0;
    double right = 0.0;
    for (lo += leaves_, hi += leaves_; lo < hi; lo >>= 1, hi >>= 1) {
      if (lo & 1) left += tree_[lo++];
      if (hi & 1) right = tree_[--hi] + right;
    }
    return left + right;
  }

 private:
  std::size_t leaves_;
  std::vector<double> tree_;
};

// Distributed-delay integral tracked over a ring of transformed node values.
class IntegralTracker {
 public:
  // Non-strict trackers let overflow propagate into the coefficients (classic EM divergence).
  IntegralTracker(const DelayIntegral& term, const Segment& initial, bool strict)
      : term_(&term),
        strict_(strict),
        nodes_(initial.n_nodes()),
        ring_(nodes_),
        coeffs_(quadrature_coefficients(term.weight, initial.tau(), initial.n_steps())) {
    for (std::size_t j = 0; j < nodes_; ++j) ring_[j] = checked(initial.node(j), j);
    if (const auto level = term.weight.constant_level()) {
      std::optional<std::size_t> first;
      std::size_t last = 0;
      for (std::size_t j = 0; j < nodes_; ++j) {
        if (coeffs_[j] != 0.0) {
          if (!first) first = j;
          last = j;
        }
      }
      if (first && last > *first) {
        window_.emplace(nodes_);
        first_ = *first;
        last_ = last;
        interior_ = *level * initial.step();
        for (std::size_t j = 0; j < nodes_; ++j) window_->set(j, ring_[j]);
      }
    }
  }

  double value() const {
    if (window_) {
      const std::size_t a = slot(first_);
      const std::size_t b = slot(last_);
      const double total = a <= b ? window_->sum(a, b + 1)
                                  : window_->sum(a, nodes_) + window_->sum(0, b + 1);
      return interior_ * (total - 0.5 * (ring_[a] + ring_[b]));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < nodes_; ++j) {
      if (coeffs_[j] != 0.0) s += coeffs_[j] * ring_[slot(j)];
    }
    return s;
  }

  // Called after the history offset advanced; the new head lives in slot(nodes_ - 1).
  void push(std::span<const double> head, std::size_t offset) {
    offset_ = offset;
    const std::size_t pos = slot(nodes_ - 1);
    ring_[pos] = checked(head, offset + nodes_ - 1);
    if (window_) window_->set(pos, ring_[pos]);
  }

 private:
  std::size_t slot(std::size_t j) const { return (offset_ + j) % nodes_; }

  double checked(std::span<const double> x, std::size_t index) const {
    const double h = term_->transform(x);
    if (strict_ && !std::isfinite(h)) {
      throw NumericalError("delay integral: non-finite transform at history index " +
                           std::to_string(index));
    }
    return h;
  }

  const DelayIntegral* term_;
  bool strict_;
  std::size_t nodes_;
  std::size_t offset_ = 0;
  std::vector<double> ring_;
  std::vector<double> coeffs_;
  std::optional<WindowSum> window_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  double interior_ = 0.0;
};

// Current history window of one path plus the machinery to evaluate f and g on it.
class PathEngine {
 public:
  PathEngine(const SfdeModel& model, const Segment& initial, bool strict)
      : model_(model),
        dim_(initial.dim()),
        nodes_(initial.n_nodes()),
        tau_(initial.tau()),
        head_(initial.head().begin(), initial.head().end()) {
    if (const auto* form = model.distributed_form()) {
      form_ = form;
      trackers_.reserve(form->integrals.size());
      for (const auto& term : form->integrals) trackers_.emplace_back(term, initial, strict);
      integrals_.resize(form->integrals.size());
    } else {
      history_.assign(initial.values().begin(), initial.values().end());
    }
  }

  std::span<const double> head() const { return head_; }

  void coefficients(std::span<double> drift, std::span<double> diffusion) {
    if (form_) {
      for (std::size_t i = 0; i < trackers_.size(); ++i) integrals_[i] = trackers_[i].value();
      form_->drift(head_, integrals_, drift);
      form_->diffusion(head_, integrals_, diffusion);
      return;
    }
    const Segment seg = materialize();
    model_.drift(seg, drift);
    model_.diffusion(seg, diffusion);
  }

  void push(std::span<const double> new_head) {
    ++offset_;
    head_.assign(new_head.begin(), new_head.end());
    if (form_) {
      for (auto& tracker : trackers_) tracker.push(new_head, offset_);
    } else {
      const std::size_t pos = (offset_ + nodes_ - 1) % nodes_;
      std::copy(new_head.begin(), new_head.end(), history_.begin() + static_cast<std::ptrdiff_t>(pos * dim_));
    }
  }

 private:
  Segment materialize() const {
    std::vector<double> values(nodes_ * dim_);
    for (std::size_t j = 0; j < nodes_; ++j) {
      const std::size_t pos = (offset_ + j) % nodes_;
      std::copy_n(history_.begin() + static_cast<std::ptrdiff_t>(pos * dim_), dim_,
                  values.begin() + static_cast<std::ptrdiff_t>(j * dim_));
    }
    return Segment(std::move(values), dim_, tau_, nodes_ - 1);
  }

  const SfdeModel& model_;
  std::size_t dim_;
  std::size_t nodes_;
  double tau_;
  std::size_t offset_ = 0;
  std::vector<double> head_;
  const SfdeModel::DistributedForm* form_ = nullptr;
  std::vector<IntegralTracker> trackers_;
  std::vector<double> integrals_;
  std::vector<double> history_;
};

Segment build_initial_segment(const SfdeModel& model, const ResolvedGrid& grid,
                              std::vector<double>* raw_head) {
  const std::size_t n = model.dim_state();
  std::vector<double> values((grid.delay_steps + 1) * n);
  for (std::size_t j = 0; j <= grid.delay_steps; ++j) {
    // theta_j = (j - N) step; the last node is exactly 0.
    const double theta = -static_cast<double>(grid.delay_steps - j) * grid.step;
    std::span<double> node(values.data() + j * n, n);
    model.initial_data(std::max(theta, -model.tau()), node);
    if (raw_head && j == grid.delay_steps) raw_head->assign(node.begin(), node.end());
    truncate_in_place(node, grid.radius);
  }
  return Segment(std::move(values), n, model.tau(), grid.delay_steps);
}

}  // namespace

Segment init_segment(const SfdeModel& model, const SchemeConfig& config) {
  return build_initial_segment(model, resolve_grid(model, config), nullptr);
}

StepResult tem_step(const SfdeModel& model, const Segment& seg, std::span<const double> dB,
                    double radius) {
  const std::size_t n = model.dim_state();
  const std::size_t d = model.dim_noise();
  if (dB.size() != d) throw DomainError("tem_step: increment has wrong dimension");
  if (!(radius > 0.0)) throw DomainError("tem_step: radius must be positive");
  const auto f = model.drift(seg);
  const auto g = model.diffusion(seg);
  if (!all_finite(f) || !all_finite(g)) throw NumericalError("tem_step: non-finite coefficient");
  const double step = seg.step();
  StepResult result;
  result.pre_truncation.assign(seg.head().begin(), seg.head().end());
  for (std::size_t i = 0; i < n; ++i) {
    double noise = 0.0;
    for (std::size_t j = 0; j < d; ++j) noise += g[i * d + j] * dB[j];
    result.pre_truncation[i] += f[i] * step + noise;
  }
  result.new_head = result.pre_truncation;
  if (!all_finite(result.new_head)) throw NumericalError("tem_step: non-finite state");
  result.truncated = truncate_in_place(result.new_head, radius);
  return result;
}

PathRecord simulate(const SfdeModel& model, const SchemeConfig& config,
                    std::span<const double> increments, const RecordOptions& options) {
  const ResolvedGrid grid = resolve_grid(model, config);
  const std::size_t n = model.dim_state();
  const std::size_t d = model.dim_noise();
  if (increments.size() < grid.total_steps * d) {
    throw ConfigError("simulate: " + std::to_string(increments.size() / d) +
                      " increments supplied, " + std::to_string(grid.total_steps) + " required");
  }
  const std::size_t stride = std::max<std::size_t>(1, options.stride);
  const bool truncated = config.variant == Variant::truncated_em;

  PathRecord rec;
  rec.dim = n;
  rec.step = grid.step;
  rec.radius = grid.radius;
  rec.stride = stride;
  const std::size_t expected = grid.total_steps / stride + 2;
  rec.times.reserve(expected);
  rec.states.reserve(expected * n);

  std::vector<double> raw_head;
  const Segment initial = build_initial_segment(model, grid, &raw_head);
  PathEngine engine(model, initial, truncated);

  auto record = [&](std::size_t k, std::span<const double> state, std::span<const double> pre) {
    rec.times.push_back(static_cast<double>(k) * grid.step);
    rec.states.insert(rec.states.end(), state.begin(), state.end());
    if (options.keep_pre_truncation) rec.pre_truncation.insert(rec.pre_truncation.end(), pre.begin(), pre.end());
  };
  record(0, engine.head(), raw_head);

  std::vector<double> f(n);
  std::vector<double> g(n * d);
  std::vector<double> next(n);
  std::vector<double> pre(n);
  for (std::size_t k = 0; k < grid.total_steps; ++k) {
    engine.coefficients(f, g);
    const auto head = engine.head();
    const double* dB = increments.data() + k * d;
    for (std::size_t i = 0; i < n; ++i) {
      double noise = 0.0;
      for (std::size_t j = 0; j < d; ++j) noise += g[i * d + j] * dB[j];
      pre[i] = head[i] + f[i] * grid.step + noise;
    }
    if (!all_finite(pre)) {
      if (!truncated) {
        rec.diverged = true;
        rec.diverged_step = k + 1;
        record(k + 1, pre, pre);
        return rec;
      }
      throw NumericalError("truncated_em produced a non-finite state at step " + std::to_string(k + 1) +
                           " (|state|=" + std::to_string(norm(head)) +
                           ", radius=" + std::to_string(grid.radius) + ")");
    }
    next = pre;
    if (truncated && truncate_in_place(next, grid.radius)) ++rec.truncation_hits;
    engine.push(next);
    if ((k + 1) % stride == 0 || k + 1 == grid.total_steps) record(k + 1, next, pre);
  }
  return rec;
}

PathRecord simulate(const SfdeModel& model, const SchemeConfig& config, const BrownianGrid& grid,
                    const RecordOptions& options) {
  if (grid.dim_noise() != model.dim_noise()) throw ConfigError("simulate: noise dimension mismatch");
  const ResolvedGrid resolved = resolve_grid(model, config);
  const std::size_t factor = integral_ratio(resolved.step, grid.step_fine(), "simulate step/fine step");
  if (factor == 1) return simulate(model, config, grid.increments(), options);
  return simulate(model, config, coarsen(grid, factor), options);
}

std::vector<double> continuous_extension(const SfdeModel& model, const SchemeConfig& config,
                                         const PathRecord& record, const BrownianGrid& grid,
                                         double t) {
  const ResolvedGrid resolved = resolve_grid(model, config);
  if (record.stride != 1 || record.size() != resolved.total_steps + 1) {
    throw DomainError("continuous_extension: needs a complete stride-1 record");
  }
  if (!(t >= 0.0 && t <= config.horizon)) throw DomainError("continuous_extension: t outside [0, T]");
  const std::size_t factor = integral_ratio(resolved.step, grid.step_fine(), "extension step/fine step");
  const double ratio = t / grid.step_fine();
  const double fine = std::round(ratio);
  if (std::abs(ratio - fine) > 1e-9 * std::max(1.0, fine)) {
    throw DomainError("continuous_extension: t=" + std::to_string(t) +
                      " is not a point of the fine Brownian grid");
  }
  const auto i = static_cast<std::size_t>(fine);
  const std::size_t k = i / factor;
  if (i % factor == 0) {
    auto s = record.state(k);
    return {s.begin(), s.end()};
  }

  // Rebuild Ybar_{t_k}: history index m = k - N + j is the initial segment for m <= 0.
  const std::size_t n = model.dim_state();
  const std::size_t d = model.dim_noise();
  const std::size_t big_n = resolved.delay_steps;
  const Segment initial = build_initial_segment(model, resolved, nullptr);
  std::vector<double> values((big_n + 1) * n);
  for (std::size_t j = 0; j <= big_n; ++j) {
    const auto m = static_cast<std::ptrdiff_t>(k + j) - static_cast<std::ptrdiff_t>(big_n);
    const auto src = m <= 0 ? initial.node(static_cast<std::size_t>(m + static_cast<std::ptrdiff_t>(big_n)))
                            : record.state(static_cast<std::size_t>(m));
    std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(j * n));
  }
  const Segment seg(std::move(values), n, model.tau(), big_n);
  const auto f = model.drift(seg);
  const auto g = model.diffusion(seg);

  std::vector<double> dB(d, 0.0);
  for (std::size_t q = k * factor; q < i; ++q) {
    const auto inc = grid.increment(q);
    for (std::size_t j = 0; j < d; ++j) dB[j] += inc[j];
  }
  const double dt = static_cast<double>(i - k * factor) * grid.step_fine();
  const auto y = record.state(k);
  std::vector<double> z(n);
  for (std::size_t r = 0; r < n; ++r) {
    double noise = 0.0;
    for (std::size_t j = 0; j < d; ++j) noise += g[r * d + j] * dB[j];
    z[r] = y[r] + f[r] * dt + noise;
  }
  return z;
}

}  // namespace sfde
