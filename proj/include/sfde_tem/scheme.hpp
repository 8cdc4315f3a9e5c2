#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sfde_tem/brownian.hpp"
#include "sfde_tem/model.hpp"
#include "sfde_tem/segment.hpp"

namespace sfde {

enum class Variant { truncated_em, classic_em };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

struct SchemeConfig {
  double step = 0.0;     // requested step; snapped so that tau = N * step exactly
  double horizon = 0.0;  // T, with T / step integral
  Variant variant = Variant::truncated_em;
};

/// Grid quantities after validation against a model.
struct ResolvedGrid {
  std::size_t delay_steps = 0;  // N = tau / step
  std::size_t total_steps = 0;  // T / step
  double step = 0.0;            // tau / N
  double radius = 0.0;          // truncation radius; +inf for classic_em
};

/// Checks 0 < step <= 1, tau / step and T / step integral (1e-9 relative), and
/// the model's grid multiple. Throws ConfigError.
ResolvedGrid resolve_grid(const SfdeModel& model, const SchemeConfig& config);

struct RecordOptions {
  std::size_t stride = 1;  // keep every stride-th state; the terminal state is always kept
  bool keep_pre_truncation = false;
};

struct PathRecord {
  std::size_t dim = 0;
  double step = 0.0;
  double radius = 0.0;
  std::size_t stride = 1;
  std::vector<double> times;
  std::vector<double> states;          // Y(t_k) after truncation, dim per recorded time
  std::vector<double> pre_truncation;  // breve-Y(t_k), same layout; empty unless requested
  std::size_t truncation_hits = 0;
  bool diverged = false;
  std::size_t diverged_step = 0;

  std::size_t size() const { return times.size(); }
  std::span<const double> state(std::size_t i) const { return {states.data() + i * dim, dim}; }
  std::span<const double> terminal() const { return state(size() - 1); }
};

/// Truncated initial history: node j holds truncate(xi((j - N) step), radius).
Segment init_segment(const SfdeModel& model, const SchemeConfig& config);

struct StepResult {
  std::vector<double> new_head;
  std::vector<double> pre_truncation;
  bool truncated = false;
};

/// One step of the recursion from the segment `seg` (step = seg.step()):
/// pre = head + f(seg) step + g(seg) dB, new_head = truncate(pre, radius).
StepResult tem_step(const SfdeModel& model, const Segment& seg, std::span<const double> dB,
                    double radius);

/// Runs the recursion over [0, T] driven by `increments` (variance `step`,
/// at least T/step rows of dim_noise entries). classic_em replicas that
/// overflow are marked diverged and halted; a non-finite truncated_em state
/// throws NumericalError.
PathRecord simulate(const SfdeModel& model, const SchemeConfig& config,
                    std::span<const double> increments, const RecordOptions& options = {});

/// Same, with the increments coarsened from a fine Brownian grid.
PathRecord simulate(const SfdeModel& model, const SchemeConfig& config, const BrownianGrid& grid,
                    const RecordOptions& options = {});

/// Continuous extension Z(t) = Y(t_k) + f(Ybar_{t_k})(t - t_k) + g(Ybar_{t_k})(B(t) - B(t_k))
/// at a fine-grid time t of `grid`. `record` must come from simulate with stride 1
/// on the same grid. Throws DomainError for t off the fine grid or outside [0, T].
std::vector<double> continuous_extension(const SfdeModel& model, const SchemeConfig& config,
                                         const PathRecord& record, const BrownianGrid& grid,
                                         double t);

}  // namespace sfde
