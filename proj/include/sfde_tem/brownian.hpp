#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sfde {

/// Two standard normal variates for block `block` of stream (seed, replica).
/// Block b carries flat indices 2b and 2b + 1 of the (step, coordinate) sequence.
std::array<double, 2> standard_normal_pair(std::uint64_t seed, std::uint64_t replica,
                                           std::uint64_t block);

/// Brownian increments on a uniform fine grid, materialized per replica.
///
/// Entry (k, i) is N(0, step_fine), drawn from a Philox stream keyed by the
/// master seed; the replica index and the flat position k * d + i form the
/// counter, so any replica can be regenerated independently.
class BrownianGrid {
 public:
  static BrownianGrid generate(std::uint64_t seed, std::uint64_t replica, std::size_t dim_noise,
                               double step_fine, double horizon);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replica() const { return replica_; }
  std::size_t dim_noise() const { return dim_; }
  double step_fine() const { return step_; }
  double horizon() const { return horizon_; }
  std::size_t size() const { return steps_; }

  /// Flat row-major array, `size() * dim_noise()` entries.
  std::span<const double> increments() const { return increments_; }
  std::span<const double> increment(std::size_t k) const {
    return {increments_.data() + k * dim_, dim_};
  }

  /// B(k * step_fine), summed left to right from B(0) = 0.
  std::vector<double> brownian_at(std::size_t k) const;

 private:
  BrownianGrid() = default;

  std::uint64_t seed_ = 0;
  std::uint64_t replica_ = 0;
  std::size_t dim_ = 0;
  double step_ = 0;
  double horizon_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> increments_;
};

/// Block sums of `factor` consecutive increments. Power-of-two factors are
/// summed as a balanced pairwise tree, so coarsen(g, a*b) equals
/// coarsen(coarsen(g, a), b) bit-exactly for dyadic a and b; other factors
/// are summed left to right.
std::vector<double> coarsen(std::span<const double> increments, std::size_t dim_noise,
                            std::size_t factor);
std::vector<double> coarsen(const BrownianGrid& grid, std::size_t factor);

/// Integer ratio a / b when it is integral within 1e-9 relative; throws ConfigError otherwise.
std::size_t integral_ratio(double a, double b, const char* what);

}  // namespace sfde
