#include "sfde_tem/brownian.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sfde_tem/error.hpp"
#include "sfde_tem/philox.hpp"

namespace sfde {

namespace {

// 53-bit uniform in the open interval (0, 1).
double open_uniform(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::vector<double> pairwise_halve(std::span<const double> in, std::size_t dim) {
  const std::size_t rows = in.size() / dim / 2;
  std::vector<double> out(rows * dim);
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t i = 0; i < dim; ++i) {
      out[k * dim + i] = in[2 * k * dim + i] + in[(2 * k + 1) * dim + i];
    }
  }
  return out;
}

}  // namespace

std::array<double, 2> standard_normal_pair(std::uint64_t seed, std::uint64_t replica,
                                           std::uint64_t block) {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block),
                                static_cast<std::uint32_t>(block >> 32),
                                static_cast<std::uint32_t>(replica),
                                static_cast<std::uint32_t>(replica >> 32)};
  const auto bits = Philox4x32::apply(ctr, key);
  const double u1 = open_uniform(bits[0], bits[1]);
  const double u2 = open_uniform(bits[2], bits[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

std::size_t integral_ratio(double a, double b, const char* what) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ConfigError(std::string(what) + ": expected positive values");
  }
  const double ratio = a / b;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw ConfigError(std::string(what) + ": ratio " + std::to_string(ratio) + " is not an integer");
  }
  return static_cast<std::size_t>(rounded);
}

BrownianGrid BrownianGrid::generate(std::uint64_t seed, std::uint64_t replica,
                                    std::size_t dim_noise, double step_fine, double horizon) {
  if (dim_noise == 0) throw ConfigError("brownian: dim_noise must be >= 1");
  BrownianGrid grid;
  grid.seed_ = seed;
  grid.replica_ = replica;
  grid.dim_ = dim_noise;
  grid.step_ = step_fine;
  grid.horizon_ = horizon;
  grid.steps_ = integral_ratio(horizon, step_fine, "brownian horizon/step");

  const std::size_t total = grid.steps_ * dim_noise;
  const double scale = std::sqrt(step_fine);
  grid.increments_.resize(total);
  for (std::size_t idx = 0; idx < total; idx += 2) {
    const auto z = standard_normal_pair(seed, replica, idx / 2);
    grid.increments_[idx] = scale * z[0];
    if (idx + 1 < total) grid.increments_[idx + 1] = scale * z[1];
  }
  return grid;
}

std::vector<double> BrownianGrid::brownian_at(std::size_t k) const {
  if (k > steps_) throw DomainError("brownian: index beyond horizon");
  std::vector<double> b(dim_, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < dim_; ++i) b[i] += increments_[j * dim_ + i];
  }
  return b;
}

std::vector<double> coarsen(std::span<const double> increments, std::size_t dim_noise,
                            std::size_t factor) {
  if (factor == 0 || dim_noise == 0) throw ConfigError("coarsen: factor and dimension must be >= 1");
  if (increments.size() % dim_noise != 0) throw ConfigError("coarsen: ragged increment array");
  const std::size_t rows = increments.size() / dim_noise;
  if (rows % factor != 0) {
    throw ConfigError("coarsen: " + std::to_string(rows) + " increments not divisible by factor " +
                      std::to_string(factor));
  }
  if ((factor & (factor - 1)) == 0) {
    std::vector<double> out(increments.begin(), increments.end());
    for (std::size_t f = factor; f > 1; f /= 2) out = pairwise_halve(out, dim_noise);
    return out;
  }
  std::vector<double> out((rows / factor) * dim_noise, 0.0);
  for (std::size_t k = 0; k < rows / factor; ++k) {
    for (std::size_t j = 0; j < factor; ++j) {
      for (std::size_t i = 0; i < dim_noise; ++i) {
        out[k * dim_noise + i] += increments[(k * factor + j) * dim_noise + i];
      }
    }
  }
  return out;
}

std::vector<double> coarsen(const BrownianGrid& grid, std::size_t factor) {
  return coarsen(grid.increments(), grid.dim_noise(), factor);
}

}  // namespace sfde
