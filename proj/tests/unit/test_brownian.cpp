#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sfde_tem/brownian.hpp"
#include "sfde_tem/error.hpp"
#include "sfde_tem/philox.hpp"

using sfde::BrownianGrid;
using sfde::Philox4x32;

TEST_CASE("philox known-answer vectors") {
  using C = Philox4x32::Counter;
  CHECK(Philox4x32::apply(C{0, 0, 0, 0}, {0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::apply(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::apply(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("generation is deterministic and keyed") {
  const auto a = BrownianGrid::generate(42, 3, 2, 0.01, 1.0);
  const auto b = BrownianGrid::generate(42, 3, 2, 0.01, 1.0);
  CHECK(a.size() == 100);
  CHECK(a.increments().size() == 200);
  CHECK(std::equal(a.increments().begin(), a.increments().end(), b.increments().begin()));
  const auto c = BrownianGrid::generate(42, 4, 2, 0.01, 1.0);
  const auto d = BrownianGrid::generate(43, 3, 2, 0.01, 1.0);
  CHECK(a.increments()[0] != c.increments()[0]);
  CHECK(a.increments()[0] != d.increments()[0]);

  // the flat stream does not depend on how it is split into rows
  const auto flat = BrownianGrid::generate(9, 1, 1, 0.25, 50.0);
  const auto rows = BrownianGrid::generate(9, 1, 2, 0.25, 25.0);
  REQUIRE(rows.increments().size() == flat.increments().size());
  CHECK(std::equal(rows.increments().begin(), rows.increments().end(), flat.increments().begin()));

  CHECK_THROWS_AS(BrownianGrid::generate(1, 0, 1, 0.3, 1.0), sfde::ConfigError);
  CHECK_THROWS_AS(BrownianGrid::generate(1, 0, 0, 0.25, 1.0), sfde::ConfigError);
}

TEST_CASE("increment moments over one million draws") {
  const double h = std::ldexp(1.0, -10);
  const std::size_t n = 1'000'000;
  const auto g = BrownianGrid::generate(2024, 0, 1, h, static_cast<double>(n) * h);
  REQUIRE(g.increments().size() == n);
  const double mean = std::accumulate(g.increments().begin(), g.increments().end(), 0.0) / n;
  double var = 0;
  for (double x : g.increments()) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  CHECK(std::abs(mean) < 4.0 * std::sqrt(h / n));
  CHECK(std::abs(var / h - 1.0) < 0.02);
}

TEST_CASE("distinct replica streams are uncorrelated") {
  const std::size_t n = 100'000;
  for (std::uint64_t r : {1u, 2u, 1000u}) {
    const auto x = BrownianGrid::generate(42, 0, 1, 1.0, static_cast<double>(n));
    const auto y = BrownianGrid::generate(42, r, 1, 1.0, static_cast<double>(n));
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += x.increments()[i];
      my += y.increments()[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = x.increments()[i] - mx;
      const double dy = y.increments()[i] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.02);
  }
}

TEST_CASE("brownian_at sums increments") {
  const auto g = BrownianGrid::generate(5, 0, 2, 0.125, 1.0);
  CHECK(g.brownian_at(0) == std::vector<double>{0.0, 0.0});
  const auto b = g.brownian_at(3);
  const double expect = g.increment(0)[1] + g.increment(1)[1] + g.increment(2)[1];
  CHECK(b[1] == expect);
  CHECK_THROWS_AS(g.brownian_at(9), sfde::DomainError);
}

TEST_CASE("coarsen block sums") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  CHECK(sfde::coarsen(x, 1, 1) == x);
  CHECK(sfde::coarsen(x, 1, 2) == std::vector<double>{3.0, 7.0});
  CHECK(sfde::coarsen(x, 2, 2) == std::vector<double>{4.0, 6.0});
  CHECK_THROWS_AS(sfde::coarsen(x, 1, 3), sfde::ConfigError);
  CHECK_THROWS_AS(sfde::coarsen(x, 1, 0), sfde::ConfigError);
  const std::vector<double> six{1, 2, 3, 4, 5, 6};
  CHECK(sfde::coarsen(six, 1, 3) == std::vector<double>{6.0, 15.0});
}

TEST_CASE("coarsen matches direct block sums on exactly representable data") {
  // small integers: every summation order is exact, so the result must equal the naive block sum
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pick(-1000, 1000);
  for (std::size_t dim : {1u, 2u, 3u}) {
    for (std::size_t factor : {1u, 2u, 3u, 4u, 5u, 8u, 16u}) {
      const std::size_t rows = factor * 7;
      std::vector<double> inc(rows * dim);
      for (auto& v : inc) v = pick(rng);
      const auto out = sfde::coarsen(inc, dim, factor);
      REQUIRE(out.size() == 7 * dim);
      for (std::size_t k = 0; k < 7; ++k) {
        for (std::size_t i = 0; i < dim; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < factor; ++j) s += inc[(k * factor + j) * dim + i];
          CHECK(out[k * dim + i] == s);
        }
      }
    }
  }
}

TEST_CASE("coarsen telescopes over dyadic factors and preserves the total") {
  const auto g = BrownianGrid::generate(77, 5, 2, std::ldexp(1.0, -12), 2.0);
  for (std::size_t a : {1u, 2u, 4u, 16u}) {
    for (std::size_t b : {1u, 2u, 8u, 32u}) {
      const auto direct = sfde::coarsen(g, a * b);
      const auto nested = sfde::coarsen(sfde::coarsen(g, a), 2, b);
      CHECK(direct == nested);
    }
  }
  const auto g3 = BrownianGrid::generate(77, 6, 2, 1.0 / 3.0, 1000.0);
  for (auto [grid, factor] : {std::pair{&g, 2u}, std::pair{&g, 64u}, std::pair{&g, 4096u}, std::pair{&g3, 3u}}) {
    const auto& g = *grid;
    const auto c = sfde::coarsen(g, factor);
    for (std::size_t i = 0; i < 2; ++i) {
      double fine = 0, coarse = 0;
      for (std::size_t k = 0; k < g.size(); ++k) fine += g.increment(k)[i];
      for (std::size_t k = 0; k < c.size() / 2; ++k) coarse += c[k * 2 + i];
      CHECK(std::abs(fine - coarse) < 1e-12);
    }
  }
}

TEST_CASE("integral_ratio") {
  CHECK(sfde::integral_ratio(10.0, std::ldexp(1.0, -14), "t") == 163840u);
  CHECK(sfde::integral_ratio(0.5, 0.5 / 3.0, "t") == 3u);
  CHECK_THROWS_AS(sfde::integral_ratio(1.0, 0.3, "t"), sfde::ConfigError);
  CHECK_THROWS_AS(sfde::integral_ratio(0.1, 1.0, "t"), sfde::ConfigError);
  CHECK_THROWS_AS(sfde::integral_ratio(-1.0, 1.0, "t"), sfde::ConfigError);
}
