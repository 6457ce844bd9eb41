#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>

#include "covflow/scaling.hpp"

using namespace covflow;

TEST_CASE("uniform power factors and energies") {
  ScalingSequence seq = ScalingSequence::uniform(0.5);
  CHECK(alpha_at(seq, 3, 4) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(alpha_at(seq, 1, 4) == alpha_at(seq, 4, 4));
  CHECK(partial_energy(seq, 0, 4) == 0.0);
  CHECK(partial_energy(seq, 2, 4) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(partial_energy(seq, 4, 4) == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<double> grid = energy_grid(seq, 8);
  REQUIRE(grid.size() == 9);
  for (std::int64_t l = 0; l <= 8; ++l)
    CHECK(grid[static_cast<std::size_t>(l)] == partial_energy(seq, l, 8));
}

TEST_CASE("alpha_at rejects out-of-range layers") {
  ScalingSequence seq = ScalingSequence::uniform(0.5);
  CHECK_THROWS_AS(alpha_at(seq, 0, 4), std::out_of_range);
  CHECK_THROWS_AS(alpha_at(seq, 5, 4), std::out_of_range);
}

TEST_CASE("nonpositive gamma is rejected") {
  CHECK_THROWS_AS(ScalingSequence::uniform(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(ScalingSequence::uniform(0.0), std::invalid_argument);
}

TEST_CASE("series terms and tails") {
  SeriesSpec ip = InversePower{1.0};
  CHECK(series_term(ip, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(series_square_summable(ip));
  CHECK_FALSE(series_square_summable(SeriesSpec{InversePower{0.5}}));
  // integral tail bound dominates the true tail and vanishes
  double tail = series_tail_sq(ip, 1000).value();
  CHECK(tail > 0.0);
  CHECK(tail < 1.1e-3);

  SeriesSpec ex = Explicit{{0.5, 0.25}};
  CHECK(series_term(ex, 1) == 0.5);
  CHECK(series_term(ex, 3) == 0.0);  // zero past the end
  CHECK(series_tail_sq(ex, 1).value() == doctest::Approx(0.0625));
  CHECK(series_tail_sq(ex, 2).value() == 0.0);
}

TEST_CASE("inverse-power S-norm approaches pi^2/6") {
  ScalingSequence seq = ScalingSequence::series(InversePower{1.0});
  StabilityReport rep = stability_report(seq, 64, 1000000, 1e-12);
  double target = std::numbers::pi * std::numbers::pi / 6.0;
  CHECK(rep.s_norm_sq == doctest::Approx(target).epsilon(1e-3));
  CHECK(rep.h_L == doctest::Approx(1.0));
  CHECK_FALSE(rep.is_normalized);
  CHECK(rep.tail_sq.has_value());
  CHECK(rep.energy_profile.size() == 101);
  CHECK(rep.energy_profile.front().second == 0.0);
}

TEST_CASE("uniform gamma = 1/2 is normalized at every depth") {
  ScalingSequence seq = ScalingSequence::uniform(0.5);
  for (std::int64_t L : {1, 7, 64, 4096}) {
    StabilityReport rep = stability_report(seq, L, L, 1e-12);
    CHECK(rep.is_normalized);
    CHECK(rep.s_norm_sq == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("depth error functional on normalized sequences") {
  ScalingSequence seq = ScalingSequence::uniform(0.5);
  // h_L = 1/L, so R_L = 1/L + L/L^2 + r = 2/L + r.
  CHECK(depth_error_functional(seq, 4, 0.0) == doctest::Approx(0.5));
  CHECK(depth_error_functional(seq, 100, 0.01) ==
        doctest::Approx(0.03).epsilon(1e-12));
  CHECK_THROWS_AS(depth_error_functional(seq, 4, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(
      depth_error_functional(ScalingSequence::series(InversePower{1.0}), 4, 0.0),
      std::domain_error);
}

TEST_CASE("skewed normalized table has a large error functional") {
  // One heavy branch: alpha_1^2 = 0.9, the rest share 0.1.
  std::int64_t L = 100;
  std::vector<double> table(static_cast<std::size_t>(L),
                            std::sqrt(0.1 / static_cast<double>(L - 1)));
  table[0] = std::sqrt(0.9);
  ScalingSequence seq = ScalingSequence::custom_table(table);
  StabilityReport rep = stability_report(seq, L, L, 1e-9);
  CHECK(rep.is_normalized);
  double R = depth_error_functional(seq, L, 0.0);
  CHECK(R >= 25.0);  // 0.9 + 100 * 0.81 = 81.9
}

TEST_CASE("random normalized tables pass the normalization check") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::int64_t L = 1 + static_cast<std::int64_t>(gen() % 64);
    std::vector<double> table(static_cast<std::size_t>(L));
    double total = 0.0;
    for (auto& v : table) {
      v = u(gen);
      total += v * v;
    }
    for (auto& v : table) v /= std::sqrt(total);
    ScalingSequence seq = ScalingSequence::custom_table(table);
    CHECK(stability_report(seq, L, L, 1e-9).is_normalized);
  }
}

TEST_CASE("custom tables reject negatives and out-of-range layers") {
  CHECK_THROWS_AS(ScalingSequence::custom_table({0.5, -0.1}),
                  std::invalid_argument);
  ScalingSequence seq = ScalingSequence::custom_table({0.5, 0.5});
  CHECK_THROWS_AS(alpha_at(seq, 3, 5), std::out_of_range);
}
