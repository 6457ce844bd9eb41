#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace covflow {

/// Compensated (Kahan) accumulator. Partial energies feed ODE time grids,
/// so they must be reproducible regardless of how callers chunk the sums.
class KahanSum {
 public:
  void add(double x) {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

// ---------------------------------------------------------------------------
// Depth-independent scaling series: zeta_l, l >= 1.
// ---------------------------------------------------------------------------

struct InversePower {
  double p = 1.0;  // zeta_l = l^-p
};

struct LogDamped {};  // zeta_l = (l * log^2(l+1))^-1/2

struct Explicit {
  std::vector<double> values;  // zeta_l = values[l-1], zero past the end
};

using SeriesSpec = std::variant<InversePower, LogDamped, Explicit>;

double series_term(const SeriesSpec& spec, std::int64_t l);
bool series_square_summable(const SeriesSpec& spec);

/// Analytic upper bound on sum_{l > L} zeta_l^2, when one is known.
std::optional<double> series_tail_sq(const SeriesSpec& spec, std::int64_t L);

// ---------------------------------------------------------------------------
// Scaling-factor sequences alpha_{l,L}: the triangular array of per-branch
// residual multipliers, 1 <= l <= L.
// ---------------------------------------------------------------------------

struct UniformPower {
  double gamma = 0.5;  // alpha_{l,L} = L^-gamma
};

struct SeriesTruncation {
  SeriesSpec series;  // alpha_{l,L} = zeta_l, independent of L
};

struct Custom {
  std::function<double(std::int64_t l, std::int64_t L)> rule;
};

class ScalingSequence {
 public:
  using Kind = std::variant<UniformPower, SeriesTruncation, Custom>;

  explicit ScalingSequence(Kind kind);

  static ScalingSequence uniform(double gamma);
  static ScalingSequence series(SeriesSpec spec);
  static ScalingSequence custom_table(std::vector<double> table);
  static ScalingSequence custom_rule(
      std::function<double(std::int64_t, std::int64_t)> rule);

  const Kind& kind() const { return kind_; }

  const UniformPower* as_uniform() const;
  const SeriesSpec* as_series() const;
  bool is_custom() const;

  /// 1e-12 for analytic sequences, 1e-9 for custom tables (float
  /// accumulation over up to 2^20 terms).
  double default_normalization_tol() const;

 private:
  Kind kind_;
};

/// alpha_{l,L}. Throws std::out_of_range unless 1 <= l <= L.
double alpha_at(const ScalingSequence& seq, std::int64_t l, std::int64_t L);

/// t_l = sum_{k<=l} alpha_{k,L}^2, compensated. t_0 = 0.
double partial_energy(const ScalingSequence& seq, std::int64_t l,
                      std::int64_t L);

/// All partial energies 0..L at depth L in one pass (same accumulation
/// order as partial_energy).
std::vector<double> energy_grid(const ScalingSequence& seq, std::int64_t L);

struct StabilityReport {
  double s_norm_sq = 0.0;    // sup_{L' <= L_scan} sum_{l<=L'} alpha^2 (+ tail)
  double h_L = 0.0;          // max_{l<=L} alpha_{l,L}^2
  bool is_normalized = false;  // |sum alpha^2 - 1| <= tol at depth L
  std::optional<double> tail_sq;  // sum_{l>L_scan} zeta_l^2 bound, series only
  std::vector<std::pair<double, double>> energy_profile;  // (t, t_{floor(tL)})
};

StabilityReport stability_report(const ScalingSequence& seq, std::int64_t L,
                                 std::int64_t L_scan, double tol);

/// R_L = h_L + L*h_L^2 + r_L. Defined on normalized sequences only;
/// throws std::domain_error otherwise.
double depth_error_functional(const ScalingSequence& seq, std::int64_t L,
                              double r_L);

}  // namespace covflow
