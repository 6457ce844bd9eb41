#include "covflow/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace covflow {

double series_term(const SeriesSpec& spec, std::int64_t l) {
  if (l < 1) throw std::out_of_range("series_term: l must be >= 1");
  return std::visit(
      [l](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, InversePower>) {
          return std::pow(static_cast<double>(l), -s.p);
        } else if constexpr (std::is_same_v<T, LogDamped>) {
          double lg = std::log(static_cast<double>(l) + 1.0);
          return 1.0 / std::sqrt(static_cast<double>(l) * lg * lg);
        } else {
          return l <= static_cast<std::int64_t>(s.values.size())
                     ? s.values[static_cast<std::size_t>(l - 1)]
                     : 0.0;
        }
      },
      spec);
}

bool series_square_summable(const SeriesSpec& spec) {
  return std::visit(
      [](const auto& s) -> bool {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, InversePower>) {
          return s.p > 0.5;
        } else {
          return true;  // LogDamped converges; Explicit is finite
        }
      },
      spec);
}

std::optional<double> series_tail_sq(const SeriesSpec& spec, std::int64_t L) {
  if (L < 1) L = 1;
  return std::visit(
      [L](const auto& s) -> std::optional<double> {
        using T = std::decay_t<decltype(s)>;
        double Ld = static_cast<double>(L);
        if constexpr (std::is_same_v<T, InversePower>) {
          if (s.p <= 0.5) return std::nullopt;  // divergent
          // sum_{l>L} l^-2p <= integral_L^inf x^-2p dx
          return std::pow(Ld, 1.0 - 2.0 * s.p) / (2.0 * s.p - 1.0);
        } else if constexpr (std::is_same_v<T, LogDamped>) {
          // zeta_l^2 = 1/(l log^2(l+1)) <= 1/(l log^2 l) for l >= 2;
          // integral_L^inf dx/(x log^2 x) = 1/log L.
          if (L < 2) return std::nullopt;
          return 1.0 / std::log(Ld);
        } else {
          KahanSum tail;
          for (std::int64_t l = L + 1;
               l <= static_cast<std::int64_t>(s.values.size()); ++l) {
            double z = s.values[static_cast<std::size_t>(l - 1)];
            tail.add(z * z);
          }
          return tail.value();
        }
      },
      spec);
}

ScalingSequence::ScalingSequence(Kind kind) : kind_(std::move(kind)) {
  if (const auto* u = std::get_if<UniformPower>(&kind_)) {
    if (!(u->gamma > 0.0))
      throw std::invalid_argument("UniformPower: gamma must be positive");
  }
  if (const auto* st = std::get_if<SeriesTruncation>(&kind_)) {
    if (const auto* ip = std::get_if<InversePower>(&st->series)) {
      if (!(ip->p > 0.0))
        throw std::invalid_argument("InversePower: p must be positive");
    }
    if (const auto* ex = std::get_if<Explicit>(&st->series)) {
      for (double v : ex->values)
        if (!(v >= 0.0))
          throw std::invalid_argument("Explicit: entries must be nonnegative");
    }
  }
}

ScalingSequence ScalingSequence::uniform(double gamma) {
  return ScalingSequence(UniformPower{gamma});
}

ScalingSequence ScalingSequence::series(SeriesSpec spec) {
  return ScalingSequence(SeriesTruncation{std::move(spec)});
}

ScalingSequence ScalingSequence::custom_table(std::vector<double> table) {
  for (double v : table)
    if (!(v >= 0.0))
      throw std::invalid_argument("custom table: entries must be nonnegative");
  auto tbl = std::make_shared<std::vector<double>>(std::move(table));
  return ScalingSequence(Custom{[tbl](std::int64_t l, std::int64_t) -> double {
    if (l > static_cast<std::int64_t>(tbl->size()))
      throw std::out_of_range("custom table: layer index past table end");
    return (*tbl)[static_cast<std::size_t>(l - 1)];
  }});
}

ScalingSequence ScalingSequence::custom_rule(
    std::function<double(std::int64_t, std::int64_t)> rule) {
  return ScalingSequence(Custom{std::move(rule)});
}

const UniformPower* ScalingSequence::as_uniform() const {
  return std::get_if<UniformPower>(&kind_);
}

const SeriesSpec* ScalingSequence::as_series() const {
  const auto* st = std::get_if<SeriesTruncation>(&kind_);
  return st ? &st->series : nullptr;
}

bool ScalingSequence::is_custom() const {
  return std::holds_alternative<Custom>(kind_);
}

double ScalingSequence::default_normalization_tol() const {
  return is_custom() ? 1e-9 : 1e-12;
}

double alpha_at(const ScalingSequence& seq, std::int64_t l, std::int64_t L) {
  if (l < 1 || l > L)
    throw std::out_of_range("alpha_at: need 1 <= l <= L, got l=" +
                            std::to_string(l) + ", L=" + std::to_string(L));
  return std::visit(
      [l, L](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, UniformPower>) {
          return std::pow(static_cast<double>(L), -k.gamma);
        } else if constexpr (std::is_same_v<T, SeriesTruncation>) {
          return series_term(k.series, l);
        } else {
          double a = k.rule(l, L);
          if (!(a >= 0.0))
            throw std::domain_error("custom rule returned a negative factor");
          return a;
        }
      },
      seq.kind());
}

double partial_energy(const ScalingSequence& seq, std::int64_t l,
                      std::int64_t L) {
  if (l < 0 || l > L)
    throw std::out_of_range("partial_energy: need 0 <= l <= L");
  KahanSum s;
  for (std::int64_t k = 1; k <= l; ++k) {
    double a = alpha_at(seq, k, L);
    s.add(a * a);
  }
  return s.value();
}

std::vector<double> energy_grid(const ScalingSequence& seq, std::int64_t L) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(L) + 1);
  out.push_back(0.0);
  KahanSum s;
  for (std::int64_t k = 1; k <= L; ++k) {
    double a = alpha_at(seq, k, L);
    s.add(a * a);
    out.push_back(s.value());
  }
  return out;
}

namespace {

// sup_{L' <= L_scan} sum_{l<=L'} alpha_{l,L'}^2, with analytic shortcuts.
double scan_s_norm_sq(const ScalingSequence& seq, std::int64_t L_scan,
                      std::optional<double>* tail_out) {
  if (const auto* u = seq.as_uniform()) {
    // sum_{l<=L'} L'^-2g = L'^(1-2g): monotone in L', extremum at an endpoint.
    double at1 = 1.0;
    double atScan = std::pow(static_cast<double>(L_scan), 1.0 - 2.0 * u->gamma);
    return std::max(at1, atScan);
  }
  if (const auto* s = seq.as_series()) {
    // Partial sums are nondecreasing in L'; augment with the tail bound.
    KahanSum acc;
    for (std::int64_t l = 1; l <= L_scan; ++l) {
      double z = series_term(*s, l);
      acc.add(z * z);
    }
    auto tail = series_tail_sq(*s, L_scan);
    if (tail_out) *tail_out = tail;
    return acc.value() + tail.value_or(0.0);
  }
  // Custom rule may depend on L': honest O(L_scan^2) scan.
  double best = 0.0;
  for (std::int64_t Lp = 1; Lp <= L_scan; ++Lp)
    best = std::max(best, partial_energy(seq, Lp, Lp));
  return best;
}

}  // namespace

StabilityReport stability_report(const ScalingSequence& seq, std::int64_t L,
                                 std::int64_t L_scan, double tol) {
  if (L < 1) throw std::out_of_range("stability_report: L must be >= 1");
  if (L_scan < L)
    throw std::out_of_range("stability_report: L_scan must be >= L");
  if (!(tol > 0.0))
    throw std::invalid_argument("stability_report: tol must be positive");

  StabilityReport rep;
  rep.s_norm_sq = scan_s_norm_sq(seq, L_scan, &rep.tail_sq);

  double h = 0.0;
  for (std::int64_t l = 1; l <= L; ++l) {
    double a = alpha_at(seq, l, L);
    h = std::max(h, a * a);
  }
  rep.h_L = h;

  std::vector<double> grid = energy_grid(seq, L);
  rep.is_normalized = std::abs(grid.back() - 1.0) <= tol;
  // Reported lower approximation can only miss upward; keep the invariant
  // s_norm_sq >= partial_energy(L, L) for the depth actually in use.
  rep.s_norm_sq = std::max(rep.s_norm_sq, grid.back());

  rep.energy_profile.reserve(101);
  for (int k = 0; k <= 100; ++k) {
    double t = static_cast<double>(k) / 100.0;
    auto idx = static_cast<std::size_t>(
        std::floor(t * static_cast<double>(L)));
    idx = std::min(idx, grid.size() - 1);
    rep.energy_profile.emplace_back(t, grid[idx]);
  }
  return rep;
}

double depth_error_functional(const ScalingSequence& seq, std::int64_t L,
                              double r_L) {
  if (!(r_L >= 0.0))
    throw std::invalid_argument("depth_error_functional: r_L must be >= 0");
  StabilityReport rep =
      stability_report(seq, L, L, seq.default_normalization_tol());
  if (!rep.is_normalized)
    throw std::domain_error(
        "depth_error_functional: sequence is not normalized at depth L");
  return rep.h_L + static_cast<double>(L) * rep.h_L * rep.h_L + r_L;
}

}  // namespace covflow
