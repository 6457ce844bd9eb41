#include "covflow/nets.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "covflow/rng.hpp"

namespace covflow {

namespace {

constexpr double kNormGuard = 1e150;  // on ||Y||, i.e. 1e300 on ||Y||^2

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

inline void check_stable(std::int64_t layer, const Eigen::VectorXd& ya,
                         const Eigen::VectorXd& yb) {
  double na = ya.squaredNorm();
  double nb = yb.squaredNorm();
  if (!(na <= kNormGuard * kNormGuard) || !(nb <= kNormGuard * kNormGuard))
    throw InstabilityError(layer, std::max(na, nb));
}

inline KernelTriple empirical_triple(const Eigen::VectorXd& ya,
                                     const Eigen::VectorXd& yb) {
  double n = static_cast<double>(ya.size());
  return {ya.squaredNorm() / n, ya.dot(yb) / n, yb.squaredNorm() / n};
}

// Shared-weight input layer: Y_0^i = <g_i, x> / sqrt(d), g_i iid N(0, I_d).
void input_layer(const NetworkSpec& spec, const InputPair& pair,
                 std::uint64_t layer_key, Eigen::VectorXd& ya,
                 Eigen::VectorXd& yb) {
  const Eigen::VectorXd& a = pair.a();
  const Eigen::VectorXd& b = pair.b();
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(spec.d));
  for (std::int64_t i = 0; i < spec.n; ++i) {
    rng::Stream row(rng::derive(layer_key, static_cast<std::uint64_t>(i) + 1));
    double da = 0.0, db = 0.0;
    for (std::int64_t j = 0; j < spec.d; ++j) {
      double g = row.next_gaussian();
      da += g * a[j];
      db += g * b[j];
    }
    ya[i] = da * inv_sqrt_d;
    yb[i] = db * inv_sqrt_d;
  }
}

struct LayerUpdate {
  // Residual mixing: new = keep * old + gain * (G phi) / sqrt(n).
  double keep = 0.0;
  double gain = 1.0;
};

LayerUpdate layer_update(const NetworkSpec& spec, std::int64_t l) {
  switch (spec.arch) {
    case Arch::ScaledResNet:
      return {1.0, alpha_at(*spec.seq, l, spec.L)};
    case Arch::Mlp:
      return {0.0, std::numbers::sqrt2};
    case Arch::ShapedMlp:
      return {0.0, std::sqrt(shaped_mlp_weight_gain(spec.L))};
    case Arch::ShapedResNet:
      return {spec.beta, std::sqrt(1.0 - spec.beta * spec.beta)};
  }
  throw std::logic_error("layer_update: unreachable");
}

TrialTrace simulate_impl(const NetworkSpec& spec, const InputPair& pair,
                         std::uint64_t seed, bool with_auxiliary) {
  spec.validate();
  if (with_auxiliary && spec.arch != Arch::ScaledResNet)
    throw std::invalid_argument(
        "simulate_with_auxiliary: scaled ResNet only (the auxiliary process "
        "has a closed-form volatility only there)");
  if (pair.d() != spec.d)
    throw std::invalid_argument("simulate: input dimension mismatch");

  const std::int64_t n = spec.n;
  const std::int64_t L = spec.L;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  TrialTrace trace;
  trace.seed = seed;
  trace.layers.reserve(static_cast<std::size_t>(L) + 1);

  Eigen::VectorXd ya(n), yb(n);
  input_layer(spec, pair, rng::derive(seed, 0), ya, yb);
  check_stable(0, ya, yb);
  trace.layers.push_back(empirical_triple(ya, yb));

  std::vector<double> vols;  // sqrt(q_{l-1}(a)/2) for the auxiliary process
  Eigen::VectorXd yt;
  if (with_auxiliary) {
    std::vector<double> profile = variance_profile(*spec.seq, L, pair.q0_aa());
    vols.resize(static_cast<std::size_t>(L) + 1);
    for (std::int64_t l = 1; l <= L; ++l)
      vols[static_cast<std::size_t>(l)] =
          std::sqrt(0.5 * profile[static_cast<std::size_t>(l - 1)]);
    yt = ya;  // Ytilde_0 = Y_0
    trace.deviation.assign(static_cast<std::size_t>(L) + 1, 0.0);
  }

  Eigen::VectorXd phi_a(n), phi_b(n), new_ya(n), new_yb(n), new_yt;
  if (with_auxiliary) new_yt.resize(n);

  for (std::int64_t l = 1; l <= L; ++l) {
    for (std::int64_t i = 0; i < n; ++i) {
      phi_a[i] = apply_activation(spec.arch, ya[i], L);
      phi_b[i] = apply_activation(spec.arch, yb[i], L);
    }
    LayerUpdate up = layer_update(spec, l);

    double phi_a_norm = 0.0;
    bool fallback = false;
    if (with_auxiliary) {
      phi_a_norm = phi_a.norm();
      fallback = phi_a_norm == 0.0;
      if (fallback) trace.fallback_events += 1;
    }

    std::uint64_t layer_key = rng::derive(seed, static_cast<std::uint64_t>(l));
    for (std::int64_t i = 0; i < n; ++i) {
      rng::Stream row(
          rng::derive(layer_key, static_cast<std::uint64_t>(i) + 1));
      double da = 0.0, db = 0.0, dsum = 0.0;
      for (std::int64_t j = 0; j < n; ++j) {
        double g = row.next_gaussian();
        da += g * phi_a[j];
        db += g * phi_b[j];
        if (fallback) dsum += g;
      }
      new_ya[i] = up.keep * ya[i] + up.gain * da * inv_sqrt_n;
      new_yb[i] = up.keep * yb[i] + up.gain * db * inv_sqrt_n;
      if (with_auxiliary) {
        double alpha = up.gain;  // ScaledResNet: gain == alpha_{l,L}
        double vol = vols[static_cast<std::size_t>(l)];
        // G_l(a)^i = sqrt(n) <w_i, phi_a> / ||phi_a|| = da / ||phi_a||;
        // with zero norm the direction falls back to e / sqrt(n).
        double dir = fallback ? dsum * inv_sqrt_n : da / phi_a_norm;
        new_yt[i] = yt[i] + alpha * vol * dir;
      }
    }
    ya.swap(new_ya);
    yb.swap(new_yb);
    check_stable(l, ya, yb);
    trace.layers.push_back(empirical_triple(ya, yb));
    if (with_auxiliary) {
      yt.swap(new_yt);
      trace.deviation[static_cast<std::size_t>(l)] =
          (ya - yt).squaredNorm() / static_cast<double>(n);
    }
  }
  return trace;
}

}  // namespace

void NetworkSpec::validate() const {
  if (n < 1 || L < 1 || d < 1)
    throw std::invalid_argument("NetworkSpec: n, L, d must all be >= 1");
  if (arch == Arch::ScaledResNet && !seq.has_value())
    throw std::invalid_argument(
        "NetworkSpec: the scaled ResNet needs a scaling sequence");
  if (arch == Arch::ShapedResNet && !(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("NetworkSpec: beta must lie in (0, 1)");
}

TrialTrace simulate_pair(const NetworkSpec& spec, const InputPair& pair,
                         std::uint64_t seed) {
  return simulate_impl(spec, pair, seed, false);
}

TrialTrace simulate_with_auxiliary(const NetworkSpec& spec,
                                   const InputPair& pair, std::uint64_t seed) {
  return simulate_impl(spec, pair, seed, true);
}

double apply_activation(Arch arch, double z, std::int64_t L) {
  switch (arch) {
    case Arch::ScaledResNet:
    case Arch::Mlp:
      return relu(z);
    case Arch::ShapedMlp:
    case Arch::ShapedResNet:
      return z + relu(z) / std::sqrt(static_cast<double>(L));
  }
  throw std::logic_error("apply_activation: unreachable");
}

DirectionTestReport gaussian_direction_test(std::int64_t n,
                                            std::int64_t trials,
                                            std::uint64_t seed) {
  if (n < 8) throw std::invalid_argument("gaussian_direction_test: n < 8");
  if (trials < 1)
    throw std::invalid_argument("gaussian_direction_test: trials < 1");

  Eigen::VectorXd v(n);
  rng::Stream dir(rng::derive(seed, 0));
  do {
    for (std::int64_t j = 0; j < n; ++j) v[j] = dir.next_gaussian();
  } while (v.norm() == 0.0);
  v /= v.norm();

  KahanSum s1, s2, s4;
  for (std::int64_t t = 0; t < trials; ++t) {
    rng::Stream row(rng::derive(seed, static_cast<std::uint64_t>(t) + 1));
    double x = 0.0;
    for (std::int64_t j = 0; j < n; ++j) x += row.next_gaussian() * v[j];
    s1.add(x);
    s2.add(x * x);
    s4.add(x * x * x * x);
  }
  double m = static_cast<double>(trials);
  DirectionTestReport rep;
  rep.samples = trials;
  rep.mean = s1.value() / m;
  rep.variance = s2.value() / m - rep.mean * rep.mean;
  rep.fourth_moment = s4.value() / m;
  return rep;
}

}  // namespace covflow
