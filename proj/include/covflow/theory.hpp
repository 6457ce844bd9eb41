#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "covflow/scaling.hpp"

namespace covflow {

/// (q_aa, q_ab, q_bb) at one layer or flow time.
struct KernelTriple {
  double q_aa = 0.0;
  double q_ab = 0.0;
  double q_bb = 0.0;

  /// q_ab / sqrt(q_aa q_bb), clamped to [-1, 1].
  double correlation() const;
};

/// Counts how often a correlation had to be pulled back inside [-1, 1]
/// by more than float slack. Optional out-param on the kernel recursions.
struct ClampStats {
  std::int64_t events = 0;
  double worst_excess = 0.0;
};

/// Two nonzero inputs a, b with the derived scalars every kernel
/// computation starts from.
class InputPair {
 public:
  InputPair(Eigen::VectorXd a, Eigen::VectorXd b);

  /// Pair with q0_aa = q0_bb = 1 and q0_ab = c0, built in d >= 2 dims.
  static InputPair synthetic(double c0, std::int64_t d = 2);

  /// a, b ~ N(0, I_d) scaled to unit norm (resampled if <a,b> = 0).
  static InputPair random_unit(std::int64_t d, std::uint64_t seed);

  const Eigen::VectorXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }
  std::int64_t d() const { return a_.size(); }

  double norm_a() const { return norm_a_; }
  double norm_b() const { return norm_b_; }
  double zeta() const { return zeta_; }  // ||a|| ||b|| / d
  double q0_aa() const { return q0_aa_; }
  double q0_ab() const { return q0_ab_; }
  double q0_bb() const { return q0_bb_; }
  KernelTriple q0() const { return {q0_aa_, q0_ab_, q0_bb_}; }

 private:
  Eigen::VectorXd a_, b_;
  double norm_a_, norm_b_, zeta_, q0_aa_, q0_ab_, q0_bb_;
};

/// ReLU dual f(c) = (1/pi)(c asin c + sqrt(1-c^2)) + c/2; exact at the
/// endpoints. Throws std::domain_error beyond |c| > 1 + 1e-9.
double relu_dual(double c);

/// f'(c) = asin(c)/pi + 1/2 on (-1, 1). With endpoint_limit, returns the
/// one-sided limits 0 and 1 at c = -1, 1.
double relu_dual_prime(double c, bool endpoint_limit = false);

/// Entry l: (||a||^2/d) prod_{k<=l} (1 + alpha_{k,L}^2 / 2). Length L+1.
std::vector<double> variance_profile(const ScalingSequence& seq,
                                     std::int64_t L, double norm_sq_over_d);

/// Infinite-width kernel recursion; diagonals are the variance profiles
/// bitwise. Length L+1.
std::vector<KernelTriple> infinite_width_trace(const ScalingSequence& seq,
                                               std::int64_t L,
                                               const InputPair& pair,
                                               ClampStats* clamps = nullptr);

/// Last entry of infinite_width_trace without storing the trace.
KernelTriple infinite_width_final(const ScalingSequence& seq, std::int64_t L,
                                  const InputPair& pair,
                                  ClampStats* clamps = nullptr);

/// Depth limit of the kernel under a square-summable series: iterates the
/// recursion until the analytic tail bound drops below tol.
KernelTriple series_limit_kernel(const SeriesSpec& series,
                                 const InputPair& pair, double tol,
                                 std::int64_t max_steps = 2'000'000'000);

struct FlowSolution {
  std::vector<double> t_grid;        // ascending, t_grid[0] = 0
  std::vector<KernelTriple> values;  // one triple per grid point
  double step = 0.0;

  const KernelTriple& final() const { return values.back(); }
  /// Linear interpolation between grid points.
  KernelTriple at(double t) const;
};

/// Fixed-step RK4 on dq/dt = (e^{t/2}/2) zeta f(zeta^-1 e^{-t/2} q);
/// diagonals reported analytically as q0 e^{t/2}.
FlowSolution covariance_flow(const InputPair& pair, double step, double t_end);

/// Euler iterates of the flow on the grid t_l = partial_energy(l, L).
/// Requires a normalized sequence. Length L+1 (q_ab component).
std::vector<double> euler_trace(const ScalingSequence& seq, std::int64_t L,
                                const InputPair& pair);

/// Infinite-width MLP correlation map c_l = f(c_{l-1}). Length L+1.
std::vector<double> mlp_correlation_trace(double c0, std::int64_t L);

/// Width-first kernel recursions for the shaped architectures, used only
/// as plotting references (the proportional limit is random for these).
KernelTriple shaped_mlp_reference(const InputPair& pair, std::int64_t L);
KernelTriple shaped_resnet_reference(const InputPair& pair, std::int64_t L,
                                     double beta);

/// Hidden-layer weight variance (times n) that keeps the shaped-ReLU MLP
/// variance map critical: 1 / E[phi_L(Z)^2]. Equals 2 for plain ReLU.
double shaped_mlp_weight_gain(std::int64_t L);

}  // namespace covflow
