#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covflow/nets.hpp"
#include "covflow/theory.hpp"

namespace covflow {

/// Architecture plus the per-arch knobs a study needs to build NetworkSpecs.
struct ArchConfig {
  Arch arch = Arch::ScaledResNet;
  std::optional<ScalingSequence> seq;  // ScaledResNet only
  double beta = 0.5;                   // ShapedResNet only

  NetworkSpec make_spec(std::int64_t n, std::int64_t L, std::int64_t d) const;
};

std::string arch_name(Arch arch);

struct SweepRow {
  std::int64_t n = 0;
  std::int64_t L = 0;
  std::int64_t trials = 0;
  double mean_q = 0.0;
  double std_q = 0.0;
  double l2_error = 0.0;  // sqrt(mean (q_final - theory_q)^2)
  double theory_q = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Least-squares fit of log(ys) vs log(xs), optionally dropping the
/// smallest x-values (pre-asymptotic regime).
struct RateFit {
  std::vector<double> xs;  // the points actually fitted
  std::vector<double> ys;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  bool valid = false;
  std::string note;  // why the fit is invalid, when it is
};

RateFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys,
                   double drop_fraction = 0.2);

/// Deterministic final-layer q_ab reference a Monte Carlo sweep is compared
/// against: the flow at t = 1 for normalized scaled ResNets, the limit
/// kernel for series truncations, q0_ab for uniform gamma > 1/2 (the depth
/// limit is the identity there).
double theory_reference(const ArchConfig& cfg, const InputPair& pair,
                        double flow_step = 1e-5, double series_tol = 1e-8);

/// Runs `trials` independent trials of fn (indexed 0..trials-1) on a small
/// worker pool and returns the per-trial final q_ab in trial order, so any
/// downstream reduction is worker-count independent.
std::vector<double> parallel_trials(
    std::int64_t trials, std::int64_t workers,
    const std::function<double(std::int64_t)>& fn);

struct StudyParams {
  std::int64_t d = 30;
  std::int64_t trials = 100;
  std::uint64_t seed = 42;
  std::int64_t workers = 1;
  double flow_step = 1e-5;
  double series_tol = 1e-8;
};

/// Width/depth sweep: mean/std/L2 of final q_ab per (n, L) cell vs the
/// deterministic reference.
SweepResult grid_study(const ArchConfig& cfg,
                       const std::vector<std::int64_t>& n_list,
                       const std::vector<std::int64_t>& L_list,
                       const InputPair& pair, const StudyParams& params);

struct DepthRateResult {
  std::vector<std::int64_t> L_list;
  std::vector<double> delta;  // |deep kernel at depth L - flow at t = 1|
  RateFit fit;
};

/// Deterministic depth-rate table for UniformPower(1/2): no sampling.
DepthRateResult depth_rate_study(const std::vector<std::int64_t>& L_list,
                                 const InputPair& pair,
                                 double flow_step = 1e-6);

struct WidthRateResult {
  SweepResult table;
  RateFit fit;  // log L2 error vs log n
};

WidthRateResult width_rate_study(const ArchConfig& cfg,
                                 const std::vector<std::int64_t>& n_list,
                                 std::int64_t L, const InputPair& pair,
                                 const StudyParams& params);

struct JointRow {
  Arch arch = Arch::ScaledResNet;
  std::int64_t n = 0;  // proportional regime: L = n
  std::int64_t trials = 0;
  double mean = 0.0;
  double std_dev = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  double reference = 0.0;
  bool reference_only = false;  // width-first recursion, not a proven limit
};

/// Proportional-regime (L = n) distribution summaries per architecture.
std::vector<JointRow> joint_diagonal_study(
    const std::vector<ArchConfig>& archs,
    const std::vector<std::int64_t>& n_list, const InputPair& pair,
    const StudyParams& params);

}  // namespace covflow
