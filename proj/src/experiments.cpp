#include "covflow/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "covflow/rng.hpp"

namespace covflow {

NetworkSpec ArchConfig::make_spec(std::int64_t n, std::int64_t L,
                                  std::int64_t d) const {
  NetworkSpec spec;
  spec.arch = arch;
  spec.n = n;
  spec.L = L;
  spec.d = d;
  spec.seq = seq;
  spec.beta = beta;
  spec.validate();
  return spec;
}

std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::ScaledResNet: return "scaled_resnet";
    case Arch::Mlp: return "mlp";
    case Arch::ShapedMlp: return "shaped_mlp";
    case Arch::ShapedResNet: return "shaped_resnet";
  }
  return "unknown";
}

RateFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys,
                   double drop_fraction) {
  RateFit fit;
  if (xs.size() != ys.size()) {
    fit.note = "xs and ys differ in length";
    return fit;
  }
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) {
    fit.note = "drop_fraction must lie in [0, 1)";
    return fit;
  }

  std::vector<std::pair<double, double>> pts;
  pts.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      fit.note = "log-log fit needs strictly positive points";
      return fit;
    }
    pts.emplace_back(xs[i], ys[i]);
  }
  std::sort(pts.begin(), pts.end());
  auto drop = static_cast<std::size_t>(
      std::floor(drop_fraction * static_cast<double>(pts.size())));
  pts.erase(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(drop));
  if (pts.size() < 3) {
    fit.note = "need at least 3 points after dropping the pre-asymptotic ones";
    return fit;
  }

  double n = static_cast<double>(pts.size());
  KahanSum sx, sy, sxx, sxy;
  for (const auto& [x, y] : pts) {
    double lx = std::log(x);
    double ly = std::log(y);
    fit.xs.push_back(x);
    fit.ys.push_back(y);
    sx.add(lx);
    sy.add(ly);
    sxx.add(lx * lx);
    sxy.add(lx * ly);
  }
  double mx = sx.value() / n;
  double my = sy.value() / n;
  double var_x = sxx.value() / n - mx * mx;
  if (!(var_x > 0.0)) {
    fit.note = "all x-values coincide; slope undefined";
    return fit;
  }
  double cov_xy = sxy.value() / n - mx * my;
  fit.slope = cov_xy / var_x;
  fit.intercept = my - fit.slope * mx;

  KahanSum ss_res, ss_tot;
  for (const auto& [x, y] : pts) {
    double ly = std::log(y);
    double pred = fit.intercept + fit.slope * std::log(x);
    ss_res.add((ly - pred) * (ly - pred));
    ss_tot.add((ly - my) * (ly - my));
  }
  fit.r_squared =
      ss_tot.value() > 0.0 ? 1.0 - ss_res.value() / ss_tot.value() : 1.0;
  fit.r_squared = std::clamp(fit.r_squared, 0.0, 1.0);
  fit.valid = true;
  return fit;
}

double theory_reference(const ArchConfig& cfg, const InputPair& pair,
                        double flow_step, double series_tol) {
  if (cfg.arch != Arch::ScaledResNet)
    throw std::invalid_argument(
        "theory_reference: only the scaled ResNet has a deterministic "
        "joint limit; the shaped references are per-depth");
  const ScalingSequence& seq = *cfg.seq;
  if (const auto* s = seq.as_series())
    return series_limit_kernel(*s, pair, series_tol).q_ab;
  if (const auto* u = seq.as_uniform()) {
    if (u->gamma < 0.5)
      throw std::domain_error(
          "theory_reference: uniform gamma < 1/2 is unstable; no limit");
    if (u->gamma > 0.5) return pair.q0_ab();  // total energy vanishes
  }
  // gamma = 1/2 and custom normalized sequences share the flow limit.
  return covariance_flow(pair, flow_step, 1.0).final().q_ab;
}

std::vector<double> parallel_trials(
    std::int64_t trials, std::int64_t workers,
    const std::function<double(std::int64_t)>& fn) {
  if (trials < 1) throw std::invalid_argument("parallel_trials: trials < 1");
  std::vector<double> out(static_cast<std::size_t>(trials));
  workers = std::clamp<std::int64_t>(workers, 1, trials);
  if (workers == 1) {
    for (std::int64_t t = 0; t < trials; ++t)
      out[static_cast<std::size_t>(t)] = fn(t);
    return out;
  }

  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      std::int64_t t = next.fetch_add(1, std::memory_order_relaxed);
      if (t >= trials) return;
      try {
        out[static_cast<std::size_t>(t)] = fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(trials, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

namespace {

struct SampleStats {
  double mean = 0.0;
  double std_dev = 0.0;
};

SampleStats sample_stats(const std::vector<double>& xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  double n = static_cast<double>(xs.size());
  SampleStats st;
  st.mean = s.value() / n;
  if (xs.size() > 1) {
    KahanSum dev;
    for (double x : xs) dev.add((x - st.mean) * (x - st.mean));
    st.std_dev = std::sqrt(dev.value() / (n - 1.0));
  }
  return st;
}

double l2_against(const std::vector<double>& xs, double ref) {
  KahanSum s;
  for (double x : xs) s.add((x - ref) * (x - ref));
  return std::sqrt(s.value() / static_cast<double>(xs.size()));
}

/// Nearest-rank quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::uint64_t cell_key(std::uint64_t seed, Arch arch, std::int64_t n,
                       std::int64_t L) {
  std::uint64_t k = rng::derive(seed, static_cast<std::uint64_t>(arch) + 1);
  k = rng::derive(k, static_cast<std::uint64_t>(n));
  return rng::derive(k, static_cast<std::uint64_t>(L));
}

std::vector<double> cell_trials(const ArchConfig& cfg, std::int64_t n,
                                std::int64_t L, const InputPair& pair,
                                const StudyParams& params) {
  NetworkSpec spec = cfg.make_spec(n, L, params.d);
  std::uint64_t key = cell_key(params.seed, cfg.arch, n, L);
  try {
    return parallel_trials(params.trials, params.workers, [&](std::int64_t t) {
      std::uint64_t trial_seed = rng::derive(key, static_cast<std::uint64_t>(t));
      return simulate_pair(spec, pair, trial_seed).layers.back().q_ab;
    });
  } catch (const InstabilityError& e) {
    throw InstabilityError(e.layer(),
                           std::string(e.what()) + " [grid cell n=" +
                               std::to_string(n) + ", L=" + std::to_string(L) +
                               "]");
  }
}

}  // namespace

SweepResult grid_study(const ArchConfig& cfg,
                       const std::vector<std::int64_t>& n_list,
                       const std::vector<std::int64_t>& L_list,
                       const InputPair& pair, const StudyParams& params) {
  if (params.trials < 2)
    throw std::invalid_argument("grid_study: trials must be >= 2");
  if (n_list.empty() || L_list.empty())
    throw std::invalid_argument("grid_study: empty grid");

  double ref = theory_reference(cfg, pair, params.flow_step, params.series_tol);
  SweepResult result;
  for (std::int64_t n : n_list) {
    for (std::int64_t L : L_list) {
      std::vector<double> qs = cell_trials(cfg, n, L, pair, params);
      SampleStats st = sample_stats(qs);
      result.rows.push_back({n, L, params.trials, st.mean, st.std_dev,
                             l2_against(qs, ref), ref});
    }
  }
  return result;
}

DepthRateResult depth_rate_study(const std::vector<std::int64_t>& L_list,
                                 const InputPair& pair, double flow_step) {
  if (L_list.size() < 3)
    throw std::invalid_argument("depth_rate_study: need >= 3 depths");
  if (!std::is_sorted(L_list.begin(), L_list.end()))
    throw std::invalid_argument("depth_rate_study: depths must ascend");

  ScalingSequence seq = ScalingSequence::uniform(0.5);
  double limit = covariance_flow(pair, flow_step, 1.0).final().q_ab;
  DepthRateResult result;
  result.L_list = L_list;
  std::vector<double> xs;
  for (std::int64_t L : L_list) {
    double deep = infinite_width_final(seq, L, pair).q_ab;
    result.delta.push_back(std::fabs(deep - limit));
    xs.push_back(static_cast<double>(L));
  }
  result.fit = fit_loglog(xs, result.delta);
  return result;
}

WidthRateResult width_rate_study(const ArchConfig& cfg,
                                 const std::vector<std::int64_t>& n_list,
                                 std::int64_t L, const InputPair& pair,
                                 const StudyParams& params) {
  if (params.trials < 50)
    throw std::invalid_argument("width_rate_study: trials must be >= 50");
  if (n_list.empty())
    throw std::invalid_argument("width_rate_study: empty width list");

  double ref = theory_reference(cfg, pair, params.flow_step, params.series_tol);
  WidthRateResult result;
  std::vector<double> xs, ys;
  for (std::int64_t n : n_list) {
    std::vector<double> qs = cell_trials(cfg, n, L, pair, params);
    SampleStats st = sample_stats(qs);
    double l2 = l2_against(qs, ref);
    result.table.rows.push_back({n, L, params.trials, st.mean, st.std_dev,
                                 l2, ref});
    xs.push_back(static_cast<double>(n));
    ys.push_back(l2);
  }
  result.fit = fit_loglog(xs, ys);
  return result;
}

std::vector<JointRow> joint_diagonal_study(
    const std::vector<ArchConfig>& archs,
    const std::vector<std::int64_t>& n_list, const InputPair& pair,
    const StudyParams& params) {
  if (archs.empty() || n_list.empty())
    throw std::invalid_argument("joint_diagonal_study: empty inputs");
  for (const ArchConfig& cfg : archs)
    if (cfg.arch == Arch::Mlp)
      throw std::invalid_argument(
          "joint_diagonal_study: the plain MLP degenerates in this regime; "
          "use scaled_resnet, shaped_mlp, or shaped_resnet");

  std::vector<JointRow> rows;
  for (const ArchConfig& cfg : archs) {
    double flow_ref = cfg.arch == Arch::ScaledResNet
                          ? theory_reference(cfg, pair, params.flow_step,
                                             params.series_tol)
                          : 0.0;
    for (std::int64_t n : n_list) {
      std::vector<double> qs = cell_trials(cfg, n, n, pair, params);
      SampleStats st = sample_stats(qs);
      std::vector<double> sorted = qs;
      std::sort(sorted.begin(), sorted.end());
      JointRow row;
      row.arch = cfg.arch;
      row.n = n;
      row.trials = params.trials;
      row.mean = st.mean;
      row.std_dev = st.std_dev;
      row.q05 = quantile_sorted(sorted, 0.05);
      row.q25 = quantile_sorted(sorted, 0.25);
      row.q50 = quantile_sorted(sorted, 0.50);
      row.q75 = quantile_sorted(sorted, 0.75);
      row.q95 = quantile_sorted(sorted, 0.95);
      switch (cfg.arch) {
        case Arch::ScaledResNet:
          row.reference = flow_ref;
          row.reference_only = false;
          break;
        case Arch::ShapedMlp:
          row.reference = shaped_mlp_reference(pair, n).q_ab;
          row.reference_only = true;
          break;
        case Arch::ShapedResNet:
          row.reference = shaped_resnet_reference(pair, n, cfg.beta).q_ab;
          row.reference_only = true;
          break;
        case Arch::Mlp:
          break;  // rejected above
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace covflow
