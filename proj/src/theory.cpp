#include "covflow/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "covflow/rng.hpp"

namespace covflow {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCorrSlack = 1e-9;

double clamp_corr(double c, ClampStats* clamps) {
  double excess = std::fabs(c) - 1.0;
  if (excess > 0.0) {
    if (clamps && excess > kCorrSlack) {
      clamps->events += 1;
      clamps->worst_excess = std::max(clamps->worst_excess, excess);
    }
    return c > 0.0 ? 1.0 : -1.0;
  }
  return c;
}

}  // namespace

double KernelTriple::correlation() const {
  return clamp_corr(q_ab / std::sqrt(q_aa * q_bb), nullptr);
}

InputPair::InputPair(Eigen::VectorXd a, Eigen::VectorXd b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() == 0 || a_.size() != b_.size())
    throw std::invalid_argument("InputPair: a and b must share a dimension");
  norm_a_ = a_.norm();
  norm_b_ = b_.norm();
  if (norm_a_ == 0.0 || norm_b_ == 0.0)
    throw std::invalid_argument("InputPair: inputs must be nonzero");
  double d = static_cast<double>(a_.size());
  zeta_ = norm_a_ * norm_b_ / d;
  q0_aa_ = norm_a_ * norm_a_ / d;
  q0_bb_ = norm_b_ * norm_b_ / d;
  q0_ab_ = a_.dot(b_) / d;
  if (q0_ab_ == 0.0)
    throw std::invalid_argument("InputPair: <a, b> must be nonzero");
}

InputPair InputPair::synthetic(double c0, std::int64_t d) {
  if (!(std::fabs(c0) <= 1.0) || c0 == 0.0)
    throw std::invalid_argument("synthetic: need c0 in [-1,1] \\ {0}");
  if (d < 2) throw std::invalid_argument("synthetic: need d >= 2");
  const double s = std::sqrt(static_cast<double>(d));
  Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  a[0] = s;
  b[0] = s * c0;
  b[1] = s * std::sqrt(1.0 - c0 * c0);
  return InputPair(std::move(a), std::move(b));
}

InputPair InputPair::random_unit(std::int64_t d, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("random_unit: d must be >= 1");
  rng::Stream s(rng::derive(seed, 0x696E707574ull));  // tag: "input"
  for (;;) {
    Eigen::VectorXd a(d), b(d);
    for (std::int64_t i = 0; i < d; ++i) a[i] = s.next_gaussian();
    for (std::int64_t i = 0; i < d; ++i) b[i] = s.next_gaussian();
    if (a.norm() == 0.0 || b.norm() == 0.0) continue;
    a /= a.norm();
    b /= b.norm();
    if (a.dot(b) == 0.0) continue;
    return InputPair(std::move(a), std::move(b));
  }
}

double relu_dual(double c) {
  if (std::fabs(c) > 1.0 + kCorrSlack)
    throw std::domain_error("relu_dual: |c| > 1");
  if (c >= 1.0) return 1.0;
  if (c <= -1.0) return 0.0;
  return (c * std::asin(c) + std::sqrt(1.0 - c * c)) / kPi + 0.5 * c;
}

double relu_dual_prime(double c, bool endpoint_limit) {
  if (std::fabs(c) >= 1.0) {
    if (endpoint_limit && c >= 1.0) return 1.0;
    if (endpoint_limit && c <= -1.0) return 0.0;
    throw std::domain_error("relu_dual_prime: |c| >= 1");
  }
  return std::asin(c) / kPi + 0.5;
}

std::vector<double> variance_profile(const ScalingSequence& seq,
                                     std::int64_t L, double norm_sq_over_d) {
  if (L < 0) throw std::out_of_range("variance_profile: L must be >= 0");
  if (!(norm_sq_over_d > 0.0))
    throw std::invalid_argument("variance_profile: ||a||^2/d must be > 0");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(L) + 1);
  double q = norm_sq_over_d;
  out.push_back(q);
  for (std::int64_t l = 1; l <= L; ++l) {
    double a = alpha_at(seq, l, L);
    q *= 1.0 + 0.5 * a * a;
    out.push_back(q);
  }
  return out;
}

namespace {

// Shared recursion body: advances (q_ab) one layer given the previous
// diagonal values, which the caller takes from the variance profiles.
inline double kernel_step(double q_ab, double alpha_sq, double qa_prev,
                          double qb_prev, ClampStats* clamps) {
  double c = clamp_corr(q_ab / std::sqrt(qa_prev * qb_prev), clamps);
  return q_ab + alpha_sq * std::sqrt(0.5 * qa_prev) *
                    std::sqrt(0.5 * qb_prev) * relu_dual(c);
}

}  // namespace

std::vector<KernelTriple> infinite_width_trace(const ScalingSequence& seq,
                                               std::int64_t L,
                                               const InputPair& pair,
                                               ClampStats* clamps) {
  std::vector<double> pa = variance_profile(seq, L, pair.q0_aa());
  std::vector<double> pb = variance_profile(seq, L, pair.q0_bb());
  std::vector<KernelTriple> out;
  out.reserve(static_cast<std::size_t>(L) + 1);
  double q_ab = pair.q0_ab();
  out.push_back({pa[0], q_ab, pb[0]});
  for (std::int64_t l = 1; l <= L; ++l) {
    double a = alpha_at(seq, l, L);
    q_ab = kernel_step(q_ab, a * a, pa[static_cast<std::size_t>(l - 1)],
                       pb[static_cast<std::size_t>(l - 1)], clamps);
    out.push_back({pa[static_cast<std::size_t>(l)], q_ab,
                   pb[static_cast<std::size_t>(l)]});
  }
  return out;
}

KernelTriple infinite_width_final(const ScalingSequence& seq, std::int64_t L,
                                  const InputPair& pair, ClampStats* clamps) {
  double qa = pair.q0_aa();
  double qb = pair.q0_bb();
  double q_ab = pair.q0_ab();
  for (std::int64_t l = 1; l <= L; ++l) {
    double a = alpha_at(seq, l, L);
    q_ab = kernel_step(q_ab, a * a, qa, qb, clamps);
    qa *= 1.0 + 0.5 * a * a;
    qb *= 1.0 + 0.5 * a * a;
  }
  return {qa, q_ab, qb};
}

KernelTriple series_limit_kernel(const SeriesSpec& series,
                                 const InputPair& pair, double tol,
                                 std::int64_t max_steps) {
  if (!(tol > 0.0))
    throw std::invalid_argument("series_limit_kernel: tol must be > 0");
  if (!series_square_summable(series))
    throw std::domain_error("series_limit_kernel: series is not in l2");

  const auto* explicit_list = std::get_if<Explicit>(&series);
  double qa = pair.q0_aa();
  double qb = pair.q0_bb();
  double q_ab = pair.q0_ab();
  for (std::int64_t l = 1;; ++l) {
    if (explicit_list &&
        l > static_cast<std::int64_t>(explicit_list->values.size()))
      return {qa, q_ab, qb};  // finite series: exact limit reached

    double z = series_term(series, l);
    q_ab = kernel_step(q_ab, z * z, qa, qb, nullptr);
    qa *= 1.0 + 0.5 * z * z;
    qb *= 1.0 + 0.5 * z * z;

    if (auto tail = series_tail_sq(series, l)) {
      // Remaining increments are bounded by (1/2) sqrt(qa qb) e^{tail/2} tail.
      double bound = 0.5 * std::sqrt(qa * qb) * std::exp(0.5 * *tail) * *tail;
      if (bound < tol) return {qa, q_ab, qb};
    }
    if (l >= max_steps)
      throw std::runtime_error(
          "series_limit_kernel: tail bound did not reach tol within the "
          "step budget (series converges too slowly for this tolerance)");
  }
}

namespace {

// Flow right-hand side F(t, q) = (e^{t/2}/2) zeta f(zeta^-1 e^{-t/2} q).
// The argument of f is exactly the correlation c_t, so no division by c.
inline double flow_rhs(double t, double q, double zeta) {
  double e = std::exp(0.5 * t);
  double c = clamp_corr(q / (zeta * e), nullptr);
  return 0.5 * e * zeta * relu_dual(c);
}

}  // namespace

KernelTriple FlowSolution::at(double t) const {
  if (t <= t_grid.front()) return values.front();
  if (t >= t_grid.back()) return values.back();
  auto it = std::upper_bound(t_grid.begin(), t_grid.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - t_grid.begin());
  std::size_t lo = hi - 1;
  double w = (t - t_grid[lo]) / (t_grid[hi] - t_grid[lo]);
  const KernelTriple& x = values[lo];
  const KernelTriple& y = values[hi];
  return {x.q_aa + w * (y.q_aa - x.q_aa), x.q_ab + w * (y.q_ab - x.q_ab),
          x.q_bb + w * (y.q_bb - x.q_bb)};
}

FlowSolution covariance_flow(const InputPair& pair, double step,
                             double t_end) {
  if (!(step > 0.0)) throw std::domain_error("covariance_flow: step <= 0");
  if (!(t_end > 0.0 && t_end <= 1.0))
    throw std::domain_error("covariance_flow: t_end must be in (0, 1]");

  const double zeta = pair.zeta();
  auto n_steps = static_cast<std::int64_t>(std::ceil(t_end / step - 1e-9));
  FlowSolution sol;
  sol.step = step;
  sol.t_grid.reserve(static_cast<std::size_t>(n_steps) + 1);
  sol.values.reserve(static_cast<std::size_t>(n_steps) + 1);

  double q = pair.q0_ab();
  double t = 0.0;
  sol.t_grid.push_back(0.0);
  sol.values.push_back(pair.q0());
  for (std::int64_t i = 0; i < n_steps; ++i) {
    double h = std::min(step, t_end - t);
    double k1 = flow_rhs(t, q, zeta);
    double k2 = flow_rhs(t + 0.5 * h, q + 0.5 * h * k1, zeta);
    double k3 = flow_rhs(t + 0.5 * h, q + 0.5 * h * k2, zeta);
    double k4 = flow_rhs(t + h, q + h * k3, zeta);
    q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = (i + 1 == n_steps) ? t_end : t + h;
    double e = std::exp(0.5 * t);
    sol.t_grid.push_back(t);
    sol.values.push_back({pair.q0_aa() * e, q, pair.q0_bb() * e});
  }
  return sol;
}

std::vector<double> euler_trace(const ScalingSequence& seq, std::int64_t L,
                                const InputPair& pair) {
  StabilityReport rep =
      stability_report(seq, L, L, seq.default_normalization_tol());
  if (!rep.is_normalized)
    throw std::domain_error("euler_trace: sequence not normalized at depth L");

  std::vector<double> t = energy_grid(seq, L);
  const double zeta = pair.zeta();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(L) + 1);
  double q = pair.q0_ab();
  out.push_back(q);
  for (std::int64_t l = 1; l <= L; ++l) {
    double a = alpha_at(seq, l, L);
    q += a * a * flow_rhs(t[static_cast<std::size_t>(l - 1)], q, zeta);
    out.push_back(q);
  }
  return out;
}

std::vector<double> mlp_correlation_trace(double c0, std::int64_t L) {
  if (!(std::fabs(c0) <= 1.0))
    throw std::domain_error("mlp_correlation_trace: |c0| > 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(L) + 1);
  double c = c0;
  out.push_back(c);
  for (std::int64_t l = 1; l <= L; ++l) {
    c = relu_dual(c);
    out.push_back(c);
  }
  return out;
}

double shaped_mlp_weight_gain(std::int64_t L) {
  double rl = 1.0 / std::sqrt(static_cast<double>(L));
  return 1.0 / (1.0 + rl + 0.5 * rl * rl);
}

namespace {

// E[phi_L(U) phi_L(V)] for centered Gaussians with variances (qa, qb) and
// correlation c, phi_L(z) = z + relu(z)/sqrt(L).
inline double shaped_cross_moment(double qa, double qb, double c,
                                  std::int64_t L) {
  double rl = 1.0 / std::sqrt(static_cast<double>(L));
  double s = std::sqrt(qa * qb);
  return s * (c * (1.0 + rl) + 0.5 * rl * rl * relu_dual(c));
}

}  // namespace

KernelTriple shaped_mlp_reference(const InputPair& pair, std::int64_t L) {
  double gain = shaped_mlp_weight_gain(L);
  double qa = pair.q0_aa(), qb = pair.q0_bb(), qab = pair.q0_ab();
  double rl = 1.0 / std::sqrt(static_cast<double>(L));
  double diag_factor = gain * (1.0 + rl + 0.5 * rl * rl);  // = 1 by choice
  for (std::int64_t l = 1; l <= L; ++l) {
    double c = clamp_corr(qab / std::sqrt(qa * qb), nullptr);
    qab = gain * shaped_cross_moment(qa, qb, c, L);
    qa *= diag_factor;
    qb *= diag_factor;
  }
  return {qa, qab, qb};
}

KernelTriple shaped_resnet_reference(const InputPair& pair, std::int64_t L,
                                     double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw std::invalid_argument("shaped_resnet_reference: beta in (0,1)");
  double b2 = beta * beta;
  double rl = 1.0 / std::sqrt(static_cast<double>(L));
  double qa = pair.q0_aa(), qb = pair.q0_bb(), qab = pair.q0_ab();
  for (std::int64_t l = 1; l <= L; ++l) {
    double c = clamp_corr(qab / std::sqrt(qa * qb), nullptr);
    qab = b2 * qab + (1.0 - b2) * shaped_cross_moment(qa, qb, c, L);
    double diag = 1.0 + rl + 0.5 * rl * rl;
    qa = b2 * qa + (1.0 - b2) * qa * diag;
    qb = b2 * qb + (1.0 - b2) * qb * diag;
  }
  return {qa, qab, qb};
}

}  // namespace covflow
