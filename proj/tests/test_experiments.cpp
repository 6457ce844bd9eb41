#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "covflow/experiments.hpp"

using namespace covflow;

namespace {

ArchConfig resnet_cfg() {
  ArchConfig cfg;
  cfg.arch = Arch::ScaledResNet;
  cfg.seq = ScalingSequence::uniform(0.5);
  return cfg;
}

StudyParams quick_params(std::int64_t trials) {
  StudyParams p;
  p.d = 2;
  p.trials = trials;
  p.seed = 42;
  p.workers = 1;
  p.flow_step = 1e-4;
  return p;
}

}  // namespace

TEST_CASE("log-log fit recovers an exact power law") {
  std::vector<double> xs, ys;
  for (int k = 3; k <= 10; ++k) {
    double x = std::pow(2.0, k);
    xs.push_back(x);
    ys.push_back(3.0 / x);
  }
  RateFit fit = fit_loglog(xs, ys, 0.0);
  REQUIRE(fit.valid);
  CHECK(fit.slope == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));

  // default drop removes the smallest 20% of x-values
  RateFit dropped = fit_loglog(xs, ys);
  CHECK(dropped.xs.size() == 7);
  CHECK(dropped.xs.front() == 16.0);
}

TEST_CASE("log-log fit degenerate inputs") {
  RateFit few = fit_loglog({1.0, 2.0}, {1.0, 0.5}, 0.0);
  CHECK_FALSE(few.valid);
  CHECK(!few.note.empty());
  RateFit neg = fit_loglog({1.0, 2.0, 4.0}, {1.0, -0.5, 0.2}, 0.0);
  CHECK_FALSE(neg.valid);
  RateFit flat = fit_loglog({2.0, 2.0, 2.0}, {1.0, 1.0, 1.0}, 0.0);
  CHECK_FALSE(flat.valid);
}

TEST_CASE("theory reference dispatch") {
  InputPair p = InputPair::synthetic(0.5);
  ArchConfig res = resnet_cfg();
  double flow_ref = theory_reference(res, p, 1e-4);
  CHECK(flow_ref == doctest::Approx(0.90725).epsilon(1e-4));

  ArchConfig lazy = res;
  lazy.seq = ScalingSequence::uniform(1.0);
  CHECK(theory_reference(lazy, p) == p.q0_ab());  // energy vanishes

  ArchConfig unstable = res;
  unstable.seq = ScalingSequence::uniform(0.3);
  CHECK_THROWS_AS(theory_reference(unstable, p), std::domain_error);

  ArchConfig series = res;
  series.seq = ScalingSequence::series(InversePower{1.5});
  double lim = series_limit_kernel(InversePower{1.5}, p, 1e-8).q_ab;
  CHECK(theory_reference(series, p) == lim);

  ArchConfig shaped;
  shaped.arch = Arch::ShapedMlp;
  CHECK_THROWS_AS(theory_reference(shaped, p), std::invalid_argument);
}

TEST_CASE("parallel trials are worker-count independent") {
  auto fn = [](std::int64_t t) { return std::sin(static_cast<double>(t)); };
  std::vector<double> one = parallel_trials(64, 1, fn);
  std::vector<double> many = parallel_trials(64, 4, fn);
  CHECK(one == many);

  auto boom = [](std::int64_t t) -> double {
    if (t == 17) throw std::runtime_error("boom");
    return 0.0;
  };
  CHECK_THROWS_AS(parallel_trials(32, 4, boom), std::runtime_error);
}

TEST_CASE("grid study smoke case") {
  InputPair p = InputPair::synthetic(0.5);
  SweepResult sweep = grid_study(resnet_cfg(), {8}, {2}, p, quick_params(2));
  REQUIRE(sweep.rows.size() == 1);
  const SweepRow& r = sweep.rows[0];
  CHECK(r.n == 8);
  CHECK(r.L == 2);
  CHECK(r.trials == 2);
  CHECK(std::isfinite(r.mean_q));
  CHECK(r.std_q >= 0.0);
  CHECK(std::isfinite(r.std_q));
  // bias-variance sanity: l2^2 >= (mean - theory)^2
  CHECK(r.l2_error * r.l2_error + 1e-12 >=
        (r.mean_q - r.theory_q) * (r.mean_q - r.theory_q));
  CHECK_THROWS_AS(grid_study(resnet_cfg(), {8}, {2}, p, quick_params(1)),
                  std::invalid_argument);
}

TEST_CASE("grid study attaches cell coordinates to instability errors") {
  InputPair p = InputPair::synthetic(0.5);
  ArchConfig cfg;
  cfg.arch = Arch::ScaledResNet;
  cfg.seq = ScalingSequence::custom_table({1e160, 1e160});
  try {
    grid_study(cfg, {8}, {2}, p, quick_params(2));
    FAIL("expected InstabilityError");
  } catch (const InstabilityError& e) {
    CHECK(std::string(e.what()).find("n=8") != std::string::npos);
  }
}

TEST_CASE("depth rate study is deterministic and near slope -1") {
  InputPair p = InputPair::synthetic(0.5);
  std::vector<std::int64_t> Ls = {16, 32, 64, 128, 256, 512};
  DepthRateResult a = depth_rate_study(Ls, p, 1e-5);
  DepthRateResult b = depth_rate_study(Ls, p, 1e-5);
  CHECK(a.delta == b.delta);  // bitwise
  REQUIRE(a.fit.valid);
  CHECK(a.fit.slope == doctest::Approx(-1.0).epsilon(0.1));
  for (std::size_t i = 2; i < a.delta.size(); ++i) {
    double ratio = a.delta[i] / a.delta[i - 1];
    CHECK(ratio > 0.4);
    CHECK(ratio < 0.6);
  }
  CHECK_THROWS_AS(depth_rate_study({8, 16}, p), std::invalid_argument);
  CHECK_THROWS_AS(depth_rate_study({32, 16, 8}, p), std::invalid_argument);
}

TEST_CASE("width rate study emits a table even for one width") {
  InputPair p = InputPair::synthetic(0.5);
  WidthRateResult res =
      width_rate_study(resnet_cfg(), {64}, 4, p, quick_params(50));
  REQUIRE(res.table.rows.size() == 1);
  CHECK_FALSE(res.fit.valid);
  CHECK(!res.fit.note.empty());
  CHECK_THROWS_AS(width_rate_study(resnet_cfg(), {64}, 4, p, quick_params(10)),
                  std::invalid_argument);
}

TEST_CASE("joint study shapes and reference flags") {
  InputPair p = InputPair::synthetic(0.5);
  std::vector<ArchConfig> archs = {resnet_cfg()};
  ArchConfig shaped;
  shaped.arch = Arch::ShapedMlp;
  archs.push_back(shaped);
  std::vector<JointRow> rows =
      joint_diagonal_study(archs, {8, 16}, p, quick_params(20));
  REQUIRE(rows.size() == 4);
  for (const JointRow& r : rows) {
    CHECK(r.q05 <= r.q25);
    CHECK(r.q25 <= r.q50);
    CHECK(r.q50 <= r.q75);
    CHECK(r.q75 <= r.q95);
    CHECK((r.arch == Arch::ScaledResNet) == !r.reference_only);
  }
  ArchConfig mlp;
  mlp.arch = Arch::Mlp;
  CHECK_THROWS_AS(joint_diagonal_study({mlp}, {8}, p, quick_params(20)),
                  std::invalid_argument);
}
