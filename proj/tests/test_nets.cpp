#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "covflow/nets.hpp"
#include "covflow/rng.hpp"

using namespace covflow;

namespace {

NetworkSpec resnet_spec(std::int64_t n, std::int64_t L, std::int64_t d) {
  NetworkSpec spec;
  spec.arch = Arch::ScaledResNet;
  spec.n = n;
  spec.L = L;
  spec.d = d;
  spec.seq = ScalingSequence::uniform(0.5);
  return spec;
}

}  // namespace

TEST_CASE("activation examples") {
  CHECK(apply_activation(Arch::ScaledResNet, -1.0, 4) == 0.0);
  CHECK(apply_activation(Arch::Mlp, 2.0, 4) == 2.0);
  CHECK(apply_activation(Arch::ShapedMlp, -1.0, 4) == -1.0);
  CHECK(apply_activation(Arch::ShapedResNet, 2.0, 4) == 3.0);
}

TEST_CASE("network spec validation") {
  NetworkSpec bad = resnet_spec(0, 4, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  NetworkSpec no_seq;
  no_seq.arch = Arch::ScaledResNet;
  no_seq.n = 4;
  no_seq.L = 4;
  no_seq.d = 2;
  CHECK_THROWS_AS(no_seq.validate(), std::invalid_argument);
  NetworkSpec shaped;
  shaped.arch = Arch::ShapedResNet;
  shaped.n = 4;
  shaped.L = 4;
  shaped.d = 2;
  shaped.beta = 1.0;
  CHECK_THROWS_AS(shaped.validate(), std::invalid_argument);
}

TEST_CASE("weight sharing: b = a makes the passes identical") {
  InputPair same = InputPair::synthetic(1.0);
  for (Arch arch : {Arch::ScaledResNet, Arch::Mlp, Arch::ShapedMlp,
                    Arch::ShapedResNet}) {
    NetworkSpec spec = resnet_spec(64, 8, 2);
    spec.arch = arch;
    TrialTrace tr = simulate_pair(spec, same, 77);
    for (const KernelTriple& k : tr.layers) {
      CHECK(k.q_ab == k.q_aa);  // bitwise
      CHECK(k.q_bb == k.q_aa);
    }
  }
}

TEST_CASE("determinism and seed sensitivity") {
  InputPair p = InputPair::synthetic(0.5);
  NetworkSpec spec = resnet_spec(32, 8, 2);
  TrialTrace t1 = simulate_pair(spec, p, 5);
  TrialTrace t2 = simulate_pair(spec, p, 5);
  TrialTrace t3 = simulate_pair(spec, p, 6);
  bool identical = true, differs = false;
  for (std::size_t l = 0; l < t1.layers.size(); ++l) {
    if (t1.layers[l].q_ab != t2.layers[l].q_ab) identical = false;
    if (t1.layers[l].q_ab != t3.layers[l].q_ab) differs = true;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("positive homogeneity of the forward pass") {
  Eigen::VectorXd a(3), b(3);
  a << 1.0, -2.0, 0.5;
  b << 0.5, 1.0, -1.0;
  InputPair p(a, b);
  InputPair scaled(2.0 * a, 2.0 * b);
  NetworkSpec spec = resnet_spec(64, 8, 3);
  TrialTrace t1 = simulate_pair(spec, p, 31);
  TrialTrace t2 = simulate_pair(spec, scaled, 31);
  for (std::size_t l = 0; l < t1.layers.size(); ++l) {
    CHECK(t2.layers[l].q_aa ==
          doctest::Approx(4.0 * t1.layers[l].q_aa).epsilon(1e-12));
    CHECK(t2.layers[l].q_ab ==
          doctest::Approx(4.0 * t1.layers[l].q_ab).epsilon(1e-12));
  }
}

TEST_CASE("layer-0 covariance is unbiased") {
  InputPair p = InputPair::random_unit(30, 2024);
  NetworkSpec spec = resnet_spec(16, 1, 30);
  const int T = 4000;
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < T; ++t) {
    double q = simulate_pair(spec, p, rng::derive(1, t)).layers[0].q_ab;
    sum += q;
    sum_sq += q * q;
  }
  double mean = sum / T;
  double se = std::sqrt((sum_sq / T - mean * mean) / (T - 1));
  CHECK(std::fabs(mean - p.q0_ab()) < 3.0 * se);
}

TEST_CASE("empirical variance matches the profile") {
  InputPair p = InputPair::synthetic(0.5);
  NetworkSpec spec = resnet_spec(128, 8, 2);
  std::vector<double> prof =
      variance_profile(*spec.seq, spec.L, p.q0_aa());
  const int T = 400;
  std::vector<double> sum(prof.size(), 0.0), sum_sq(prof.size(), 0.0);
  for (int t = 0; t < T; ++t) {
    TrialTrace tr = simulate_pair(spec, p, rng::derive(9, t));
    for (std::size_t l = 0; l < prof.size(); ++l) {
      sum[l] += tr.layers[l].q_aa;
      sum_sq[l] += tr.layers[l].q_aa * tr.layers[l].q_aa;
    }
  }
  for (std::size_t l = 0; l < prof.size(); ++l) {
    double mean = sum[l] / T;
    double se = std::sqrt((sum_sq[l] / T - mean * mean) / (T - 1));
    CHECK(std::fabs(mean - prof[l]) < 3.5 * se);
  }
}

TEST_CASE("auxiliary process basics") {
  InputPair p = InputPair::synthetic(0.5);
  NetworkSpec spec = resnet_spec(64, 8, 2);
  TrialTrace tr = simulate_with_auxiliary(spec, p, 3);
  REQUIRE(tr.deviation.size() == 9);
  CHECK(tr.deviation[0] == 0.0);  // Ytilde_0 = Y_0 exactly
  for (double dev : tr.deviation) CHECK(dev >= 0.0);
  CHECK(tr.fallback_events == 0);

  // the real pass must match simulate_pair bitwise (same streams)
  TrialTrace plain = simulate_pair(spec, p, 3);
  for (std::size_t l = 0; l < plain.layers.size(); ++l)
    CHECK(plain.layers[l].q_ab == tr.layers[l].q_ab);

  NetworkSpec mlp = spec;
  mlp.arch = Arch::Mlp;
  mlp.seq.reset();
  CHECK_THROWS_AS(simulate_with_auxiliary(mlp, p, 3), std::invalid_argument);
}

TEST_CASE("instability guard names the layer") {
  InputPair p = InputPair::synthetic(0.5);
  NetworkSpec spec;
  spec.arch = Arch::ScaledResNet;
  spec.n = 8;
  spec.L = 2;
  spec.d = 2;
  spec.seq = ScalingSequence::custom_table({1e160, 1e160});
  try {
    simulate_pair(spec, p, 1);
    FAIL("expected InstabilityError");
  } catch (const InstabilityError& e) {
    CHECK(e.layer() >= 1);
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("gaussian direction test moments") {
  DirectionTestReport rep = gaussian_direction_test(256, 20000, 8);
  CHECK(rep.samples == 20000);
  CHECK(std::fabs(rep.mean) < 0.03);
  CHECK(rep.variance == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rep.fourth_moment == doctest::Approx(3.0).epsilon(0.1));
  CHECK_THROWS_AS(gaussian_direction_test(4, 100, 1), std::invalid_argument);
}
