#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covflow/theory.hpp"

namespace covflow {

enum class Arch { ScaledResNet, Mlp, ShapedMlp, ShapedResNet };

/// One finite network: architecture, width, depth, input dimension, and
/// (for the scaled ResNet) the residual scaling sequence.
struct NetworkSpec {
  Arch arch = Arch::ScaledResNet;
  std::int64_t n = 1;
  std::int64_t L = 1;
  std::int64_t d = 1;
  std::optional<ScalingSequence> seq;  // required iff arch == ScaledResNet
  double beta = 0.5;                   // ShapedResNet skip weight

  void validate() const;
};

/// Pre-activation norm blew past the overflow guard at a known layer.
class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(std::int64_t layer, double norm_sq)
      : std::runtime_error("pre-activation overflow at layer " +
                           std::to_string(layer) +
                           " (||Y||^2 = " + std::to_string(norm_sq) + ")"),
        layer_(layer) {}
  InstabilityError(std::int64_t layer, const std::string& what_arg)
      : std::runtime_error(what_arg), layer_(layer) {}
  std::int64_t layer() const { return layer_; }

 private:
  std::int64_t layer_;
};

/// One Monte Carlo forward pass of a shared-weight input pair.
struct TrialTrace {
  std::vector<KernelTriple> layers;  // empirical q_{l,n}, length L+1
  std::vector<double> deviation;     // n^-1 ||Y_l - Ytilde_l||^2; empty unless
                                     // the auxiliary coupling was enabled
  std::int64_t fallback_events = 0;  // zero-norm direction fallbacks (aux)
  std::uint64_t seed = 0;
};

/// Propagates a and b through one sampled network (shared weights),
/// recording the empirical kernel triple at every layer. Weight rows are
/// generated from counter streams keyed by (seed, layer, row) and discarded.
TrialTrace simulate_pair(const NetworkSpec& spec, const InputPair& pair,
                         std::uint64_t seed);

/// simulate_pair for the scaled ResNet plus the coupled auxiliary process
/// Ytilde_l = Ytilde_{l-1} + alpha sqrt(q_{l-1}(a)/2) G_l(a) driven by the
/// same weight streams; fills TrialTrace::deviation.
TrialTrace simulate_with_auxiliary(const NetworkSpec& spec,
                                   const InputPair& pair, std::uint64_t seed);

/// ReLU for ScaledResNet/Mlp; z + relu(z)/sqrt(L) for the shaped variants.
double apply_activation(Arch arch, double z, std::int64_t L);

/// Moments of W v for a random unit direction v: a self-test that the
/// streamed weight rows act as exact N(0,1) coordinates.
struct DirectionTestReport {
  double mean = 0.0;
  double variance = 0.0;
  double fourth_moment = 0.0;
  std::int64_t samples = 0;
};

DirectionTestReport gaussian_direction_test(std::int64_t n,
                                            std::int64_t trials,
                                            std::uint64_t seed);

}  // namespace covflow
