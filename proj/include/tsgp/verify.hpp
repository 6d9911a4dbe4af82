#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsgp/transformer.hpp"

namespace tsgp {

struct GradProbe {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  std::vector<GradProbe> probes;
  double max_rel_error = 0.0;
};

inline constexpr double kGradCheckStep = 1e-5;
/// Denominator floor of the relative error, keeps near-zero gradients from
/// amplifying central-difference roundoff.
inline constexpr double kGradCheckFloor = 1e-5;

/// |a - n| / max(|a|, |n|, kGradCheckFloor)
double gradient_rel_error(double analytic, double numeric);

/// Compares backprop gradients of the batch mean loss with central
/// differences at `probes` parameters drawn uniformly over all scalars.
GradCheckResult gradient_check(const ModelParams& model, std::span<const Example> batch,
                               int probes, std::uint64_t seed, double step = kGradCheckStep);

/// Random input, decoder sequence and SD valid for `model`.
Example random_example(const ModelParams& model, int input_len, int output_len, Rng& rng);

struct CausalityResult {
  int positions = 0;
  /// Probes where an earlier logits row changed.
  int violations = 0;
  /// Largest |attention row sum - 1| seen.
  double max_attention_error = 0.0;
};

/// Replaces the decoder token at `positions` random indices and checks that
/// the logits rows before that token stay bit-identical.
CausalityResult causality_probe(const ModelParams& model, int positions, std::uint64_t seed);

struct RoundTripResult {
  bool bytes_identical = false;
  bool logits_identical = false;
};

/// bytes -> model -> bytes, plus logits of the reloaded model on a random
/// example.
RoundTripResult checkpoint_round_trip(const ModelParams& model, std::uint64_t seed);

}  // namespace tsgp
