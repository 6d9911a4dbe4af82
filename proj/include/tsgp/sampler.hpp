#pragma once

#include <vector>

#include "tsgp/transformer.hpp"

namespace tsgp {

/// Syntax-control bookkeeping for prefix decoding.
struct SamplerState {
  int emitted = 0;
  /// Open slots still to be filled; 0 once a complete tree is out.
  int need = 1;
  /// Depth of every open slot, the next slot on top.
  std::vector<int> depth_stack{0};
  double temperature = 1.0;

  /// Consumes one tree token (not EOS).
  void advance(Node n);
};

/// Tokens that keep the sequence completable within max_len tokens
/// (tree plus EOS) and within max_depth.
std::vector<bool> legal_mask(const SamplerState& state, const Vocabulary& vocab, int max_len,
                             int max_depth);

struct SampleOptions {
  double temperature = 1.0;
  int max_depth = 17;
  /// Decoder budget including EOS, capped at the model's max_len (0 = cap).
  int max_len = 0;
};

/// Draws one offspring from p(offspring | parent, sd). The encoder sees at
/// most max_len parent tokens.
ExprTree sample_offspring(const ModelParams& model, const ExprTree& parent, double sd_desired,
                          Rng& rng, const SampleOptions& options = {});

}  // namespace tsgp
