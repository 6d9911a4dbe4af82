#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tsgp/corpus.hpp"
#include "tsgp/transformer.hpp"

namespace tsgp {

/// Decoupled weight decay Adam. Decay applies to weight matrices and
/// embeddings, not to biases or normalization parameters.
class AdamW {
 public:
  AdamW(const Weights& like, const Hyperparams& hyper);

  void step(Weights& params, const Weights& grads);
  int steps() const { return t_; }
  const Weights& first_moment() const { return m_; }
  const Weights& second_moment() const { return v_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  int t_ = 0;
  Weights m_, v_;
  std::vector<bool> decay_;
};

bool all_finite(const Weights& w);

/// Rescales `grads` to at most `max_norm` in global L2 norm; returns the
/// norm before clipping.
double clip_global_norm(Weights& grads, double max_norm);

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

struct TrainOptions {
  /// Run exactly this many optimizer steps instead of hyper.epochs (0 = off).
  int max_steps = 0;
  int threads = 1;
  /// Check parameters and moments for non-finite values after every step.
  bool check_finite =
#ifndef NDEBUG
      true;
#else
      false;
#endif
  std::function<void(const LossPoint&)> on_step;
};

struct TrainResult {
  ModelParams model;
  std::vector<LossPoint> curve;
};

std::vector<Example> make_examples(const Vocabulary& vocab, std::span<const TrainingPair> pairs);

/// Teacher-forced cross-entropy with AdamW over shuffled mini-batches.
/// Deterministic for a fixed seed and thread count. The returned weights
/// are rounded to 32-bit precision (checkpoint precision).
/// Throws kNonFiniteLoss.
TrainResult train(std::span<const TrainingPair> pairs, const Hyperparams& hyper,
                  const Vocabulary& vocab, std::uint64_t seed, const TrainOptions& options = {});

/// Continues training an existing model on prepared examples.
TrainResult train_examples(ModelParams model, std::span<const Example> examples,
                           std::uint64_t seed, const TrainOptions& options = {});

}  // namespace tsgp
