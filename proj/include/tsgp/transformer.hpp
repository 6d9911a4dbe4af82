#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tsgp/vocab.hpp"

namespace tsgp {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Hyperparams {
  int d_model = 128;
  int n_heads = 8;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int ffn_dim = 512;
  /// Longest token sequence on either side, specials excluded.
  int max_len = 100;
  double dropout = 0.0;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm clip before each step (0 = off).
  double clip_norm = 1.0;
  int epochs = 8;
  int batch_size = 256;
  double init_std = 0.02;

  /// Throws kPrecondition (e.g. d_model not divisible by n_heads).
  void validate() const;
  /// Rows of the sinusoidal table: SD slot + BOS + max_len tokens.
  int positions() const { return max_len + 2; }
};

struct Linear {
  Mat w;  // in x out
  Mat b;  // 1 x out
};

struct LayerNorm {
  Mat gain;  // 1 x d
  Mat bias;  // 1 x d
};

struct Attention {
  Linear q, k, v, o;
};

struct FeedForward {
  Linear in, out;
};

struct EncoderLayer {
  LayerNorm norm1, norm2;
  Attention attn;
  FeedForward ffn;
};

struct DecoderLayer {
  LayerNorm norm1, norm2, norm3;
  Attention self_attn, cross_attn;
  FeedForward ffn;
};

/// Every trainable tensor. Encoder, decoder and output embeddings are untied.
struct Weights {
  Mat enc_embed;  // vocab x d
  Mat dec_embed;  // vocab x d
  Mat sd_w;       // 1 x d
  Mat sd_b;       // 1 x d
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  LayerNorm enc_norm, dec_norm;
  Linear out;  // d x vocab
};

namespace detail {

template <class L, class F>
void visit_linear(L& l, const std::string& p, F& f) {
  f(p + ".w", l.w);
  f(p + ".b", l.b);
}
template <class N, class F>
void visit_norm(N& n, const std::string& p, F& f) {
  f(p + ".gain", n.gain);
  f(p + ".bias", n.bias);
}
template <class A, class F>
void visit_attention(A& a, const std::string& p, F& f) {
  visit_linear(a.q, p + ".q", f);
  visit_linear(a.k, p + ".k", f);
  visit_linear(a.v, p + ".v", f);
  visit_linear(a.o, p + ".o", f);
}

}  // namespace detail

/// Calls f(name, tensor) for every tensor in a fixed order; this order is
/// the checkpoint manifest order.
template <class W, class F>
void for_each_tensor(W& w, F&& f) {
  f(std::string("enc.embed"), w.enc_embed);
  f(std::string("dec.embed"), w.dec_embed);
  f(std::string("sd.w"), w.sd_w);
  f(std::string("sd.b"), w.sd_b);
  for (std::size_t i = 0; i < w.encoder.size(); ++i) {
    auto& l = w.encoder[i];
    const std::string p = "enc." + std::to_string(i);
    detail::visit_norm(l.norm1, p + ".norm1", f);
    detail::visit_attention(l.attn, p + ".attn", f);
    detail::visit_norm(l.norm2, p + ".norm2", f);
    detail::visit_linear(l.ffn.in, p + ".ffn.in", f);
    detail::visit_linear(l.ffn.out, p + ".ffn.out", f);
  }
  for (std::size_t i = 0; i < w.decoder.size(); ++i) {
    auto& l = w.decoder[i];
    const std::string p = "dec." + std::to_string(i);
    detail::visit_norm(l.norm1, p + ".norm1", f);
    detail::visit_attention(l.self_attn, p + ".self_attn", f);
    detail::visit_norm(l.norm2, p + ".norm2", f);
    detail::visit_attention(l.cross_attn, p + ".cross_attn", f);
    detail::visit_norm(l.norm3, p + ".norm3", f);
    detail::visit_linear(l.ffn.in, p + ".ffn.in", f);
    detail::visit_linear(l.ffn.out, p + ".ffn.out", f);
  }
  detail::visit_norm(w.enc_norm, "enc.norm", f);
  detail::visit_norm(w.dec_norm, "dec.norm", f);
  detail::visit_linear(w.out, "out", f);
}

/// Same shapes as `like`, all zeros.
Weights zeros_like(const Weights& like);
std::size_t parameter_count(const Weights& w);

/// Parameters plus everything needed to run them.
struct ModelParams {
  Hyperparams hyper;
  Vocabulary vocab;
  Weights weights;
  /// Fixed sinusoidal table, hyper.positions() x d_model.
  Mat positions;
};

Mat sinusoidal_positions(int rows, int d_model);

/// Small-scale Gaussian init (std = hyper.init_std), zero biases, unit gains.
/// Values are rounded to 32-bit precision so a checkpoint of a fresh model
/// reloads exactly.
ModelParams init_model(const Hyperparams& hyper, const Vocabulary& vocab, std::uint64_t seed);

/// Rounds every weight to the nearest 32-bit float.
void round_to_storage_precision(Weights& w);

/// Intermediate values kept by a training forward pass.
struct ForwardCache;

struct ForwardOptions {
  /// Needed only when hyper.dropout > 0 and training is set.
  Rng* rng = nullptr;
  bool training = false;
  /// Keep attention probabilities for inspection.
  bool keep_attention = false;
};

struct ForwardResult {
  /// (1 + decoder_ids.size()) x vocab: one row per decoder position
  /// including the SD slot.
  Mat logits;
  std::shared_ptr<ForwardCache> cache;
  /// Per layer, per head attention probabilities (keep_attention only):
  /// encoder self, decoder self, decoder cross.
  std::vector<Mat> attention;
};

/// Encoder input = [SD] ++ input_ids; decoder input = [SD] ++ decoder_ids,
/// where decoder_ids normally starts with BOS. Decoder self-attention is
/// causal. Throws kSequenceTooLong.
ForwardResult forward(const ModelParams& model, std::span<const int> input_ids, double sd,
                      std::span<const int> decoder_ids, const ForwardOptions& options = {});

/// Accumulates d(loss)/d(theta) into `grads` given d(loss)/d(logits).
void backward(const ModelParams& model, const ForwardCache& cache, const Mat& dlogits,
              Weights& grads);

/// Targets for teacher forcing: decoder_ids shifted left plus EOS.
std::vector<int> teacher_forcing_targets(std::span<const int> decoder_ids);

struct CrossEntropy {
  double sum = 0.0;
  std::size_t count = 0;
  std::size_t correct = 0;
  /// softmax(logits) - onehot(target) on non-PAD rows, zero on PAD rows.
  Mat dlogits;
};

CrossEntropy cross_entropy(const Mat& logits, std::span<const int> targets);

/// Mean cross-entropy over non-PAD targets. Throws kPrecondition when every
/// target is PAD or the lengths differ.
double loss(const Mat& logits, std::span<const int> targets);

/// One (input, sd, output) training record in vocabulary ids.
struct Example {
  std::vector<int> input_ids;
  double sd = 0.0;
  std::vector<int> decoder_ids;
  std::vector<int> targets;
};

Example make_example(const Vocabulary& vocab, std::span<const Node> input,
                     std::span<const Node> output, double sd);

struct BatchStats {
  double loss = 0.0;
  std::size_t tokens = 0;
  std::size_t correct = 0;
};

/// Mean loss over all non-PAD target tokens of the batch, and its exact
/// gradient written to `grads` (overwritten). Examples are split into
/// contiguous per-worker chunks summed in worker order, so results depend on
/// the thread count but not on scheduling.
BatchStats compute_gradients(const ModelParams& model, std::span<const Example> batch,
                             Weights& grads, int threads = 1, Rng* dropout_rng = nullptr);

/// Loss and accuracy without gradients.
BatchStats evaluate_batch(const ModelParams& model, std::span<const Example> batch);

/// Incremental decoder for sampling. The encoder runs once; every step
/// appends one decoder token and returns the logits row for it.
class DecoderSession {
 public:
  DecoderSession(const ModelParams& model, std::span<const int> input_ids, double sd);
  ~DecoderSession();
  DecoderSession(DecoderSession&&) noexcept;
  DecoderSession& operator=(DecoderSession&&) noexcept;

  /// Feeds `token` at the next position and returns its logits row.
  RowVec step(int token);
  int length() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace tsgp
