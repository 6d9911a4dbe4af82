#include "tsgp/verify.hpp"

#include <algorithm>
#include <cmath>

#include "tsgp/checkpoint.hpp"

namespace tsgp {

double gradient_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const ModelParams& model, std::span<const Example> batch,
                               int probes, std::uint64_t seed, double step) {
  Weights grads = zeros_like(model.weights);
  compute_gradients(model, batch, grads, 1);

  std::vector<std::pair<std::string, const Mat*>> tensors;
  std::vector<const Mat*> grad_tensors;
  std::size_t total = 0;
  for_each_tensor(model.weights, [&](const std::string& name, const Mat& t) {
    tensors.emplace_back(name, &t);
    total += static_cast<std::size_t>(t.size());
  });
  for_each_tensor(grads, [&](const std::string&, const Mat& t) { grad_tensors.push_back(&t); });

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  ModelParams work = model;
  std::vector<Mat*> work_tensors;
  for_each_tensor(work.weights, [&](const std::string&, Mat& t) { work_tensors.push_back(&t); });

  GradCheckResult result;
  for (int p = 0; p < probes; ++p) {
    std::size_t flat = pick(rng);
    std::size_t ti = 0;
    while (flat >= static_cast<std::size_t>(tensors[ti].second->size())) {
      flat -= static_cast<std::size_t>(tensors[ti].second->size());
      ++ti;
    }
    const auto idx = static_cast<Eigen::Index>(flat);
    double& x = work_tensors[ti]->data()[idx];
    const double orig = x;
    x = orig + step;
    const double up = evaluate_batch(work, batch).loss;
    x = orig - step;
    const double down = evaluate_batch(work, batch).loss;
    x = orig;

    GradProbe g;
    g.tensor = tensors[ti].first;
    g.index = idx;
    g.analytic = grad_tensors[ti]->data()[idx];
    g.numeric = (up - down) / (2.0 * step);
    g.rel_error = gradient_rel_error(g.analytic, g.numeric);
    result.max_rel_error = std::max(result.max_rel_error, g.rel_error);
    result.probes.push_back(g);
  }
  return result;
}

Example random_example(const ModelParams& model, int input_len, int output_len, Rng& rng) {
  const Vocabulary& v = model.vocab;
  std::uniform_int_distribution<int> token(Vocabulary::kFirstOp, v.size() - 1);
  std::uniform_real_distribution<double> sd(0.0, 2.0);
  Example ex;
  for (int i = 0; i < input_len; ++i) ex.input_ids.push_back(token(rng));
  ex.sd = sd(rng);
  ex.decoder_ids.push_back(Vocabulary::kBos);
  for (int i = 0; i < output_len; ++i) ex.decoder_ids.push_back(token(rng));
  ex.targets = teacher_forcing_targets(ex.decoder_ids);
  return ex;
}

CausalityResult causality_probe(const ModelParams& model, int positions, std::uint64_t seed) {
  Rng rng(seed);
  const int out_len = std::min(model.hyper.max_len, std::max(positions + 1, 24));
  const int in_len = std::min(model.hyper.max_len, 16);
  const Example ex = random_example(model, in_len, out_len, rng);
  ForwardOptions opts;
  opts.keep_attention = true;
  const ForwardResult base = forward(model, ex.input_ids, ex.sd, ex.decoder_ids, opts);

  CausalityResult r;
  for (const Mat& a : base.attention) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      r.max_attention_error = std::max(r.max_attention_error, std::abs(a.row(i).sum() - 1.0));
    }
  }

  std::uniform_int_distribution<int> pos(1, static_cast<int>(ex.decoder_ids.size()) - 1);
  std::uniform_int_distribution<int> token(Vocabulary::kFirstOp, model.vocab.size() - 1);
  for (int p = 0; p < positions; ++p) {
    const int t = pos(rng);
    std::vector<int> dec = ex.decoder_ids;
    int replacement = token(rng);
    if (replacement == dec[t]) {
      replacement = replacement + 1 < model.vocab.size() ? replacement + 1 : Vocabulary::kFirstOp;
    }
    dec[t] = replacement;
    const ForwardResult probe = forward(model, ex.input_ids, ex.sd, dec);
    // Decoder token t sits at logits row t + 1, after the SD slot.
    const Eigen::Index rows = t + 1;
    if (probe.logits.topRows(rows) != base.logits.topRows(rows)) ++r.violations;
    ++r.positions;
  }
  return r;
}

RoundTripResult checkpoint_round_trip(const ModelParams& model, std::uint64_t seed) {
  const std::string bytes = checkpoint_bytes(model);
  const ModelParams loaded = model_from_bytes(bytes);
  RoundTripResult r;
  r.bytes_identical = checkpoint_bytes(loaded) == bytes;

  // The in-memory reference is the model at storage precision.
  ModelParams stored = model;
  round_to_storage_precision(stored.weights);
  Rng rng(seed);
  const Example ex = random_example(model, std::min(12, model.hyper.max_len),
                                    std::min(12, model.hyper.max_len), rng);
  r.logits_identical = forward(stored, ex.input_ids, ex.sd, ex.decoder_ids).logits ==
                       forward(loaded, ex.input_ids, ex.sd, ex.decoder_ids).logits;
  return r;
}

}  // namespace tsgp
