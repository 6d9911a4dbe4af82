#include "tsgp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsgp/error.hpp"

namespace tsgp {

namespace {

std::vector<Mat*> tensors(Weights& w) {
  std::vector<Mat*> out;
  for_each_tensor(w, [&](const std::string&, Mat& t) { out.push_back(&t); });
  return out;
}

std::vector<const Mat*> tensors(const Weights& w) {
  std::vector<const Mat*> out;
  for_each_tensor(w, [&](const std::string&, const Mat& t) { out.push_back(&t); });
  return out;
}

}  // namespace

AdamW::AdamW(const Weights& like, const Hyperparams& hyper)
    : lr_(hyper.lr),
      beta1_(hyper.beta1),
      beta2_(hyper.beta2),
      eps_(hyper.adam_eps),
      weight_decay_(hyper.weight_decay),
      m_(zeros_like(like)),
      v_(zeros_like(like)) {
  for_each_tensor(like, [&](const std::string& name, const Mat&) {
    decay_.push_back(name.ends_with(".w") || name.ends_with("embed"));
  });
}

void AdamW::step(Weights& params, const Weights& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(m_);
  auto v = tensors(v_);
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = beta1_ * m[i]->array() + (1.0 - beta1_) * g[i]->array();
    v[i]->array() = beta2_ * v[i]->array() + (1.0 - beta2_) * g[i]->array().square();
    if (decay_[i]) p[i]->array() -= lr_ * weight_decay_ * p[i]->array();
    p[i]->array() -= lr_ * (m[i]->array() / bc1) / ((v[i]->array() / bc2).sqrt() + eps_);
  }
}

bool all_finite(const Weights& w) {
  bool ok = true;
  for_each_tensor(w, [&](const std::string&, const Mat& t) { ok = ok && t.allFinite(); });
  return ok;
}

double clip_global_norm(Weights& grads, double max_norm) {
  double sq = 0.0;
  for_each_tensor(grads, [&](const std::string&, const Mat& t) { sq += t.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for_each_tensor(grads, [&](const std::string&, Mat& t) { t *= s; });
  }
  return norm;
}

std::vector<Example> make_examples(const Vocabulary& vocab, std::span<const TrainingPair> pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(make_example(vocab, p.input, p.output, p.sd));
  return out;
}

TrainResult train_examples(ModelParams model, std::span<const Example> examples,
                           std::uint64_t seed, const TrainOptions& options) {
  if (examples.empty()) throw Error(ErrorCode::kPrecondition, "no training pairs");
  const Hyperparams& hyper = model.hyper;
  for (const Example& ex : examples) {
    if (ex.input_ids.size() > static_cast<std::size_t>(hyper.max_len) ||
        ex.decoder_ids.size() > static_cast<std::size_t>(hyper.max_len) + 1) {
      throw Error(ErrorCode::kSequenceTooLong, "training pair longer than max_len");
    }
  }

  Rng rng(seed);
  Rng dropout_rng(derive_seed(seed, 1));
  AdamW opt(model.weights, hyper);
  Weights grads = zeros_like(model.weights);
  TrainResult result;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  int step = 0;
  // A step budget, when given, replaces the epoch count.
  const bool by_steps = options.max_steps > 0;
  for (int epoch = 0; by_steps ? step < options.max_steps : epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      if (by_steps && step >= options.max_steps) break;
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);

      const BatchStats stats = compute_gradients(model, batch, grads, options.threads,
                                                 hyper.dropout > 0.0 ? &dropout_rng : nullptr);
      if (!std::isfinite(stats.loss) || !all_finite(grads)) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "step " + std::to_string(step) + ", epoch " + std::to_string(epoch) +
                        ": loss " + std::to_string(stats.loss));
      }
      if (hyper.clip_norm > 0.0) clip_global_norm(grads, hyper.clip_norm);
      opt.step(model.weights, grads);
      if (options.check_finite &&
          (!all_finite(model.weights) || !all_finite(opt.first_moment()) ||
           !all_finite(opt.second_moment()))) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "non-finite parameters after step " + std::to_string(step));
      }
      const LossPoint point{step, stats.loss};
      result.curve.push_back(point);
      if (options.on_step) options.on_step(point);
      ++step;
    }
  }

  round_to_storage_precision(model.weights);
  result.model = std::move(model);
  return result;
}

TrainResult train(std::span<const TrainingPair> pairs, const Hyperparams& hyper,
                  const Vocabulary& vocab, std::uint64_t seed, const TrainOptions& options) {
  ModelParams model = init_model(hyper, vocab, derive_seed(seed, 0));
  const std::vector<Example> examples = make_examples(vocab, pairs);
  return train_examples(std::move(model), examples, derive_seed(seed, 2), options);
}

}  // namespace tsgp
