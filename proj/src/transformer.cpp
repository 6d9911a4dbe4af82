#include "tsgp/transformer.hpp"

#include <cmath>
#include <limits>

#include "tsgp/error.hpp"
#include "tsgp/parallel.hpp"

namespace tsgp {

void Hyperparams::validate() const {
  if (d_model < 2 || d_model % 2 != 0) throw Error(ErrorCode::kPrecondition, "d_model must be even");
  if (n_heads < 1 || d_model % n_heads != 0) {
    throw Error(ErrorCode::kPrecondition, "d_model must be divisible by n_heads");
  }
  if (n_encoder_layers < 1 || n_decoder_layers < 1 || ffn_dim < 1 || max_len < 1) {
    throw Error(ErrorCode::kPrecondition, "layer counts, ffn_dim and max_len must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::kPrecondition, "dropout in [0, 1)");
  if (!(lr > 0.0) || weight_decay < 0.0 || !(clip_norm >= 0.0) || batch_size < 1 || epochs < 0) {
    throw Error(ErrorCode::kPrecondition, "optimizer settings");
  }
}

namespace {

constexpr double kNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Building blocks. Activations are (positions x features), row-major.

Mat linear_forward(const Linear& l, const Mat& x) {
  Mat y = x * l.w;
  y.rowwise() += l.b.row(0);
  return y;
}

Mat linear_backward(const Linear& l, const Mat& x, const Mat& dy, Linear& g) {
  g.w.noalias() += x.transpose() * dy;
  g.b += dy.colwise().sum();
  return dy * l.w.transpose();
}

struct NormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

Mat norm_forward(const LayerNorm& p, const Mat& x, NormCache* cache) {
  const Eigen::Index rows = x.rows();
  Mat y(rows, x.cols());
  if (cache) {
    cache->xhat.resize(rows, x.cols());
    cache->rstd.resize(rows);
  }
  for (Eigen::Index t = 0; t < rows; ++t) {
    const double mu = x.row(t).mean();
    const RowVec centered = x.row(t).array() - mu;
    const double var = centered.squaredNorm() / static_cast<double>(x.cols());
    const double rstd = 1.0 / std::sqrt(var + kNormEps);
    const RowVec xhat = centered * rstd;
    y.row(t) = xhat.cwiseProduct(p.gain.row(0)) + p.bias.row(0);
    if (cache) {
      cache->xhat.row(t) = xhat;
      cache->rstd[t] = rstd;
    }
  }
  return y;
}

Mat norm_backward(const LayerNorm& p, const NormCache& c, const Mat& dy, LayerNorm& g) {
  g.gain += dy.cwiseProduct(c.xhat).colwise().sum();
  g.bias += dy.colwise().sum();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index t = 0; t < dy.rows(); ++t) {
    const RowVec dxhat = dy.row(t).cwiseProduct(p.gain.row(0));
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(c.xhat.row(t)).mean();
    dx.row(t) = c.rstd[t] * (dxhat.array() - m1 - c.xhat.row(t).array() * m2);
  }
  return dx;
}

// Row-wise softmax; row i is restricted to columns [0, i] when causal.
void softmax_rows(Mat& s, bool causal) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Eigen::Index limit = causal ? i + 1 : s.cols();
    auto row = s.row(i).head(limit);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
    if (limit < s.cols()) s.row(i).tail(s.cols() - limit).setZero();
  }
}

struct AttentionCache {
  Mat xq, xkv, q, k, v, concat;
  std::vector<Mat> probs;
};

Mat attention_forward(const Attention& a, int heads, const Mat& xq, const Mat& xkv, bool causal,
                      AttentionCache* cache, std::vector<Mat>* keep) {
  const Mat q = linear_forward(a.q, xq);
  const Mat k = linear_forward(a.k, xkv);
  const Mat v = linear_forward(a.v, xkv);
  const Eigen::Index dh = q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat concat(xq.rows(), q.cols());
  if (cache) cache->probs.resize(heads);
  for (int h = 0; h < heads; ++h) {
    Mat s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(s, causal);
    concat.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    if (keep) keep->push_back(s);
    if (cache) cache->probs[h] = std::move(s);
  }
  Mat out = linear_forward(a.o, concat);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->concat = std::move(concat);
  }
  return out;
}

struct AttentionGrads {
  Mat dxq, dxkv;
};

AttentionGrads attention_backward(const Attention& a, int heads, const AttentionCache& c,
                                  const Mat& dout, Attention& g) {
  const Mat dconcat = linear_backward(a.o, c.concat, dout, g.o);
  const Eigen::Index dh = c.q.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dq(c.q.rows(), c.q.cols());
  Mat dk(c.k.rows(), c.k.cols());
  Mat dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < heads; ++h) {
    const Mat& p = c.probs[h];
    const auto dout_h = dconcat.middleCols(h * dh, dh);
    const Mat dp = dout_h * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout_h;
    const Eigen::VectorXd rowdot = dp.cwiseProduct(p).rowwise().sum();
    Mat ds = p.cwiseProduct(dp.colwise() - rowdot) * scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  AttentionGrads out;
  out.dxq = linear_backward(a.q, c.xq, dq, g.q);
  out.dxkv = linear_backward(a.k, c.xkv, dk, g.k);
  out.dxkv += linear_backward(a.v, c.xkv, dv, g.v);
  return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

struct FfnCache {
  Mat x, pre, act;
};

Mat ffn_forward(const FeedForward& f, const Mat& x, FfnCache* cache) {
  Mat pre = linear_forward(f.in, x);
  Mat act = pre.unaryExpr([](double u) {
    return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + kGeluA * u * u * u)));
  });
  Mat out = linear_forward(f.out, act);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

Mat ffn_backward(const FeedForward& f, const FfnCache& c, const Mat& dout, FeedForward& g) {
  Mat dact = linear_backward(f.out, c.act, dout, g.out);
  const Mat dgelu = c.pre.unaryExpr([](double u) {
    const double t = std::tanh(kGeluC * (u + kGeluA * u * u * u));
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
  });
  const Mat dpre = dact.cwiseProduct(dgelu);
  return linear_backward(f.in, c.x, dpre, g.in);
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - p);
  Mat m(rows, cols);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

struct ForwardCache {
  std::vector<int> input_ids;
  std::vector<int> decoder_ids;
  double sd = 0.0;

  struct Enc {
    NormCache n1, n2;
    AttentionCache attn;
    FfnCache ffn;
    Mat drop1, drop2;
  };
  struct Dec {
    NormCache n1, n2, n3;
    AttentionCache self_attn, cross_attn;
    FfnCache ffn;
    Mat drop1, drop2, drop3;
  };
  Mat enc_drop, dec_drop;
  std::vector<Enc> enc;
  NormCache enc_norm;
  Mat enc_out;
  std::vector<Dec> dec;
  NormCache dec_norm;
  Mat dec_z;
};

Weights zeros_like(const Weights& like) {
  Weights z = like;
  for_each_tensor(z, [](const std::string&, Mat& t) { t.setZero(); });
  return z;
}

std::size_t parameter_count(const Weights& w) {
  std::size_t n = 0;
  for_each_tensor(w, [&](const std::string&, const Mat& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

Mat sinusoidal_positions(int rows, int d_model) {
  Mat p(rows, d_model);
  for (int pos = 0; pos < rows; ++pos) {
    for (int i = 0; i < d_model / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / d_model);
      p(pos, 2 * i) = std::sin(pos * freq);
      p(pos, 2 * i + 1) = std::cos(pos * freq);
    }
  }
  return p;
}

void round_to_storage_precision(Weights& w) {
  for_each_tensor(w, [](const std::string&, Mat& t) {
    t = t.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  });
}

ModelParams init_model(const Hyperparams& hyper, const Vocabulary& vocab, std::uint64_t seed) {
  hyper.validate();
  const int d = hyper.d_model;
  const int vsize = vocab.size();
  auto linear = [](int in, int out) { return Linear{Mat::Zero(in, out), Mat::Zero(1, out)}; };
  auto norm = [d] { return LayerNorm{Mat::Ones(1, d), Mat::Zero(1, d)}; };
  auto attention = [&] { return Attention{linear(d, d), linear(d, d), linear(d, d), linear(d, d)}; };
  auto ffn = [&] { return FeedForward{linear(d, hyper.ffn_dim), linear(hyper.ffn_dim, d)}; };

  Weights w;
  w.enc_embed = Mat::Zero(vsize, d);
  w.dec_embed = Mat::Zero(vsize, d);
  w.sd_w = Mat::Zero(1, d);
  w.sd_b = Mat::Zero(1, d);
  for (int i = 0; i < hyper.n_encoder_layers; ++i) {
    w.encoder.push_back({norm(), norm(), attention(), ffn()});
  }
  for (int i = 0; i < hyper.n_decoder_layers; ++i) {
    w.decoder.push_back({norm(), norm(), norm(), attention(), attention(), ffn()});
  }
  w.enc_norm = norm();
  w.dec_norm = norm();
  w.out = linear(d, vsize);

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, hyper.init_std);
  for_each_tensor(w, [&](const std::string& name, Mat& t) {
    const bool is_weight = name.ends_with(".w") || name.ends_with("embed");
    if (!is_weight) return;
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  });
  round_to_storage_precision(w);

  return ModelParams{hyper, vocab, std::move(w), sinusoidal_positions(hyper.positions(), d)};
}

namespace {

void check_ids(const ModelParams& model, std::span<const int> ids, std::size_t limit,
               const char* side) {
  if (ids.size() > limit) {
    throw Error(ErrorCode::kSequenceTooLong, std::string(side) + " sequence of " +
                                                 std::to_string(ids.size()) + " exceeds " +
                                                 std::to_string(limit));
  }
  for (int id : ids) {
    if (id < 0 || id >= model.vocab.size()) {
      throw Error(ErrorCode::kUnknownToken, "token id " + std::to_string(id));
    }
  }
}

// [SD] ++ embedded tokens, plus positions.
Mat embed(const ModelParams& model, const Mat& table, std::span<const int> ids, double sd) {
  const int d = model.hyper.d_model;
  const double scale = std::sqrt(static_cast<double>(d));
  Mat x(static_cast<Eigen::Index>(ids.size()) + 1, d);
  x.row(0) = sd * model.weights.sd_w.row(0) + model.weights.sd_b.row(0);
  for (std::size_t i = 0; i < ids.size(); ++i) x.row(i + 1) = scale * table.row(ids[i]);
  x += model.positions.topRows(x.rows());
  return x;
}

void embed_backward(const ModelParams& model, std::span<const int> ids, double sd, const Mat& dx,
                    Mat& dtable, Weights& g) {
  const double scale = std::sqrt(static_cast<double>(model.hyper.d_model));
  g.sd_w.row(0) += sd * dx.row(0);
  g.sd_b.row(0) += dx.row(0);
  for (std::size_t i = 0; i < ids.size(); ++i) dtable.row(ids[i]) += scale * dx.row(i + 1);
}

Mat maybe_drop(Mat x, double p, Rng* rng, Mat* mask) {
  if (p <= 0.0 || rng == nullptr) return x;
  *mask = dropout_mask(x.rows(), x.cols(), p, *rng);
  return x.cwiseProduct(*mask);
}

Mat apply_mask(const Mat& d, const Mat& mask) {
  return mask.size() == 0 ? d : Mat(d.cwiseProduct(mask));
}

Mat encode(const ModelParams& model, std::span<const int> input_ids, double sd, Rng* drop_rng,
           ForwardCache* cache, std::vector<Mat>* keep) {
  const auto& w = model.weights;
  const int heads = model.hyper.n_heads;
  const double p = model.hyper.dropout;
  Mat x = maybe_drop(embed(model, w.enc_embed, input_ids, sd), p, drop_rng,
                     cache ? &cache->enc_drop : nullptr);
  if (cache) cache->enc.resize(w.encoder.size());
  for (std::size_t l = 0; l < w.encoder.size(); ++l) {
    const EncoderLayer& layer = w.encoder[l];
    ForwardCache::Enc* c = cache ? &cache->enc[l] : nullptr;
    const Mat a = norm_forward(layer.norm1, x, c ? &c->n1 : nullptr);
    Mat h = x + maybe_drop(attention_forward(layer.attn, heads, a, a, false,
                                             c ? &c->attn : nullptr, keep),
                           p, drop_rng, c ? &c->drop1 : nullptr);
    const Mat b = norm_forward(layer.norm2, h, c ? &c->n2 : nullptr);
    x = h + maybe_drop(ffn_forward(layer.ffn, b, c ? &c->ffn : nullptr), p, drop_rng,
                       c ? &c->drop2 : nullptr);
  }
  Mat out = norm_forward(w.enc_norm, x, cache ? &cache->enc_norm : nullptr);
  if (cache) cache->enc_out = out;
  return out;
}

}  // namespace

ForwardResult forward(const ModelParams& model, std::span<const int> input_ids, double sd,
                      std::span<const int> decoder_ids, const ForwardOptions& options) {
  check_ids(model, input_ids, static_cast<std::size_t>(model.hyper.max_len), "encoder");
  // decoder_ids = BOS + up to max_len tokens.
  check_ids(model, decoder_ids, static_cast<std::size_t>(model.hyper.max_len) + 1, "decoder");
  if (!(sd >= 0.0) || !std::isfinite(sd)) {
    throw Error(ErrorCode::kPrecondition, "semantic distance must be finite and >= 0");
  }

  const auto& w = model.weights;
  const int heads = model.hyper.n_heads;
  const double p = model.hyper.dropout;
  Rng* drop_rng = options.training && p > 0.0 ? options.rng : nullptr;
  if (options.training && p > 0.0 && drop_rng == nullptr) {
    throw Error(ErrorCode::kPrecondition, "dropout needs an rng in training mode");
  }

  ForwardResult result;
  auto cache = options.training ? std::make_shared<ForwardCache>() : nullptr;
  std::vector<Mat>* keep = options.keep_attention ? &result.attention : nullptr;
  if (cache) {
    cache->input_ids.assign(input_ids.begin(), input_ids.end());
    cache->decoder_ids.assign(decoder_ids.begin(), decoder_ids.end());
    cache->sd = sd;
  }

  const Mat enc = encode(model, input_ids, sd, drop_rng, cache.get(), keep);

  Mat y = maybe_drop(embed(model, w.dec_embed, decoder_ids, sd), p, drop_rng,
                     cache ? &cache->dec_drop : nullptr);
  if (cache) cache->dec.resize(w.decoder.size());
  for (std::size_t l = 0; l < w.decoder.size(); ++l) {
    const DecoderLayer& layer = w.decoder[l];
    ForwardCache::Dec* c = cache ? &cache->dec[l] : nullptr;
    const Mat a = norm_forward(layer.norm1, y, c ? &c->n1 : nullptr);
    Mat h1 = y + maybe_drop(attention_forward(layer.self_attn, heads, a, a, true,
                                              c ? &c->self_attn : nullptr, keep),
                            p, drop_rng, c ? &c->drop1 : nullptr);
    const Mat b = norm_forward(layer.norm2, h1, c ? &c->n2 : nullptr);
    Mat h2 = h1 + maybe_drop(attention_forward(layer.cross_attn, heads, b, enc, false,
                                               c ? &c->cross_attn : nullptr, keep),
                             p, drop_rng, c ? &c->drop2 : nullptr);
    const Mat cc = norm_forward(layer.norm3, h2, c ? &c->n3 : nullptr);
    y = h2 + maybe_drop(ffn_forward(layer.ffn, cc, c ? &c->ffn : nullptr), p, drop_rng,
                        c ? &c->drop3 : nullptr);
  }
  const Mat z = norm_forward(w.dec_norm, y, cache ? &cache->dec_norm : nullptr);
  result.logits = linear_forward(w.out, z);
  if (cache) {
    cache->dec_z = z;
    result.cache = std::move(cache);
  }
  return result;
}

void backward(const ModelParams& model, const ForwardCache& c, const Mat& dlogits,
              Weights& g) {
  const auto& w = model.weights;
  const int heads = model.hyper.n_heads;

  Mat dy = norm_backward(w.dec_norm, c.dec_norm, linear_backward(w.out, c.dec_z, dlogits, g.out),
                         g.dec_norm);
  Mat denc = Mat::Zero(c.enc_out.rows(), c.enc_out.cols());
  for (std::size_t li = w.decoder.size(); li-- > 0;) {
    const DecoderLayer& layer = w.decoder[li];
    DecoderLayer& gl = g.decoder[li];
    const ForwardCache::Dec& lc = c.dec[li];
    // y_out = h2 + ffn(norm3(h2))
    Mat dh2 = dy + norm_backward(layer.norm3, lc.n3,
                                 ffn_backward(layer.ffn, lc.ffn, apply_mask(dy, lc.drop3), gl.ffn),
                                 gl.norm3);
    // h2 = h1 + cross(norm2(h1), enc)
    const AttentionGrads cross = attention_backward(layer.cross_attn, heads, lc.cross_attn,
                                                    apply_mask(dh2, lc.drop2), gl.cross_attn);
    denc += cross.dxkv;
    Mat dh1 = dh2 + norm_backward(layer.norm2, lc.n2, cross.dxq, gl.norm2);
    // h1 = y + self(norm1(y))
    const AttentionGrads self = attention_backward(layer.self_attn, heads, lc.self_attn,
                                                   apply_mask(dh1, lc.drop1), gl.self_attn);
    dy = dh1 + norm_backward(layer.norm1, lc.n1, self.dxq + self.dxkv, gl.norm1);
  }
  embed_backward(model, c.decoder_ids, c.sd, apply_mask(dy, c.dec_drop), g.dec_embed, g);

  Mat dx = norm_backward(w.enc_norm, c.enc_norm, denc, g.enc_norm);
  for (std::size_t li = w.encoder.size(); li-- > 0;) {
    const EncoderLayer& layer = w.encoder[li];
    EncoderLayer& gl = g.encoder[li];
    const ForwardCache::Enc& lc = c.enc[li];
    Mat dh = dx + norm_backward(layer.norm2, lc.n2,
                                ffn_backward(layer.ffn, lc.ffn, apply_mask(dx, lc.drop2), gl.ffn),
                                gl.norm2);
    const AttentionGrads self =
        attention_backward(layer.attn, heads, lc.attn, apply_mask(dh, lc.drop1), gl.attn);
    dx = dh + norm_backward(layer.norm1, lc.n1, self.dxq + self.dxkv, gl.norm1);
  }
  embed_backward(model, c.input_ids, c.sd, apply_mask(dx, c.enc_drop), g.enc_embed, g);
}

std::vector<int> teacher_forcing_targets(std::span<const int> decoder_ids) {
  std::vector<int> t(decoder_ids.begin(), decoder_ids.end());
  t.push_back(Vocabulary::kEos);
  return t;
}

CrossEntropy cross_entropy(const Mat& logits, std::span<const int> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw Error(ErrorCode::kPrecondition, "targets must have one entry per logits row");
  }
  CrossEntropy ce;
  ce.dlogits = Mat::Zero(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const int target = targets[t];
    if (target == Vocabulary::kPad) continue;
    const double mx = logits.row(t).maxCoeff();
    RowVec e = (logits.row(t).array() - mx).exp();
    const double z = e.sum();
    ce.sum += std::log(z) - (logits(t, target) - mx);
    e /= z;
    Eigen::Index arg = 0;
    logits.row(t).maxCoeff(&arg);
    if (arg == target) ++ce.correct;
    e[target] -= 1.0;
    ce.dlogits.row(t) = e;
    ++ce.count;
  }
  return ce;
}

double loss(const Mat& logits, std::span<const int> targets) {
  const CrossEntropy ce = cross_entropy(logits, targets);
  if (ce.count == 0) throw Error(ErrorCode::kPrecondition, "all targets are PAD");
  return ce.sum / static_cast<double>(ce.count);
}

Example make_example(const Vocabulary& vocab, std::span<const Node> input,
                     std::span<const Node> output, double sd) {
  Example ex;
  ex.input_ids = vocab.encode(input);
  ex.sd = sd;
  ex.decoder_ids.push_back(Vocabulary::kBos);
  for (int id : vocab.encode(output)) ex.decoder_ids.push_back(id);
  ex.targets = teacher_forcing_targets(ex.decoder_ids);
  return ex;
}

namespace {

void add_into(Weights& acc, const Weights& part) {
  std::vector<const Mat*> src;
  for_each_tensor(part, [&](const std::string&, const Mat& t) { src.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(acc, [&](const std::string&, Mat& t) { t += *src[i++]; });
}

std::size_t count_targets(std::span<const Example> batch) {
  std::size_t n = 0;
  for (const auto& ex : batch) {
    for (int t : ex.targets) n += t != Vocabulary::kPad;
  }
  return n;
}

}  // namespace

BatchStats compute_gradients(const ModelParams& model, std::span<const Example> batch,
                             Weights& grads, int threads, Rng* dropout_rng) {
  const std::size_t total = count_targets(batch);
  if (total == 0) throw Error(ErrorCode::kPrecondition, "batch has no target tokens");
  const double inv = 1.0 / static_cast<double>(total);
  const std::uint64_t drop_base = dropout_rng != nullptr ? (*dropout_rng)() : 0;

  if (threads <= 0) threads = default_threads();
  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(threads), batch.size()));
  const std::size_t chunk = (batch.size() + workers - 1) / workers;

  std::vector<Weights> partial(workers);
  std::vector<BatchStats> stats(workers);
  parallel_for(workers, static_cast<int>(workers), [&](std::size_t wi) {
    Weights g = zeros_like(model.weights);
    BatchStats s;
    const std::size_t end = std::min(batch.size(), (wi + 1) * chunk);
    for (std::size_t i = wi * chunk; i < end; ++i) {
      const Example& ex = batch[i];
      Rng rng(derive_seed(drop_base, i));
      ForwardOptions opt;
      opt.training = true;
      opt.rng = dropout_rng != nullptr ? &rng : nullptr;
      const ForwardResult fr = forward(model, ex.input_ids, ex.sd, ex.decoder_ids, opt);
      CrossEntropy ce = cross_entropy(fr.logits, ex.targets);
      s.loss += ce.sum;
      s.correct += ce.correct;
      s.tokens += ce.count;
      ce.dlogits *= inv;
      backward(model, *fr.cache, ce.dlogits, g);
    }
    partial[wi] = std::move(g);
    stats[wi] = s;
  });

  grads = std::move(partial[0]);
  BatchStats out = stats[0];
  for (std::size_t wi = 1; wi < workers; ++wi) {
    add_into(grads, partial[wi]);
    out.loss += stats[wi].loss;
    out.correct += stats[wi].correct;
    out.tokens += stats[wi].tokens;
  }
  out.loss *= inv;
  return out;
}

BatchStats evaluate_batch(const ModelParams& model, std::span<const Example> batch) {
  BatchStats s;
  for (const Example& ex : batch) {
    const ForwardResult fr = forward(model, ex.input_ids, ex.sd, ex.decoder_ids);
    const CrossEntropy ce = cross_entropy(fr.logits, ex.targets);
    s.loss += ce.sum;
    s.tokens += ce.count;
    s.correct += ce.correct;
  }
  if (s.tokens > 0) s.loss /= static_cast<double>(s.tokens);
  return s;
}

// ---------------------------------------------------------------------------
// Incremental decoding.

struct DecoderSession::State {
  const ModelParams* model = nullptr;
  double sd = 0.0;
  int len = 0;
  std::vector<Mat> cross_k, cross_v, self_k, self_v;

  // Attention of one query row against the first `rows` keys.
  RowVec attend(const RowVec& q, const Mat& k, const Mat& v, Eigen::Index rows) const {
    const int heads = model->hyper.n_heads;
    const Eigen::Index dh = q.size() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    RowVec out(q.size());
    for (int h = 0; h < heads; ++h) {
      RowVec s = (q.segment(h * dh, dh) * k.topRows(rows).middleCols(h * dh, dh).transpose()) * scale;
      const double mx = s.maxCoeff();
      s = (s.array() - mx).exp();
      s /= s.sum();
      out.segment(h * dh, dh) = s * v.topRows(rows).middleCols(h * dh, dh);
    }
    return out;
  }

  RowVec advance(Mat x) {
    const auto& w = model->weights;
    for (std::size_t l = 0; l < w.decoder.size(); ++l) {
      const DecoderLayer& layer = w.decoder[l];
      const Mat a = norm_forward(layer.norm1, x, nullptr);
      self_k[l].row(len) = linear_forward(layer.self_attn.k, a).row(0);
      self_v[l].row(len) = linear_forward(layer.self_attn.v, a).row(0);
      const RowVec q = linear_forward(layer.self_attn.q, a).row(0);
      Mat o(1, q.size());
      o.row(0) = attend(q, self_k[l], self_v[l], len + 1);
      const Mat h1 = x + linear_forward(layer.self_attn.o, o);

      const Mat b = norm_forward(layer.norm2, h1, nullptr);
      const RowVec q2 = linear_forward(layer.cross_attn.q, b).row(0);
      o.row(0) = attend(q2, cross_k[l], cross_v[l], cross_k[l].rows());
      const Mat h2 = h1 + linear_forward(layer.cross_attn.o, o);

      const Mat c = norm_forward(layer.norm3, h2, nullptr);
      x = h2 + ffn_forward(layer.ffn, c, nullptr);
    }
    ++len;
    return linear_forward(w.out, norm_forward(w.dec_norm, x, nullptr)).row(0);
  }
};

DecoderSession::DecoderSession(const ModelParams& model, std::span<const int> input_ids, double sd)
    : state_(std::make_unique<State>()) {
  check_ids(model, input_ids, static_cast<std::size_t>(model.hyper.max_len), "encoder");
  state_->model = &model;
  state_->sd = sd;
  const Mat enc = encode(model, input_ids, sd, nullptr, nullptr, nullptr);
  const auto& w = model.weights;
  for (const DecoderLayer& layer : w.decoder) {
    state_->cross_k.push_back(linear_forward(layer.cross_attn.k, enc));
    state_->cross_v.push_back(linear_forward(layer.cross_attn.v, enc));
    state_->self_k.emplace_back(model.hyper.positions(), model.hyper.d_model);
    state_->self_v.emplace_back(model.hyper.positions(), model.hyper.d_model);
  }
  Mat slot(1, model.hyper.d_model);
  slot.row(0) = sd * w.sd_w.row(0) + w.sd_b.row(0) + model.positions.row(0);
  state_->advance(std::move(slot));
}

DecoderSession::~DecoderSession() = default;
DecoderSession::DecoderSession(DecoderSession&&) noexcept = default;
DecoderSession& DecoderSession::operator=(DecoderSession&&) noexcept = default;

RowVec DecoderSession::step(int token) {
  const ModelParams& model = *state_->model;
  if (state_->len >= model.hyper.positions()) {
    throw Error(ErrorCode::kSequenceTooLong, "decoder session is full");
  }
  if (token < 0 || token >= model.vocab.size()) {
    throw Error(ErrorCode::kUnknownToken, "token id " + std::to_string(token));
  }
  const double scale = std::sqrt(static_cast<double>(model.hyper.d_model));
  Mat x(1, model.hyper.d_model);
  x.row(0) = scale * model.weights.dec_embed.row(token) + model.positions.row(state_->len);
  return state_->advance(std::move(x));
}

int DecoderSession::length() const { return state_->len; }

}  // namespace tsgp
