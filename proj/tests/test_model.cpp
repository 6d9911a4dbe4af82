#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "test_util.hpp"
#include "tsgp/checkpoint.hpp"
#include "tsgp/trainer.hpp"
#include "tsgp/verify.hpp"

using namespace tsgp;
using tsgp::test::code_of;

namespace {

Hyperparams tiny() {
  Hyperparams h;
  h.d_model = 16;
  h.n_heads = 2;
  h.n_encoder_layers = 1;
  h.n_decoder_layers = 1;
  h.ffn_dim = 32;
  h.max_len = 12;
  h.batch_size = 4;
  return h;
}

std::vector<TrainingPair> four_pairs() {
  auto pair = [](const char* in, const char* out, double sd) {
    const ExprTree a = parse_text(in), b = parse_text(out);
    return TrainingPair{{a.nodes().begin(), a.nodes().end()}, {b.nodes().begin(), b.nodes().end()}, sd};
  };
  return {pair("ADD v1 v2", "v1", 0.8), pair("MUL v3 C+0.2", "MUL v3 C+0.3", 0.1),
          pair("v4", "SUB v4 C-0.1", 0.1), pair("PDIV v1 v2", "ADD v1 v2", 1.7)};
}

bool same_weights(const Weights& a, const Weights& b) {
  std::vector<const Mat*> left;
  for_each_tensor(a, [&](const std::string&, const Mat& t) { left.push_back(&t); });
  std::size_t i = 0;
  bool same = true;
  for_each_tensor(b, [&](const std::string&, const Mat& t) { same = same && (*left[i++] == t); });
  return same;
}

}  // namespace

TEST_CASE("vocabulary layout") {
  const Vocabulary v(4);
  CHECK(v.size() == 22);
  CHECK(v.symbol(0) == "PAD");
  CHECK(v.symbol(1) == "BOS");
  CHECK(v.symbol(2) == "EOS");
  CHECK(v.symbol(3) == "ADD");
  CHECK(v.symbol(7) == "v1");
  CHECK(v.symbol(11) == "C-0.5");
  CHECK(v.symbol(21) == "C+0.5");
  for (int id = 3; id < v.size(); ++id) CHECK(v.id(v.node(id)) == id);
  CHECK(code_of([&] { v.node(Vocabulary::kEos); }) == ErrorCode::kUnknownToken);
  CHECK(Vocabulary(2).size() == 20);
}

TEST_CASE("forward: shape, causality and softmax rows") {
  const ModelParams m = init_model(tiny(), Vocabulary(4), 1);
  const std::vector<int> in{3, 7, 8};
  const std::vector<int> dec{Vocabulary::kBos, 4, 9};
  const ForwardResult r = forward(m, in, 0.5, dec);
  CHECK(r.logits.rows() == 4);
  CHECK(r.logits.cols() == 22);

  const CausalityResult c = causality_probe(m, 50, 3);
  CHECK(c.positions == 50);
  CHECK(c.violations == 0);
  CHECK(c.max_attention_error < 1e-6);

  const std::vector<int> too_long(13, 7);
  CHECK(code_of([&] { forward(m, too_long, 0.1, dec); }) == ErrorCode::kSequenceTooLong);
}

TEST_CASE("loss: uniform, confident and all-PAD targets") {
  const std::vector<int> targets{3, 9, 14, Vocabulary::kEos};
  CHECK(loss(Mat::Zero(4, 22), targets) == doctest::Approx(std::log(22.0)).epsilon(1e-14));
  CHECK(std::log(22.0) == doctest::Approx(3.0910).epsilon(1e-4));

  Mat sharp = Mat::Zero(4, 22);
  for (int r = 0; r < 4; ++r) sharp(r, targets[r]) = 60.0;
  CHECK(loss(sharp, targets) < 1e-20);

  const std::vector<int> padded{3, Vocabulary::kPad, Vocabulary::kPad, Vocabulary::kEos};
  CHECK(loss(Mat::Zero(4, 22), padded) == doctest::Approx(std::log(22.0)));

  const std::vector<int> pads(4, Vocabulary::kPad);
  CHECK(code_of([&] { loss(Mat::Zero(4, 22), pads); }) == ErrorCode::kPrecondition);
  CHECK(code_of([&] { loss(Mat::Zero(3, 22), targets); }) == ErrorCode::kPrecondition);
}

TEST_CASE("teacher forcing targets") {
  const std::vector<int> dec{Vocabulary::kBos, 3, 7, 8};
  // The SD slot predicts BOS; every later row predicts the next token.
  CHECK(teacher_forcing_targets(dec) ==
        std::vector<int>{Vocabulary::kBos, 3, 7, 8, Vocabulary::kEos});
  const Example e = make_example(Vocabulary(4), parse_text("v1").nodes(),
                                 parse_text("ADD v1 v2").nodes(), 0.25);
  CHECK(e.decoder_ids == std::vector<int>{Vocabulary::kBos, 3, 7, 8});
  CHECK(e.targets.size() == e.decoder_ids.size() + 1);
  CHECK(e.targets.back() == Vocabulary::kEos);
}

TEST_CASE("gradients match central differences") {
  Hyperparams h = tiny();
  const ModelParams m = init_model(h, Vocabulary(4), 2);
  Rng rng(5);
  std::vector<Example> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_example(m, 4 + i, 3 + i, rng));
  const GradCheckResult g = gradient_check(m, batch, 200, 11);
  CHECK(g.probes.size() == 200);
  CHECK(g.max_rel_error < 1e-4);
}

TEST_CASE("gradient of unused embedding rows is zero") {
  const ModelParams m = init_model(tiny(), Vocabulary(4), 3);
  const Vocabulary& v = m.vocab;
  const std::vector<Example> batch{
      make_example(v, parse_text("ADD v1 v2").nodes(), parse_text("v1").nodes(), 0.3)};
  Weights g = zeros_like(m.weights);
  compute_gradients(m, batch, g);
  const std::set<int> enc_used{v.id_of("ADD"), v.id_of("v1"), v.id_of("v2")};
  const std::set<int> dec_used{Vocabulary::kBos, v.id_of("v1")};
  for (int id = 0; id < v.size(); ++id) {
    if (!enc_used.contains(id)) CHECK(g.enc_embed.row(id).isZero(0.0));
    if (!dec_used.contains(id)) CHECK(g.dec_embed.row(id).isZero(0.0));
  }
  CHECK_FALSE(g.enc_embed.row(v.id_of("ADD")).isZero(0.0));
}

TEST_CASE("duplicating every example leaves the mean gradient unchanged") {
  const ModelParams m = init_model(tiny(), Vocabulary(4), 4);
  Rng rng(8);
  const Example a = random_example(m, 5, 4, rng);
  const Example b = random_example(m, 3, 6, rng);
  const std::vector<Example> once{a, b};
  const std::vector<Example> twice{a, a, b, b};
  Weights g1 = zeros_like(m.weights), g2 = zeros_like(m.weights);
  const BatchStats s1 = compute_gradients(m, once, g1);
  const BatchStats s2 = compute_gradients(m, twice, g2);
  CHECK(std::abs(s1.loss - s2.loss) < 1e-12);
  std::vector<const Mat*> left;
  for_each_tensor(g1, [&](const std::string&, const Mat& t) { left.push_back(&t); });
  std::size_t i = 0;
  double worst = 0.0;
  for_each_tensor(g2, [&](const std::string&, const Mat& t) {
    worst = std::max(worst, (*left[i++] - t).cwiseAbs().maxCoeff());
  });
  CHECK(worst < 1e-12);

  Weights g3 = zeros_like(m.weights);
  compute_gradients(m, twice, g3, 2);
  i = 0;
  worst = 0.0;
  for_each_tensor(g3, [&](const std::string&, const Mat& t) {
    worst = std::max(worst, (*left[i++] - t).cwiseAbs().maxCoeff());
  });
  CHECK(worst < 1e-12);
}

TEST_CASE("training: deterministic, finite and loss decreasing") {
  Hyperparams h = tiny();
  const auto pairs = four_pairs();
  TrainOptions opts;
  opts.max_steps = 50;
  opts.check_finite = true;
  const TrainResult a = train(pairs, h, Vocabulary(4), 21, opts);
  const TrainResult b = train(pairs, h, Vocabulary(4), 21, opts);
  CHECK(same_weights(a.model.weights, b.model.weights));
  CHECK(all_finite(a.model.weights));
  REQUIRE(a.curve.size() == 50);
  CHECK(a.curve.front().loss == doctest::Approx(std::log(22.0)).epsilon(0.05));

  // Window-5 moving average.
  std::vector<double> smooth;
  for (std::size_t i = 4; i < a.curve.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i - 4; j <= i; ++j) s += a.curve[j].loss;
    smooth.push_back(s / 5.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
  CHECK(a.curve.back().loss < a.curve.front().loss);

  const TrainResult c = train(pairs, h, Vocabulary(4), 22, opts);
  CHECK_FALSE(same_weights(a.model.weights, c.model.weights));
}

TEST_CASE("training rejects bad input and non-finite losses") {
  Hyperparams h = tiny();
  CHECK(code_of([&] { train({}, h, Vocabulary(4), 1); }) == ErrorCode::kPrecondition);

  h.max_len = 1;
  const auto pairs = four_pairs();
  CHECK(code_of([&] { train(pairs, h, Vocabulary(4), 1); }) == ErrorCode::kSequenceTooLong);

  ModelParams m = init_model(tiny(), Vocabulary(4), 1);
  m.weights.out.b(0, 3) = std::numeric_limits<double>::quiet_NaN();
  const auto examples = make_examples(m.vocab, pairs);
  TrainOptions opts;
  opts.max_steps = 2;
  CHECK(code_of([&] { train_examples(m, examples, 1, opts); }) == ErrorCode::kNonFiniteLoss);

  Hyperparams odd = tiny();
  odd.n_heads = 3;
  CHECK(code_of([&] { odd.validate(); }) == ErrorCode::kPrecondition);
}

TEST_CASE("AdamW decays weights but not biases or norms") {
  Hyperparams h = tiny();
  h.weight_decay = 0.5;
  ModelParams m = init_model(h, Vocabulary(4), 6);
  m.weights.out.b.setConstant(0.25);
  const Weights before = m.weights;
  AdamW opt(m.weights, h);
  opt.step(m.weights, zeros_like(m.weights));
  CHECK(opt.steps() == 1);
  CHECK(m.weights.out.b == before.out.b);
  CHECK(m.weights.enc_norm.gain == before.enc_norm.gain);
  const double shrink = 1.0 - h.lr * h.weight_decay;
  CHECK((m.weights.out.w - before.out.w * shrink).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((m.weights.enc_embed - before.enc_embed * shrink).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("global gradient-norm clipping") {
  const ModelParams m = init_model(tiny(), Vocabulary(4), 13);
  Weights g = zeros_like(m.weights);
  g.out.b(0, 0) = 3.0;
  g.sd_w(0, 1) = 4.0;
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g.out.b(0, 0) == doctest::Approx(0.6));
  CHECK(g.sd_w(0, 1) == doctest::Approx(0.8));
  CHECK(clip_global_norm(g, 2.0) == doctest::Approx(1.0));
  CHECK(g.sd_w(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("checkpoint: round trip and error codes") {
  Hyperparams h = tiny();
  h.lr = 0.001;
  const ModelParams m = init_model(h, Vocabulary(4), 9);
  const std::string bytes = checkpoint_bytes(m);
  CHECK(bytes.substr(0, 8) == "TSGPMDL1");
  const ModelParams back = model_from_bytes(bytes);
  CHECK(checkpoint_bytes(back) == bytes);
  CHECK(same_weights(back.weights, m.weights));
  CHECK(back.vocab == m.vocab);

  const RoundTripResult rt = checkpoint_round_trip(m, 2);
  CHECK(rt.bytes_identical);
  CHECK(rt.logits_identical);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { model_from_bytes(bad); }) == ErrorCode::kBadMagic);
  CHECK(code_of([&] { model_from_bytes(bytes.substr(0, bytes.size() - 4)); }) ==
        ErrorCode::kTruncated);
  CHECK(code_of([&] { model_from_bytes(bytes + "abcd"); }) == ErrorCode::kTruncated);

  std::string renamed = bytes;
  const auto at = renamed.find("\"enc.embed\"");
  REQUIRE(at != std::string::npos);
  renamed.replace(at, 11, "\"enc.embex\"");
  CHECK(code_of([&] { model_from_bytes(renamed); }) == ErrorCode::kManifestMismatch);
  CHECK(code_of([&] { model_from_bytes("TSGP"); }) == ErrorCode::kBadMagic);
  CHECK(code_of([&] { model_from_bytes(bytes.substr(0, 10)); }) == ErrorCode::kTruncated);

  const std::string path = test::temp_path("model.bin");
  save_checkpoint(m, path);
  const ModelParams loaded = load_checkpoint(path);
  CHECK(checkpoint_bytes(loaded) == bytes);
  const auto header = read_checkpoint_header(path);
  CHECK(header.at("hyperparams").at("lr").get<double>() == 0.001);
  CHECK(header.at("hyperparams").at("epochs").get<int>() == 8);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::kIo);
}

TEST_CASE("incremental decoding equals the full forward pass") {
  const ModelParams m = init_model(tiny(), Vocabulary(4), 12);
  const std::vector<int> in{3, 7, 8};
  const std::vector<int> dec{Vocabulary::kBos, 4, 9, 15};
  const Mat full = forward(m, in, 0.7, dec).logits;
  DecoderSession s(m, in, 0.7);
  for (std::size_t t = 0; t < dec.size(); ++t) {
    const RowVec row = s.step(dec[t]);
    CHECK((row - full.row(static_cast<Eigen::Index>(t) + 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}
