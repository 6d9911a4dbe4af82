#include "tsgp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsgp/error.hpp"

namespace tsgp {

void SamplerState::advance(Node n) {
  const int slot = depth_stack.back();
  depth_stack.pop_back();
  --need;
  if (n.is_op()) {
    depth_stack.push_back(slot + 1);
    depth_stack.push_back(slot + 1);
    need += 2;
  }
  ++emitted;
}

std::vector<bool> legal_mask(const SamplerState& state, const Vocabulary& vocab, int max_len,
                             int max_depth) {
  std::vector<bool> mask(vocab.size(), false);
  if (state.need == 0) {
    mask[Vocabulary::kEos] = true;
    return mask;
  }
  const bool op_ok = (state.emitted + 1) + (state.need + 1) + 1 <= max_len &&
                     state.depth_stack.back() < max_depth;
  for (int id = Vocabulary::kFirstOp; id < vocab.size(); ++id) {
    mask[id] = vocab.is_terminal(id) || op_ok;
  }
  return mask;
}

ExprTree sample_offspring(const ModelParams& model, const ExprTree& parent, double sd_desired,
                          Rng& rng, const SampleOptions& options) {
  if (!(sd_desired >= 0.0)) throw Error(ErrorCode::kPrecondition, "sd_desired must be >= 0");
  const Vocabulary& vocab = model.vocab;
  const int max_len = options.max_len > 0 ? std::min(options.max_len, model.hyper.max_len)
                                          : model.hyper.max_len;

  std::vector<int> input = vocab.encode(parent.nodes());
  if (static_cast<int>(input.size()) > model.hyper.max_len) input.resize(model.hyper.max_len);

  DecoderSession session(model, input, sd_desired);
  SamplerState state;
  state.temperature = options.temperature;
  std::vector<Node> out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowVec logits = session.step(Vocabulary::kBos);
  while (true) {
    const std::vector<bool> mask = legal_mask(state, vocab, max_len, options.max_depth);
    double top = -std::numeric_limits<double>::infinity();
    for (int id = 0; id < vocab.size(); ++id) {
      if (mask[id]) top = std::max(top, logits(id) / state.temperature);
    }
    std::vector<double> p(vocab.size(), 0.0);
    double total = 0.0;
    int last_legal = -1;
    for (int id = 0; id < vocab.size(); ++id) {
      if (!mask[id]) continue;
      p[id] = std::exp(logits(id) / state.temperature - top);
      total += p[id];
      last_legal = id;
    }
    int token = last_legal;
    double u = unit(rng) * total;
    for (int id = 0; id < vocab.size(); ++id) {
      if (!mask[id]) continue;
      if (u < p[id]) {
        token = id;
        break;
      }
      u -= p[id];
    }
    if (token == Vocabulary::kEos) break;
    const Node n = vocab.node(token);
    out.push_back(n);
    state.advance(n);
    // EOS is the only legal token from here.
    if (state.need == 0) break;
    logits = session.step(token);
  }
  return ExprTree::from_prefix(std::move(out));
}

}  // namespace tsgp
