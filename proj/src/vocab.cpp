#include "tsgp/vocab.hpp"

#include "tsgp/error.hpp"

namespace tsgp {

Vocabulary::Vocabulary(int n_vars) : n_vars_(n_vars) {
  if (n_vars < 1) throw Error(ErrorCode::kPrecondition, "vocabulary needs at least one variable");
  symbols_ = {"PAD", "BOS", "EOS"};
  for (int i = 0; i < PrimitiveSet::kNumOps; ++i) {
    symbols_.push_back(token_name(Node::op(static_cast<Op>(i))));
  }
  for (int i = 0; i < n_vars; ++i) symbols_.push_back(token_name(Node::var(i)));
  for (int i = 0; i < PrimitiveSet::kNumConstants; ++i) {
    symbols_.push_back(token_name(Node::constant(i)));
  }
}

int Vocabulary::id(Node n) const {
  switch (n.kind) {
    case Node::Kind::kOp:
      return kFirstOp + n.index;
    case Node::Kind::kVar:
      if (n.index >= n_vars_) {
        throw Error(ErrorCode::kUnknownToken, "variable v" + std::to_string(n.index + 1) +
                                                  " outside a " + std::to_string(n_vars_) +
                                                  "-variable vocabulary");
      }
      return kFirstOp + PrimitiveSet::kNumOps + n.index;
    case Node::Kind::kConst:
      return kFirstOp + PrimitiveSet::kNumOps + n_vars_ + n.index;
  }
  return kPad;
}

Node Vocabulary::node(int id) const {
  if (id < kFirstOp || id >= size()) {
    throw Error(ErrorCode::kUnknownToken, "id " + std::to_string(id) + " is not an expression token");
  }
  int rel = id - kFirstOp;
  if (rel < PrimitiveSet::kNumOps) return Node::op(static_cast<Op>(rel));
  rel -= PrimitiveSet::kNumOps;
  if (rel < n_vars_) return Node::var(rel);
  return Node::constant(rel - n_vars_);
}

int Vocabulary::id_of(std::string_view symbol) const {
  for (int i = 0; i < size(); ++i) {
    if (symbols_[i] == symbol) return i;
  }
  throw Error(ErrorCode::kUnknownToken, "'" + std::string(symbol) + "'");
}

std::vector<int> Vocabulary::encode(std::span<const Node> nodes) const {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const Node& n : nodes) out.push_back(id(n));
  return out;
}

}  // namespace tsgp
