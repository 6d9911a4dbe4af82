#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsgp/expr.hpp"

namespace tsgp {

/// PAD, BOS, EOS, the four operators, v1..vd, then the 11 grid constants.
/// 22 symbols for d = 4.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kFirstOp = 3;

  explicit Vocabulary(int n_vars = 4);

  int size() const { return static_cast<int>(symbols_.size()); }
  int n_vars() const { return n_vars_; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(int id) const { return symbols_.at(id); }

  int id(Node n) const;
  /// Throws kUnknownToken for special ids.
  Node node(int id) const;
  int id_of(std::string_view symbol) const;

  bool is_special(int id) const { return id < kFirstOp; }
  bool is_operator(int id) const { return id >= kFirstOp && id < kFirstOp + PrimitiveSet::kNumOps; }
  bool is_terminal(int id) const { return id >= kFirstOp + PrimitiveSet::kNumOps && id < size(); }

  std::vector<int> encode(std::span<const Node> nodes) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  int n_vars_;
  std::vector<std::string> symbols_;
};

}  // namespace tsgp
