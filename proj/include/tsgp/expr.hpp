#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tsgp {

using Rng = std::mt19937_64;

/// Independent seed for sub-stream `stream` of a run seeded with `base`
/// (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
/// Observations in rows, features in columns.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Op : std::uint8_t { kAdd = 0, kSub = 1, kMul = 2, kDiv = 3 };

/// One prefix-order token. `index` is the Op value, the zero-based variable
/// index, or the index into the constant grid, depending on `kind`.
struct Node {
  enum class Kind : std::uint8_t { kOp, kVar, kConst };
  Kind kind = Kind::kVar;
  std::uint8_t index = 0;

  static constexpr Node op(Op o) { return {Kind::kOp, static_cast<std::uint8_t>(o)}; }
  static constexpr Node var(int i) { return {Kind::kVar, static_cast<std::uint8_t>(i)}; }
  static constexpr Node constant(int i) { return {Kind::kConst, static_cast<std::uint8_t>(i)}; }

  constexpr bool is_op() const { return kind == Kind::kOp; }
  constexpr bool is_terminal() const { return kind != Kind::kOp; }
  constexpr int arity() const { return is_op() ? 2 : 0; }

  friend constexpr bool operator==(Node a, Node b) = default;
};

/// {+, -, *, protected /}, variables v1..vd and the closed constant grid
/// -0.5, -0.4, ..., +0.5.
struct PrimitiveSet {
  static constexpr int kNumOps = 4;
  static constexpr int kNumConstants = 11;

  int n_vars = 4;

  /// Grid value for index i; computed as an exact decimal ratio so that
  /// C+0.3 evaluates to the double nearest 0.3.
  static double constant_value(int i) { return static_cast<double>(i - 5) / 10.0; }
};

/// Tokenized view of a tree, e.g. `ADD v1 MUL v2 C+0.3`.
using TokenSeq = std::vector<std::string>;

std::string token_name(Node n);
/// Throws Error(kUnknownToken).
Node token_from_name(std::string_view name);

/// Parse tree stored as its prefix enumeration. Every instance is
/// structurally valid: operators have exactly two children and there are no
/// trailing nodes.
class ExprTree {
 public:
  ExprTree() : nodes_{Node::constant(5)} {}

  /// Validates and adopts a prefix sequence; throws kIncomplete/kTrailing.
  static ExprTree from_prefix(std::vector<Node> nodes);

  std::span<const Node> nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int depth() const;
  /// Depth of every node (root = 0), in prefix order.
  std::vector<int> node_depths() const;

  /// One past the last node of the subtree rooted at `pos`.
  int subtree_end(int pos) const;
  ExprTree subtree(int pos) const;
  /// Copy of this tree with the subtree at `pos` replaced by `donor`.
  ExprTree with_subtree(int pos, const ExprTree& donor) const;

  /// Highest variable index used plus one (0 when no variables occur).
  int variables_required() const;

  friend bool operator==(const ExprTree&, const ExprTree&) = default;

 private:
  explicit ExprTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
  std::vector<Node> nodes_;
};

std::vector<Node> serialize_prefix(const ExprTree& tree);
TokenSeq serialize_tokens(const ExprTree& tree);
/// Space separated canonical text form.
std::string to_text(const ExprTree& tree);
std::string to_infix(const ExprTree& tree);

ExprTree parse_prefix(std::span<const Node> nodes);
ExprTree parse_prefix(std::span<const std::string> tokens);
ExprTree parse_text(std::string_view text);

/// Evaluates on every row of `inputs`. Division by an exact zero yields 1.
/// Throws kStructural when a variable index exceeds the column count.
Vector evaluate(const ExprTree& tree, const Matrix& inputs);

enum class InitMethod { kFull, kGrow };

/// Samples a target depth uniformly in [depth_min, depth_max]. FULL places
/// operators down to that depth. GROW forces operators above depth_min and
/// afterwards picks a terminal with probability
/// |terminals| / (|terminals| + |operators|), where the terminal set is the
/// variables plus one constant generator.
ExprTree random_tree(InitMethod method, int depth_min, int depth_max, const PrimitiveSet& prims,
                     Rng& rng);

/// Uniform choice among the variables and one constant generator; the
/// constant value is then uniform over the grid.
Node random_terminal(const PrimitiveSet& prims, Rng& rng);

/// Ramped half-and-half: each tree picks GROW or FULL with equal
/// probability; the depth ramp comes from random_tree.
std::vector<ExprTree> ramped_half_and_half(int count, int depth_min, int depth_max,
                                           const PrimitiveSet& prims, Rng& rng);

}  // namespace tsgp
