#include "tsgp/expr.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "tsgp/error.hpp"

namespace tsgp {

namespace {

constexpr std::string_view kOpNames[] = {"ADD", "SUB", "MUL", "PDIV"};

// Position where the subtree starting at `start` closes, or -1 if the
// sequence runs out first.
int closing_position(std::span<const Node> nodes, int start) {
  int need = 1;
  for (int i = start; i < static_cast<int>(nodes.size()); ++i) {
    need += nodes[i].arity() - 1;
    if (need == 0) return i + 1;
  }
  return -1;
}

}  // namespace

std::string token_name(Node n) {
  switch (n.kind) {
    case Node::Kind::kOp:
      return std::string(kOpNames[n.index]);
    case Node::Kind::kVar:
      return "v" + std::to_string(n.index + 1);
    case Node::Kind::kConst: {
      const int tenths = static_cast<int>(n.index) - 5;
      std::string s = tenths < 0 ? "C-0." : "C+0.";
      s += static_cast<char>('0' + std::abs(tenths));
      return s;
    }
  }
  return "?";
}

Node token_from_name(std::string_view name) {
  for (int i = 0; i < PrimitiveSet::kNumOps; ++i) {
    if (name == kOpNames[i]) return Node::op(static_cast<Op>(i));
  }
  if (name.size() >= 2 && name[0] == 'v') {
    int idx = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
    if (ec == std::errc() && ptr == name.data() + name.size() && idx >= 1 && idx <= 255 &&
        name[1] != '0') {
      return Node::var(idx - 1);
    }
  }
  if (name.size() == 5 && name[0] == 'C' && (name[1] == '+' || name[1] == '-') && name[2] == '0' &&
      name[3] == '.' && name[4] >= '0' && name[4] <= '5') {
    const int digit = name[4] - '0';
    if (name[1] == '-' && digit == 0) {
      throw Error(ErrorCode::kUnknownToken, "negative zero constant; use C+0.0");
    }
    return Node::constant(5 + (name[1] == '-' ? -digit : digit));
  }
  throw Error(ErrorCode::kUnknownToken, "'" + std::string(name) + "'");
}

ExprTree ExprTree::from_prefix(std::vector<Node> nodes) {
  if (nodes.empty()) throw Error(ErrorCode::kIncomplete, "empty token sequence");
  const int end = closing_position(nodes, 0);
  if (end < 0) throw Error(ErrorCode::kIncomplete, "tokens exhausted with open operator slots");
  if (end != static_cast<int>(nodes.size())) {
    throw Error(ErrorCode::kTrailing,
                std::to_string(nodes.size() - end) + " token(s) after the tree closes");
  }
  for (const Node& n : nodes) {
    if ((n.is_op() && n.index >= PrimitiveSet::kNumOps) ||
        (n.kind == Node::Kind::kConst && n.index >= PrimitiveSet::kNumConstants)) {
      throw Error(ErrorCode::kUnknownToken, "node index out of range");
    }
  }
  return ExprTree(std::move(nodes));
}

int ExprTree::depth() const {
  const auto depths = node_depths();
  return *std::max_element(depths.begin(), depths.end());
}

std::vector<int> ExprTree::node_depths() const {
  std::vector<int> depths(nodes_.size());
  // Stack of depths for pending child slots.
  std::vector<int> pending{0};
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const int d = pending.back();
    pending.pop_back();
    depths[i] = d;
    if (nodes_[i].is_op()) {
      pending.push_back(d + 1);
      pending.push_back(d + 1);
    }
  }
  return depths;
}

int ExprTree::subtree_end(int pos) const { return closing_position(nodes_, pos); }

ExprTree ExprTree::subtree(int pos) const {
  const int end = subtree_end(pos);
  return ExprTree(std::vector<Node>(nodes_.begin() + pos, nodes_.begin() + end));
}

ExprTree ExprTree::with_subtree(int pos, const ExprTree& donor) const {
  const int end = subtree_end(pos);
  std::vector<Node> out;
  out.reserve(nodes_.size() - (end - pos) + donor.nodes_.size());
  out.insert(out.end(), nodes_.begin(), nodes_.begin() + pos);
  out.insert(out.end(), donor.nodes_.begin(), donor.nodes_.end());
  out.insert(out.end(), nodes_.begin() + end, nodes_.end());
  return ExprTree(std::move(out));
}

int ExprTree::variables_required() const {
  int req = 0;
  for (const Node& n : nodes_) {
    if (n.kind == Node::Kind::kVar) req = std::max(req, n.index + 1);
  }
  return req;
}

std::vector<Node> serialize_prefix(const ExprTree& tree) {
  return {tree.nodes().begin(), tree.nodes().end()};
}

TokenSeq serialize_tokens(const ExprTree& tree) {
  TokenSeq out;
  out.reserve(tree.size());
  for (const Node& n : tree.nodes()) out.push_back(token_name(n));
  return out;
}

std::string to_text(const ExprTree& tree) {
  std::string out;
  for (const Node& n : tree.nodes()) {
    if (!out.empty()) out += ' ';
    out += token_name(n);
  }
  return out;
}

namespace {

void infix_rec(const ExprTree& tree, int& pos, std::ostringstream& os) {
  const Node n = tree.nodes()[pos++];
  if (!n.is_op()) {
    if (n.kind == Node::Kind::kVar) {
      os << 'v' << (n.index + 1);
    } else {
      std::string s = token_name(n).substr(1);
      if (s.front() == '+') s.erase(0, 1);
      os << s;
    }
    return;
  }
  static constexpr char kSym[] = {'+', '-', '*', '%'};
  os << '(';
  infix_rec(tree, pos, os);
  os << ' ' << kSym[n.index] << ' ';
  infix_rec(tree, pos, os);
  os << ')';
}

}  // namespace

std::string to_infix(const ExprTree& tree) {
  std::ostringstream os;
  int pos = 0;
  infix_rec(tree, pos, os);
  return os.str();
}

ExprTree parse_prefix(std::span<const Node> nodes) {
  return ExprTree::from_prefix(std::vector<Node>(nodes.begin(), nodes.end()));
}

ExprTree parse_prefix(std::span<const std::string> tokens) {
  std::vector<Node> nodes;
  nodes.reserve(tokens.size());
  for (const auto& t : tokens) nodes.push_back(token_from_name(t));
  return ExprTree::from_prefix(std::move(nodes));
}

ExprTree parse_text(std::string_view text) {
  TokenSeq tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return parse_prefix(std::span<const std::string>(tokens));
}

Vector evaluate(const ExprTree& tree, const Matrix& inputs) {
  const auto nodes = tree.nodes();
  const Eigen::Index m = inputs.rows();
  if (tree.variables_required() > inputs.cols()) {
    throw Error(ErrorCode::kStructural, "variable v" + std::to_string(tree.variables_required()) +
                                            " exceeds " + std::to_string(inputs.cols()) +
                                            " input columns");
  }
  // Reverse prefix order is a valid postfix schedule.
  std::vector<Vector> stack;
  stack.reserve(nodes.size() / 2 + 2);
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    const Node n = *it;
    switch (n.kind) {
      case Node::Kind::kVar:
        stack.emplace_back(inputs.col(n.index));
        break;
      case Node::Kind::kConst:
        stack.emplace_back(Vector::Constant(m, PrimitiveSet::constant_value(n.index)));
        break;
      case Node::Kind::kOp: {
        Vector lhs = std::move(stack.back());
        stack.pop_back();
        Vector& rhs = stack.back();
        switch (static_cast<Op>(n.index)) {
          case Op::kAdd: lhs.array() += rhs.array(); break;
          case Op::kSub: lhs.array() -= rhs.array(); break;
          case Op::kMul: lhs.array() *= rhs.array(); break;
          case Op::kDiv:
            for (Eigen::Index i = 0; i < m; ++i) {
              lhs[i] = rhs[i] == 0.0 ? 1.0 : lhs[i] / rhs[i];
            }
            break;
        }
        rhs = std::move(lhs);
        break;
      }
    }
  }
  return std::move(stack.back());
}

Node random_terminal(const PrimitiveSet& prims, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, prims.n_vars);
  const int t = pick(rng);
  if (t < prims.n_vars) return Node::var(t);
  std::uniform_int_distribution<int> grid(0, PrimitiveSet::kNumConstants - 1);
  return Node::constant(grid(rng));
}

ExprTree random_tree(InitMethod method, int depth_min, int depth_max, const PrimitiveSet& prims,
                     Rng& rng) {
  if (depth_min < 0 || depth_min > depth_max) {
    throw Error(ErrorCode::kPrecondition, "need 0 <= depth_min <= depth_max");
  }
  const int target = std::uniform_int_distribution<int>(depth_min, depth_max)(rng);
  const double terminal_ratio =
      static_cast<double>(prims.n_vars + 1) / (prims.n_vars + 1 + PrimitiveSet::kNumOps);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_op(0, PrimitiveSet::kNumOps - 1);

  std::vector<Node> nodes;
  std::vector<int> pending{0};
  while (!pending.empty()) {
    const int d = pending.back();
    pending.pop_back();
    bool terminal = d == target;
    if (!terminal && method == InitMethod::kGrow && d >= depth_min) {
      terminal = unit(rng) < terminal_ratio;
    }
    if (terminal) {
      nodes.push_back(random_terminal(prims, rng));
    } else {
      nodes.push_back(Node::op(static_cast<Op>(pick_op(rng))));
      pending.push_back(d + 1);
      pending.push_back(d + 1);
    }
  }
  return ExprTree::from_prefix(std::move(nodes));
}

std::vector<ExprTree> ramped_half_and_half(int count, int depth_min, int depth_max,
                                           const PrimitiveSet& prims, Rng& rng) {
  std::vector<ExprTree> out;
  out.reserve(count);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < count; ++i) {
    const InitMethod m = coin(rng) ? InitMethod::kGrow : InitMethod::kFull;
    out.push_back(random_tree(m, depth_min, depth_max, prims, rng));
  }
  return out;
}

}  // namespace tsgp
