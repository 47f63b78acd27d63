#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace featforge {

enum class ValueType : std::uint8_t { Continuous, Boolean };

enum class Op : std::uint8_t {
  Feature,
  // continuous
  Add,
  Sub,
  Mul,
  Div,
  Square,
  Cube,
  Sqrt,
  Sin,
  Cos,
  Exp,
  Log,
  Exponent,
  Logit,
  Tanh,
  Gauss,
  Relu,
  // boolean
  And,
  Or,
  Not,
  Xor,
  Equal,
  Less,
  LessEq,
  Greater,
  GreaterEq,
};

inline constexpr std::size_t kOpCount = static_cast<std::size_t>(Op::GreaterEq) + 1;

struct NodeKind {
  Op op;
  std::string_view name;
  ValueType out_type;
  std::uint8_t arity;
  std::array<ValueType, 2> arg_types;
  bool differentiable;
  int complexity;  // default c_o

  std::span<const ValueType> args() const { return {arg_types.data(), arity}; }
};

/// Registry of every operator and the terminal kind.
std::span<const NodeKind> node_kinds();
const NodeKind& kind_of(Op op);
std::optional<Op> op_from_name(std::string_view name);

/// Number of trainable edge weights carried by a node of this kind. Terminals
/// carry one weight scaling the feature; differentiable operators carry one
/// per continuous argument.
std::size_t weight_count(Op op);

struct Node {
  Op op = Op::Feature;
  std::uint32_t feature = 0;
  std::array<double, 2> weights{1.0, 1.0};

  static Node terminal(std::uint32_t feature, double w = 1.0) { return {Op::Feature, feature, {w, 1.0}}; }
  static Node function(Op op) { return {op, 0, {1.0, 1.0}}; }

  const NodeKind& kind() const { return kind_of(op); }
  std::uint8_t arity() const { return kind().arity; }
  std::size_t n_weights() const { return weight_count(op); }
  std::span<double> active_weights() { return {weights.data(), n_weights()}; }
  std::span<const double> active_weights() const { return {weights.data(), n_weights()}; }

  friend bool operator==(const Node& a, const Node& b);
};

/// A single expression in postfix (stack) order; the last node is the root.
struct Tree {
  std::vector<Node> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  ValueType type() const { return nodes.back().kind().out_type; }
  friend bool operator==(const Tree&, const Tree&) = default;
};

/// Index of the first node of the subtree rooted at `root`.
std::size_t subtree_start(const Tree& tree, std::size_t root);
/// Depth of each node's subtree (leaf = 0).
std::vector<int> subtree_depths(const Tree& tree);
/// Distance of each node from the root (root = 0).
std::vector<int> node_levels(const Tree& tree);
int depth(const Tree& tree);

struct ComplexityTable {
  std::array<int, kOpCount> weights{};

  static ComplexityTable defaults();
  int operator[](Op op) const { return weights[static_cast<std::size_t>(op)]; }
  void set(Op op, int w) { weights[static_cast<std::size_t>(op)] = w; }
};

/// C(o) = c_o * sum of argument complexities; a leaf scores its own weight.
long long complexity(const Tree& tree, const ComplexityTable& table = ComplexityTable::defaults());

/// One candidate representation: m trees feeding a linear output layer.
struct Individual {
  std::vector<Tree> trees;
  std::vector<double> beta;
  double intercept = 0.0;
  std::vector<double> fitness;
  long long complexity = 0;
  int rank = 0;
  double crowd_dist = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  std::vector<double> case_errors;  // per training sample squared error
  bool evaluated = false;
  std::array<int, 2> parents{-1, -1};

  std::size_t dim() const { return trees.size(); }
  /// Copy of the representation only: no fit, fitness, or lineage.
  Individual clone_structure() const;
};

bool same_structure(const Individual& a, const Individual& b);

long long complexity(const Individual& ind, const ComplexityTable& table = ComplexityTable::defaults());
std::size_t node_count(const Individual& ind);

struct Violation {
  std::size_t node;
  std::string message;
};

struct Limits {
  int max_depth = 10;
  std::size_t max_dim = 50;
  std::size_t n_features = 0;  // 0: feature indices not checked
};

std::vector<Violation> validate(const Tree& tree, const Limits& limits = {});
/// Violation node indices are offsets into the concatenation of all trees.
std::vector<Violation> validate(const Individual& ind, const Limits& limits = {});

std::string to_string(const Tree& tree, bool with_weights = true);
/// Bracketed feature list, e.g. "[tanh(x0)][(x3^2)]". Weights other than 1
/// are written as a "{w,...}" suffix after the node they belong to.
std::string to_string(const Individual& ind, bool with_weights = true);

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownOperator, Type };
  ParseError(Kind kind, std::size_t position, const std::string& what);
  Kind kind() const { return kind_; }
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

Tree parse_tree(std::string_view text);
Individual parse(std::string_view text);

}  // namespace featforge
