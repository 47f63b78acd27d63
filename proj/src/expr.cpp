#include "featforge/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

namespace featforge {

namespace {

constexpr auto C = ValueType::Continuous;
constexpr auto B = ValueType::Boolean;

// Order must follow the Op enumerators.
constexpr std::array<NodeKind, kOpCount> kKinds{{
    {Op::Feature, "x", C, 0, {C, C}, true, 1},
    {Op::Add, "+", C, 2, {C, C}, true, 1},
    {Op::Sub, "-", C, 2, {C, C}, true, 1},
    {Op::Mul, "*", C, 2, {C, C}, true, 2},
    {Op::Div, "/", C, 2, {C, C}, true, 3},
    {Op::Square, "square", C, 1, {C, C}, true, 3},
    {Op::Cube, "cube", C, 1, {C, C}, true, 3},
    {Op::Sqrt, "sqrt", C, 1, {C, C}, true, 4},
    {Op::Sin, "sin", C, 1, {C, C}, true, 4},
    {Op::Cos, "cos", C, 1, {C, C}, true, 4},
    {Op::Exp, "exp", C, 1, {C, C}, true, 4},
    {Op::Log, "log", C, 1, {C, C}, true, 4},
    {Op::Exponent, "exponent", C, 2, {C, C}, true, 4},
    {Op::Logit, "logit", C, 1, {C, C}, true, 4},
    {Op::Tanh, "tanh", C, 1, {C, C}, true, 4},
    {Op::Gauss, "gauss", C, 1, {C, C}, true, 4},
    {Op::Relu, "relu", C, 1, {C, C}, true, 4},
    {Op::And, "and", B, 2, {B, B}, false, 4},
    {Op::Or, "or", B, 2, {B, B}, false, 4},
    {Op::Not, "not", B, 1, {B, B}, false, 4},
    {Op::Xor, "xor", B, 2, {B, B}, false, 4},
    {Op::Equal, "=", B, 2, {C, C}, false, 2},
    {Op::Less, "<", B, 2, {C, C}, false, 2},
    {Op::LessEq, "<=", B, 2, {C, C}, false, 2},
    {Op::Greater, ">", B, 2, {C, C}, false, 2},
    {Op::GreaterEq, ">=", B, 2, {C, C}, false, 2},
}};

bool is_infix(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Equal:
    case Op::Less:
    case Op::LessEq:
    case Op::Greater:
    case Op::GreaterEq:
      return true;
    default:
      return false;
  }
}

std::string_view type_name(ValueType t) { return t == C ? "continuous" : "boolean"; }

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

bool unit_weights(const Node& n) {
  return std::all_of(n.active_weights().begin(), n.active_weights().end(), [](double w) { return w == 1.0; });
}

std::string weight_suffix(const Node& n) {
  std::string s = "{";
  auto ws = n.active_weights();
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (i) s += ',';
    s += format_double(ws[i]);
  }
  return s + "}";
}

}  // namespace

std::span<const NodeKind> node_kinds() { return kKinds; }

const NodeKind& kind_of(Op op) { return kKinds[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.op;
  return std::nullopt;
}

std::size_t weight_count(Op op) {
  const auto& k = kind_of(op);
  if (!k.differentiable) return 0;
  if (k.arity == 0) return 1;
  return static_cast<std::size_t>(std::count(k.args().begin(), k.args().end(), C));
}

bool operator==(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  if (a.op == Op::Feature && a.feature != b.feature) return false;
  auto wa = a.active_weights();
  auto wb = b.active_weights();
  return std::equal(wa.begin(), wa.end(), wb.begin());
}

std::size_t subtree_start(const Tree& tree, std::size_t root) {
  std::size_t need = 1;
  std::size_t i = root + 1;
  while (need > 0) {
    if (i == 0) throw std::logic_error("subtree_start: malformed tree");
    --i;
    need += tree.nodes[i].arity();
    --need;
  }
  return i;
}

std::vector<int> subtree_depths(const Tree& tree) {
  std::vector<int> depths(tree.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto arity = tree.nodes[i].arity();
    if (stack.size() < arity) throw std::logic_error("subtree_depths: malformed tree");
    int d = 0;
    for (std::size_t a = 0; a < arity; ++a) {
      d = std::max(d, depths[stack.back()] + 1);
      stack.pop_back();
    }
    depths[i] = d;
    stack.push_back(i);
  }
  return depths;
}

std::vector<int> node_levels(const Tree& tree) {
  std::vector<int> levels(tree.size(), 0);
  std::vector<std::size_t> stack;
  std::vector<std::array<std::size_t, 2>> children(tree.size());
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto arity = tree.nodes[i].arity();
    for (std::size_t a = arity; a-- > 0;) {
      children[i][a] = stack.back();
      stack.pop_back();
    }
    stack.push_back(i);
  }
  for (std::size_t i = tree.size(); i-- > 0;)
    for (std::size_t a = 0; a < tree.nodes[i].arity(); ++a) levels[children[i][a]] = levels[i] + 1;
  return levels;
}

int depth(const Tree& tree) { return tree.empty() ? 0 : subtree_depths(tree).back(); }

ComplexityTable ComplexityTable::defaults() {
  ComplexityTable t;
  for (const auto& k : kKinds) t.set(k.op, k.complexity);
  return t;
}

long long complexity(const Tree& tree, const ComplexityTable& table) {
  std::vector<long long> stack;
  for (const auto& n : tree.nodes) {
    const auto arity = n.arity();
    if (stack.size() < arity) throw std::invalid_argument("complexity: malformed tree");
    if (arity == 0) {
      stack.push_back(table[n.op]);
      continue;
    }
    long long sum = 0;
    for (std::size_t a = 0; a < arity; ++a) {
      sum += stack.back();
      stack.pop_back();
    }
    stack.push_back(table[n.op] * sum);
  }
  if (stack.size() != 1) throw std::invalid_argument("complexity: malformed tree");
  return stack.back();
}

long long complexity(const Individual& ind, const ComplexityTable& table) {
  long long c = 0;
  for (const auto& t : ind.trees) c += complexity(t, table);
  return c;
}

std::size_t node_count(const Individual& ind) {
  std::size_t n = 0;
  for (const auto& t : ind.trees) n += t.size();
  return n;
}

Individual Individual::clone_structure() const {
  Individual out;
  out.trees = trees;
  return out;
}

bool same_structure(const Individual& a, const Individual& b) { return a.trees == b.trees; }

std::vector<Violation> validate(const Tree& tree, const Limits& limits) {
  std::vector<Violation> out;
  if (tree.empty()) {
    out.push_back({0, "empty tree"});
    return out;
  }
  std::vector<ValueType> stack;
  bool structural = true;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.nodes[i];
    const auto& k = n.kind();
    for (double w : n.active_weights())
      if (!std::isfinite(w)) out.push_back({i, "non-finite weight at node " + std::to_string(i)});
    if (n.op == Op::Feature && limits.n_features > 0 && n.feature >= limits.n_features)
      out.push_back({i, "feature x" + std::to_string(n.feature) + " out of range at node " + std::to_string(i)});
    if (stack.size() < k.arity) {
      out.push_back({i, std::string(k.name) + " needs " + std::to_string(k.arity) + " args at node " +
                            std::to_string(i)});
      structural = false;
      stack.clear();
      stack.push_back(k.out_type);
      continue;
    }
    bool types_ok = true;
    for (std::size_t a = 0; a < k.arity; ++a)
      types_ok &= stack[stack.size() - k.arity + a] == k.arg_types[a];
    if (!types_ok) {
      out.push_back({i, std::string(k.name) + " expects " + std::string(type_name(k.arg_types[0])) +
                            " args at node " + std::to_string(i)});
      structural = false;
    }
    stack.resize(stack.size() - k.arity);
    stack.push_back(k.out_type);
  }
  if (stack.size() != 1) {
    out.push_back({tree.size() - 1, "expected one value on the stack, found " + std::to_string(stack.size())});
    structural = false;
  }
  if (structural) {
    const int d = depth(tree);
    if (d > limits.max_depth)
      out.push_back({tree.size() - 1, "depth " + std::to_string(d) + " exceeds limit " +
                                          std::to_string(limits.max_depth)});
  }
  return out;
}

std::vector<Violation> validate(const Individual& ind, const Limits& limits) {
  std::vector<Violation> out;
  if (ind.trees.empty() || ind.trees.size() > limits.max_dim)
    out.push_back({0, "dimensionality " + std::to_string(ind.trees.size()) + " outside [1, " +
                          std::to_string(limits.max_dim) + "]"});
  std::size_t offset = 0;
  for (const auto& t : ind.trees) {
    for (auto v : validate(t, limits)) out.push_back({v.node + offset, std::move(v.message)});
    offset += t.size();
  }
  return out;
}

std::string to_string(const Tree& tree, bool with_weights) {
  std::vector<std::string> stack;
  for (const auto& n : tree.nodes) {
    const auto& k = n.kind();
    std::string s;
    if (n.op == Op::Feature) {
      s = "x" + std::to_string(n.feature);
    } else if (n.op == Op::Square || n.op == Op::Cube) {
      s = "(" + stack.back() + (n.op == Op::Square ? "^2)" : "^3)");
      stack.pop_back();
    } else if (is_infix(n.op)) {
      std::string rhs = std::move(stack.back());
      stack.pop_back();
      std::string lhs = std::move(stack.back());
      stack.pop_back();
      s = "(" + lhs + std::string(k.name) + rhs + ")";
    } else {
      std::vector<std::string> args(k.arity);
      for (std::size_t a = k.arity; a-- > 0;) {
        args[a] = std::move(stack.back());
        stack.pop_back();
      }
      s = std::string(k.name) + "(";
      for (std::size_t a = 0; a < args.size(); ++a) s += (a ? "," : "") + args[a];
      s += ")";
    }
    if (with_weights && n.n_weights() > 0 && !unit_weights(n)) s += weight_suffix(n);
    stack.push_back(std::move(s));
  }
  return stack.empty() ? std::string{} : stack.back();
}

std::string to_string(const Individual& ind, bool with_weights) {
  std::string s;
  for (const auto& t : ind.trees) s += "[" + to_string(t, with_weights) + "]";
  return s;
}

ParseError::ParseError(Kind kind, std::size_t position, const std::string& what)
    : std::runtime_error(what + " at position " + std::to_string(position)), kind_(kind), position_(position) {}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Individual individual() {
    Individual ind;
    skip_ws();
    if (at_end()) syntax("expected '['");
    while (!at_end()) {
      expect('[');
      ind.trees.push_back(checked_tree());
      expect(']');
      skip_ws();
    }
    return ind;
  }

  Tree single_tree() {
    Tree t = checked_tree();
    skip_ws();
    if (!at_end()) syntax("unexpected trailing input");
    return t;
  }

 private:
  Tree checked_tree() {
    const std::size_t start = pos_;
    Tree t;
    expr(t);
    for (const auto& v : validate(t, Limits{1 << 20, 1 << 20, 0}))
      throw ParseError(ParseError::Kind::Type, start, v.message);
    return t;
  }

  void expr(Tree& t) {
    skip_ws();
    if (peek() == '(') {
      ++pos_;
      expr(t);
      skip_ws();
      if (peek() == '^') {
        ++pos_;
        skip_ws();
        const char p = get();
        if (p == '2')
          t.nodes.push_back(Node::function(Op::Square));
        else if (p == '3')
          t.nodes.push_back(Node::function(Op::Cube));
        else
          syntax("expected 2 or 3 after '^'", pos_ - 1);
      } else {
        const std::size_t op_pos = pos_;
        const auto op = infix_operator();
        if (!op) syntax("expected infix operator", op_pos);
        expr(t);
        t.nodes.push_back(Node::function(*op));
      }
      skip_ws();
      expect(')');
    } else if (std::isalpha(static_cast<unsigned char>(peek()))) {
      const std::size_t name_pos = pos_;
      std::string name;
      while (std::isalpha(static_cast<unsigned char>(peek()))) name += get();
      if (name == "x" && std::isdigit(static_cast<unsigned char>(peek()))) {
        std::uint32_t idx = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), idx);
        if (ec != std::errc{}) syntax("bad feature index");
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        t.nodes.push_back(Node::terminal(idx));
      } else {
        const auto op = op_from_name(name);
        if (!op || *op == Op::Feature || is_infix(*op))
          throw ParseError(ParseError::Kind::UnknownOperator, name_pos, "unknown operator '" + name + "'");
        const auto arity = kind_of(*op).arity;
        skip_ws();
        expect('(');
        for (std::size_t a = 0; a < arity; ++a) {
          if (a) {
            skip_ws();
            expect(',');
          }
          expr(t);
        }
        skip_ws();
        expect(')');
        t.nodes.push_back(Node::function(*op));
      }
    } else {
      syntax(at_end() ? "unexpected end of input" : std::string("unexpected '") + peek() + "'");
    }
    skip_ws();
    if (peek() == '{') weights(t.nodes.back());
  }

  void weights(Node& n) {
    const std::size_t start = pos_;
    expect('{');
    std::vector<double> ws;
    while (true) {
      skip_ws();
      double v = 0;
      auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
      if (ec != std::errc{}) syntax("expected number");
      pos_ = static_cast<std::size_t>(ptr - text_.data());
      ws.push_back(v);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      break;
    }
    if (ws.size() != n.n_weights())
      syntax("expected " + std::to_string(n.n_weights()) + " weights for " + std::string(n.kind().name), start);
    std::copy(ws.begin(), ws.end(), n.weights.begin());
  }

  std::optional<Op> infix_operator() {
    const char c = get();
    switch (c) {
      case '+':
        return Op::Add;
      case '-':
        return Op::Sub;
      case '*':
        return Op::Mul;
      case '/':
        return Op::Div;
      case '=':
        return Op::Equal;
      case '<':
        if (peek() == '=') {
          ++pos_;
          return Op::LessEq;
        }
        return Op::Less;
      case '>':
        if (peek() == '=') {
          ++pos_;
          return Op::GreaterEq;
        }
        return Op::Greater;
      default:
        return std::nullopt;
    }
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char get() { return at_end() ? '\0' : text_[pos_++]; }
  void expect(char c) {
    if (peek() != c) syntax(std::string("expected '") + c + "'");
    ++pos_;
  }
  [[noreturn]] void syntax(const std::string& msg) { syntax(msg, pos_); }
  [[noreturn]] void syntax(const std::string& msg, std::size_t at) {
    throw ParseError(ParseError::Kind::Syntax, at, msg);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Tree parse_tree(std::string_view text) { return Parser(text).single_tree(); }

Individual parse(std::string_view text) { return Parser(text).individual(); }

}  // namespace featforge
