#include "featforge/variation.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "featforge/linear.hpp"
#include "featforge/parallel.hpp"

namespace featforge {

namespace {

constexpr std::array kContinuousOps{Op::Add,  Op::Sub, Op::Mul, Op::Div,      Op::Square, Op::Cube,
                                    Op::Sqrt, Op::Sin, Op::Cos, Op::Exp,      Op::Log,    Op::Exponent,
                                    Op::Logit, Op::Tanh, Op::Gauss, Op::Relu};
constexpr std::array kBooleanOps{Op::And,  Op::Or,    Op::Not,     Op::Xor,     Op::Equal,
                                 Op::Less, Op::LessEq, Op::Greater, Op::GreaterEq};
constexpr std::array kLogicalOps{Op::And, Op::Or, Op::Not, Op::Xor};
constexpr std::array kComparisonOps{Op::Equal, Op::Less, Op::LessEq, Op::Greater, Op::GreaterEq};

template <class Ops>
Op pick(const Ops& ops, Rng& rng) {
  return ops[uniform_index(rng, ops.size())];
}

Node fresh(Op op, Rng& rng) {
  Node n = Node::function(op);
  for (auto& w : n.active_weights()) w = initial_weight(rng);
  return n;
}

Node random_terminal(const SearchSpace& space, Rng& rng, std::span<const double> probs = {}) {
  std::uint32_t f = 0;
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!probs.empty() && total > 0.0) {
    std::discrete_distribution<std::uint32_t> dist(probs.begin(), probs.end());
    f = dist(rng);
  } else {
    f = static_cast<std::uint32_t>(uniform_index(rng, space.n_features));
  }
  return Node::terminal(f, initial_weight(rng));
}

void grow(std::vector<Node>& out, const SearchSpace& space, ValueType type, int remaining, bool force_function,
          Rng& rng, std::span<const double> probs) {
  if (type == ValueType::Continuous) {
    if (remaining <= 0 || (!force_function && uniform01(rng) < 0.5)) {
      out.push_back(random_terminal(space, rng, probs));
      return;
    }
    const Op op = pick(kContinuousOps, rng);
    for (std::size_t a = 0; a < kind_of(op).arity; ++a)
      grow(out, space, ValueType::Continuous, remaining - 1, false, rng, probs);
    out.push_back(fresh(op, rng));
    return;
  }
  if (remaining < 1) throw std::logic_error("grow: boolean subtree needs depth >= 1");
  const Op op = remaining == 1 ? pick(kComparisonOps, rng) : pick(kBooleanOps, rng);
  const auto& k = kind_of(op);
  for (std::size_t a = 0; a < k.arity; ++a) grow(out, space, k.arg_types[a], remaining - 1, false, rng, probs);
  out.push_back(fresh(op, rng));
}

ValueType random_root_type(const SearchSpace& space, int max_depth, Rng& rng) {
  if (max_depth >= 1 && uniform01(rng) < space.boolean_root_rate) return ValueType::Boolean;
  return ValueType::Continuous;
}

int random_init_depth(const SearchSpace& space, Rng& rng) {
  const int lo = std::min(space.min_init_depth, space.max_depth);
  const int hi = std::max(lo, std::min(space.max_init_depth, space.max_depth));
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Tree splice(const Tree& tree, std::size_t start, std::size_t root, std::span<const Node> replacement) {
  Tree out;
  out.nodes.reserve(tree.size() - (root + 1 - start) + replacement.size());
  out.nodes.insert(out.nodes.end(), tree.nodes.begin(), tree.nodes.begin() + static_cast<std::ptrdiff_t>(start));
  out.nodes.insert(out.nodes.end(), replacement.begin(), replacement.end());
  out.nodes.insert(out.nodes.end(), tree.nodes.begin() + static_cast<std::ptrdiff_t>(root + 1), tree.nodes.end());
  return out;
}

std::vector<std::size_t> nodes_of_type(const Tree& tree, ValueType type) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (tree.nodes[i].kind().out_type == type) out.push_back(i);
  return out;
}

bool same_signature(const NodeKind& a, const NodeKind& b) {
  if (a.out_type != b.out_type || a.arity != b.arity) return false;
  for (std::size_t i = 0; i < a.arity; ++i)
    if (a.arg_types[i] != b.arg_types[i]) return false;
  return true;
}

}  // namespace

double initial_weight(Rng& rng) { return 1.0 - uniform01(rng); }

std::size_t choose_tree(const Individual& ind, double feedback, Rng& rng) {
  const std::size_t m = ind.trees.size();
  if (m == 0) throw std::invalid_argument("choose_tree: individual has no trees");
  if (m == 1) return 0;
  if (ind.beta.size() != m) return uniform_index(rng, m);
  const auto probs = feedback_probs(ind.beta, feedback);
  std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
  return dist(rng);
}

Tree random_tree(const SearchSpace& space, int max_depth, ValueType root, Rng& rng, std::span<const double> probs) {
  if (root == ValueType::Boolean && max_depth < 1) root = ValueType::Continuous;
  Tree t;
  grow(t.nodes, space, root, max_depth, max_depth >= 1, rng, probs);
  return t;
}

Individual random_individual(const SearchSpace& space, Rng& rng, std::span<const double> probs) {
  const std::size_t cap = std::max<std::size_t>(1, std::min(space.max_dim, 2 * space.n_features));
  const std::size_t m = 1 + uniform_index(rng, cap);
  Individual ind;
  ind.trees.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const int d = random_init_depth(space, rng);
    ind.trees.push_back(random_tree(space, d, random_root_type(space, d, rng), rng, probs));
  }
  return ind;
}

std::optional<Individual> point_mutation(const Individual& ind, const SearchSpace& space, Rng& rng) {
  Individual child = ind.clone_structure();
  const auto ti = choose_tree(ind, space.feedback, rng);
  auto& tree = child.trees[ti];
  const auto i = uniform_index(rng, tree.size());
  Node& node = tree.nodes[i];
  if (node.op == Op::Feature) {
    if (space.n_features < 2) return std::nullopt;
    auto f = static_cast<std::uint32_t>(uniform_index(rng, space.n_features - 1));
    if (f >= node.feature) ++f;
    node = Node::terminal(f, initial_weight(rng));
    return child;
  }
  std::vector<Op> candidates;
  for (const auto& k : node_kinds())
    if (k.op != Op::Feature && k.op != node.op && same_signature(k, node.kind())) candidates.push_back(k.op);
  if (candidates.empty()) return std::nullopt;
  node = fresh(pick(candidates, rng), rng);
  return child;
}

std::optional<Individual> insert_mutation(const Individual& ind, const SearchSpace& space, Rng& rng) {
  Individual child = ind.clone_structure();
  const auto ti = choose_tree(ind, space.feedback, rng);
  const Tree& tree = child.trees[ti];
  const auto root = uniform_index(rng, tree.size());
  const auto start = subtree_start(tree, root);
  const std::span<const Node> sub(tree.nodes.data() + start, root + 1 - start);
  const ValueType type = tree.nodes[root].kind().out_type;

  const Op op = type == ValueType::Continuous ? pick(kContinuousOps, rng) : pick(kLogicalOps, rng);
  std::vector<Node> repl;
  const auto arity = kind_of(op).arity;
  const std::size_t slot = arity == 1 ? 0 : uniform_index(rng, arity);
  for (std::size_t a = 0; a < arity; ++a) {
    if (a == slot) {
      repl.insert(repl.end(), sub.begin(), sub.end());
    } else if (type == ValueType::Continuous) {
      repl.push_back(random_terminal(space, rng));
    } else {
      repl.push_back(random_terminal(space, rng));
      repl.push_back(random_terminal(space, rng));
      repl.push_back(fresh(pick(kComparisonOps, rng), rng));
    }
  }
  repl.push_back(fresh(op, rng));
  Tree grown = splice(tree, start, root, repl);
  if (depth(grown) > space.max_depth) return std::nullopt;
  child.trees[ti] = std::move(grown);
  return child;
}

std::optional<Individual> delete_mutation(const Individual& ind, const SearchSpace& space, Rng& rng) {
  Individual child = ind.clone_structure();
  const bool remove_feature = uniform01(rng) < 0.5;
  const auto ti = choose_tree(ind, space.feedback, rng);
  if (remove_feature && child.trees.size() >= 2) {
    child.trees.erase(child.trees.begin() + static_cast<std::ptrdiff_t>(ti));
    return child;
  }
  const Tree& tree = child.trees[ti];
  const auto candidates = nodes_of_type(tree, ValueType::Continuous);
  if (candidates.empty()) return std::nullopt;
  const auto root = candidates[uniform_index(rng, candidates.size())];
  const auto start = subtree_start(tree, root);
  const Node leaf = random_terminal(space, rng);
  child.trees[ti] = splice(tree, start, root, std::span<const Node>(&leaf, 1));
  return child;
}

std::optional<Individual> insert_dimension(const Individual& ind, const SearchSpace& space, Rng& rng) {
  if (ind.trees.size() >= space.max_dim) return std::nullopt;
  Individual child = ind.clone_structure();
  const int d = random_init_depth(space, rng);
  child.trees.push_back(random_tree(space, d, random_root_type(space, d, rng), rng));
  return child;
}

std::optional<Individual> delete_dimension(const Individual& ind, const SearchSpace& space, Rng& rng) {
  if (ind.trees.size() < 2) return std::nullopt;
  Individual child = ind.clone_structure();
  const auto ti = choose_tree(ind, space.feedback, rng);
  child.trees.erase(child.trees.begin() + static_cast<std::ptrdiff_t>(ti));
  return child;
}

std::optional<Individual> subtree_crossover(const Individual& a, const Individual& b, const SearchSpace& space,
                                            Rng& rng) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    const auto ti = choose_tree(a, space.feedback, rng);
    const Tree& tree = a.trees[ti];
    const auto root = uniform_index(rng, tree.size());
    const ValueType type = tree.nodes[root].kind().out_type;
    std::vector<std::pair<std::size_t, std::size_t>> donors;
    for (std::size_t j = 0; j < b.trees.size(); ++j)
      for (auto n : nodes_of_type(b.trees[j], type)) donors.emplace_back(j, n);
    if (donors.empty()) continue;
    const auto [dj, dn] = donors[uniform_index(rng, donors.size())];
    const Tree& donor = b.trees[dj];
    const auto dstart = subtree_start(donor, dn);
    const std::span<const Node> graft(donor.nodes.data() + dstart, dn + 1 - dstart);
    Tree merged = splice(tree, subtree_start(tree, root), root, graft);
    if (depth(merged) > space.max_depth) continue;
    Individual child = a.clone_structure();
    child.trees[ti] = std::move(merged);
    return child;
  }
  return std::nullopt;
}

std::optional<Individual> dimension_crossover(const Individual& a, const Individual& b, const SearchSpace& space,
                                              Rng& rng) {
  if (a.trees.empty() || b.trees.empty()) return std::nullopt;
  Individual child = a.clone_structure();
  const auto ti = choose_tree(a, space.feedback, rng);
  child.trees[ti] = b.trees[uniform_index(rng, b.trees.size())];
  return child;
}

const char* to_string(VariationKind kind) {
  switch (kind) {
    case VariationKind::Point:
      return "point";
    case VariationKind::Insert:
      return "insert";
    case VariationKind::Delete:
      return "delete";
    case VariationKind::InsertDimension:
      return "insert_dimension";
    case VariationKind::DeleteDimension:
      return "delete_dimension";
    case VariationKind::SubtreeCrossover:
      return "subtree_crossover";
    case VariationKind::DimensionCrossover:
      return "dimension_crossover";
  }
  return "unknown";
}

Offspring vary_one(std::span<const Individual> pool, std::span<const std::size_t> parents, std::size_t index,
                   const VariationConfig& cfg, const SearchSpace& space_in, std::uint64_t seed, int generation) {
  if (parents.empty()) throw std::invalid_argument("make_offspring: empty parent pool");
  SearchSpace space = space_in;
  space.feedback = cfg.feedback;
  Rng rng = make_stream(seed, {stream::kVary, static_cast<std::uint64_t>(generation), index});
  Offspring out;
  out.parent_a = parents[index % parents.size()];
  out.parent_b = out.parent_a;
  const Individual& a = pool[out.parent_a];
  std::optional<Individual> child;
  if (uniform01(rng) < cfg.crossover_ratio) {
    out.parent_b = parents[uniform_index(rng, parents.size())];
    const Individual& b = pool[out.parent_b];
    std::discrete_distribution<int> family(cfg.crossover_weights.begin(), cfg.crossover_weights.end());
    if (family(rng) == 0) {
      out.kind = VariationKind::SubtreeCrossover;
      child = subtree_crossover(a, b, space, rng);
    } else {
      out.kind = VariationKind::DimensionCrossover;
      child = dimension_crossover(a, b, space, rng);
    }
  } else {
    std::discrete_distribution<int> family(cfg.mutation_weights.begin(), cfg.mutation_weights.end());
    switch (family(rng)) {
      case 0:
        out.kind = VariationKind::Point;
        child = point_mutation(a, space, rng);
        break;
      case 1:
        out.kind = VariationKind::Insert;
        child = insert_mutation(a, space, rng);
        break;
      case 2:
        out.kind = VariationKind::Delete;
        child = delete_mutation(a, space, rng);
        break;
      default:
        if (uniform01(rng) < 0.5) {
          out.kind = VariationKind::InsertDimension;
          child = insert_dimension(a, space, rng);
        } else {
          out.kind = VariationKind::DeleteDimension;
          child = delete_dimension(a, space, rng);
        }
        break;
    }
  }
  out.child = child ? std::move(*child) : a.clone_structure();
  out.changed = !same_structure(out.child, a);
  out.child.parents = {static_cast<int>(out.parent_a), static_cast<int>(out.parent_b)};
  return out;
}

std::vector<Offspring> make_offspring(std::span<const Individual> pool, std::span<const std::size_t> parents,
                                      std::size_t count, const VariationConfig& cfg, const SearchSpace& space,
                                      std::uint64_t seed, int generation, int threads) {
  std::vector<Offspring> out(count);
  parallel_for(count, threads,
               [&](std::size_t k) { out[k] = vary_one(pool, parents, k, cfg, space, seed, generation); });
  return out;
}

}  // namespace featforge
