#include "ees/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ees::trees {

int Tree::size() const {
  int n = 1;
  for (const Tree& child : children) n += child.size();
  return n;
}

std::strong_ordering compare(const Tree& lhs, const Tree& rhs) {
  if (auto c = lhs.size() <=> rhs.size(); c != 0) return c;
  if (auto c = lhs.label <=> rhs.label; c != 0) return c;
  if (auto c = lhs.children.size() <=> rhs.children.size(); c != 0) return c;
  for (std::size_t i = 0; i < lhs.children.size(); ++i) {
    if (auto c = compare(lhs.children[i], rhs.children[i]); c != 0) return c;
  }
  return std::strong_ordering::equal;
}

Tree leaf(int label) { return Tree{label, {}}; }

Tree canonical(Tree t) {
  for (Tree& child : t.children) child = canonical(std::move(child));
  std::sort(t.children.begin(), t.children.end(), tree_less);
  return t;
}

Tree join(std::vector<Tree> children, int label) {
  return canonical(Tree{label, std::move(children)});
}

Tree unlabelled(const Tree& t) {
  Tree u;
  u.label = 1;
  u.children.reserve(t.children.size());
  for (const Tree& child : t.children) u.children.push_back(unlabelled(child));
  std::sort(u.children.begin(), u.children.end(), tree_less);
  return u;
}

std::string format(const Tree& t) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < t.children.size(); ++i) {
    if (i > 0) os << ',';
    os << format(t.children[i]);
  }
  os << "]_" << t.label;
  return os.str();
}

namespace {

// Appends every canonical tree of exactly `nodes` vertices. `universe` holds
// all smaller trees in canonical order; children are chosen as a
// non-decreasing sequence of universe indices so each multiset appears once.
void build_trees_of_size(int nodes, int labels, const std::vector<Tree>& universe,
                         std::vector<Tree>& out) {
  std::vector<Tree> chosen;
  auto rec = [&](auto&& self, int remaining, std::size_t min_index) -> void {
    if (remaining == 0) {
      for (int label = 1; label <= labels; ++label) {
        Tree t{label, chosen};
        // children chosen in canonical order already
        out.push_back(std::move(t));
      }
      return;
    }
    for (std::size_t i = min_index; i < universe.size(); ++i) {
      const int child_size = universe[i].size();
      if (child_size > remaining) break;  // universe sorted by size first
      chosen.push_back(universe[i]);
      self(self, remaining - child_size, i);
      chosen.pop_back();
    }
  };
  rec(rec, nodes - 1, 0);
}

}  // namespace

std::vector<Tree> enumerate_trees(int max_nodes, int labels) {
  if (max_nodes < 1) throw std::invalid_argument("enumerate_trees: max_nodes must be >= 1");
  if (labels < 1) throw std::invalid_argument("enumerate_trees: labels must be >= 1");

  std::vector<Tree> all;
  for (int label = 1; label <= labels; ++label) all.push_back(leaf(label));
  for (int nodes = 2; nodes <= max_nodes; ++nodes) {
    std::vector<Tree> of_size;
    build_trees_of_size(nodes, labels, all, of_size);
    all.insert(all.end(), of_size.begin(), of_size.end());
  }
  std::sort(all.begin(), all.end(), tree_less);
  return all;
}

long long tree_factorial(const Tree& t) {
  long long result = t.size();
  for (const Tree& child : t.children) result *= tree_factorial(child);
  return result;
}

namespace {

long long factorial(int n) {
  long long f = 1;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// Groups the (canonically sorted) children of an unlabelled tree into
// (shape, count) runs.
std::vector<std::pair<Tree, int>> child_multiplicities(const Tree& u) {
  std::vector<std::pair<Tree, int>> groups;
  for (const Tree& child : u.children) {
    if (!groups.empty() && groups.back().first == child) {
      ++groups.back().second;
    } else {
      groups.emplace_back(child, 1);
    }
  }
  return groups;
}

long long gcd_ll(long long a, long long b) { return std::gcd(a, b); }

Rational normalized(long long num, long long den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const long long g = gcd_ll(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

Rational rational_mul(const Rational& a, const Rational& b) {
  return normalized(a.num * b.num, a.den * b.den);
}

}  // namespace

long long sigma(const Tree& t) {
  const Tree u = unlabelled(t);
  long long result = 1;
  for (const auto& [shape, count] : child_multiplicities(u)) {
    long long pow = 1;
    const long long s = sigma(shape);
    for (int k = 0; k < count; ++k) pow *= s;
    result *= factorial(count) * pow;
  }
  return result;
}

Rational beta(const Tree& t) {
  const Tree u = unlabelled(t);
  if (u.children.empty()) return Rational{1, 1};

  // Multinomial (|tau|-1 choose |child_1|, ..., |child_k|) over all children
  // listed with multiplicity.
  long long multinomial = factorial(u.size() - 1);
  for (const Tree& child : u.children) multinomial /= factorial(child.size());

  Rational result{multinomial, 1};
  for (const auto& [shape, count] : child_multiplicities(u)) {
    const Rational b = beta(shape);
    for (int k = 0; k < count; ++k) result = rational_mul(result, b);
    result = rational_mul(result, Rational{1, factorial(count)});
  }
  return result;
}

namespace {

// Stage vector Phi(tau)_i = prod_children (A Phi(child))_i; phi = b . Phi.
std::vector<double> stage_weight_vector(const ButcherTableau& t, const Tree& tau) {
  const int s = t.stages;
  std::vector<double> phi(s, 1.0);
  for (const Tree& child : tau.children) {
    const std::vector<double> child_phi = stage_weight_vector(t, child);
    for (int i = 0; i < s; ++i) {
      double acc = 0.0;
      for (int j = 0; j < i; ++j) acc += t.a_at(i, j) * child_phi[j];
      phi[i] *= acc;
    }
  }
  return phi;
}

}  // namespace

double elementary_weight(const ButcherTableau& t, const Tree& tau) {
  if (tau.size() > 8) throw std::invalid_argument("elementary_weight: tree too large");
  const std::vector<double> phi = stage_weight_vector(t, tau);
  double result = 0.0;
  for (int i = 0; i < t.stages; ++i) result += t.b[i] * phi[i];
  return result;
}

Forest make_forest(std::vector<Tree> trees) {
  std::sort(trees.begin(), trees.end(), tree_less);
  return trees;
}

namespace {

struct TensorKey {
  Forest forest;
  std::optional<Tree> tree;

  bool operator<(const TensorKey& other) const {
    if (forest.size() != other.forest.size()) return forest.size() < other.forest.size();
    for (std::size_t i = 0; i < forest.size(); ++i) {
      if (auto c = compare(forest[i], other.forest[i]); c != 0) return c < 0;
    }
    if (tree.has_value() != other.tree.has_value()) return !tree.has_value();
    if (!tree.has_value()) return false;
    return compare(*tree, *other.tree) < 0;
  }
};

using TensorSum = std::map<TensorKey, long long>;

// Right legs are forests while combining child coproducts; B+ then closes
// them into a tree under the new root.
struct ForestTensorKey {
  Forest left;
  Forest right;

  bool operator<(const ForestTensorKey& other) const {
    auto cmp_forest = [](const Forest& a, const Forest& b) {
      if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (auto c = compare(a[i], b[i]); c != 0) return c < 0 ? -1 : 1;
      }
      return 0;
    };
    if (int c = cmp_forest(left, other.left); c != 0) return c < 0;
    return cmp_forest(right, other.right) < 0;
  }
};

Forest merged(const Forest& a, const Forest& b) {
  Forest out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out), tree_less);
  return out;
}

TensorSum coproduct_sum(const Tree& t) {
  // Product over children of their coproducts, with tree-valued right legs
  // flattened into forests.
  std::map<ForestTensorKey, long long> acc;
  acc[ForestTensorKey{{}, {}}] = 1;
  for (const Tree& child : t.children) {
    const TensorSum child_terms = [&] {
      TensorSum s;
      for (const CoproductTerm& term : coproduct(child)) {
        s[TensorKey{term.forest, term.tree}] += term.multiplicity;
      }
      return s;
    }();
    std::map<ForestTensorKey, long long> next;
    for (const auto& [key, mult] : acc) {
      for (const auto& [ckey, cmult] : child_terms) {
        ForestTensorKey combined;
        combined.left = merged(key.left, ckey.forest);
        combined.right = key.right;
        if (ckey.tree.has_value()) {
          combined.right.push_back(*ckey.tree);
          std::sort(combined.right.begin(), combined.right.end(), tree_less);
        }
        next[combined] += mult * cmult;
      }
    }
    acc = std::move(next);
  }

  TensorSum result;
  result[TensorKey{make_forest({t}), std::nullopt}] += 1;  // tau (x) empty
  for (const auto& [key, mult] : acc) {
    Tree regrown{t.label, key.right};
    regrown = canonical(std::move(regrown));
    result[TensorKey{key.left, std::move(regrown)}] += mult;
  }
  return result;
}

}  // namespace

std::vector<CoproductTerm> coproduct(const Tree& t) {
  std::vector<CoproductTerm> terms;
  for (const auto& [key, mult] : coproduct_sum(t)) {
    terms.push_back(CoproductTerm{key.forest, key.tree, mult});
  }
  return terms;
}

Character::Character(int cutoff, int labels)
    : cutoff_(cutoff), labels_(labels), values_(tree_less) {
  if (cutoff < 1) throw std::invalid_argument("Character: cutoff must be >= 1");
  for (const Tree& t : enumerate_trees(cutoff, labels)) values_.emplace(t, 0.0);
}

Character Character::rk(const ButcherTableau& t, int cutoff) {
  Character phi(cutoff, 1);
  for (auto& [tau, value] : phi.values_) value = elementary_weight(t, tau);
  return phi;
}

Character Character::exact_flow(int cutoff, int labels) {
  Character phi(cutoff, labels);
  for (auto& [tau, value] : phi.values_) value = 1.0 / static_cast<double>(tree_factorial(tau));
  return phi;
}

Character Character::identity(int cutoff, int labels) { return Character(cutoff, labels); }

double Character::at(const Tree& t) const {
  const auto it = values_.find(t);
  if (it == values_.end()) {
    throw std::invalid_argument("Character::at: tree outside cutoff: " + format(t));
  }
  return it->second;
}

void Character::set(const Tree& t, double value) {
  const auto it = values_.find(t);
  if (it == values_.end()) {
    throw std::invalid_argument("Character::set: tree outside cutoff: " + format(t));
  }
  it->second = value;
}

Character Character::negated_step() const {
  Character phi = *this;
  for (auto& [tau, value] : phi.values_) {
    if (tau.size() % 2 != 0) value = -value;
  }
  return phi;
}

double Character::at_forest(const Forest& f) const {
  double result = 1.0;
  for (const Tree& t : f) result *= at(t);
  return result;
}

Character convolve(const Character& phi1, const Character& phi2) {
  if (phi1.cutoff() != phi2.cutoff()) {
    throw std::invalid_argument("convolve: cutoff mismatch");
  }
  if (phi1.labels() != phi2.labels()) {
    throw std::invalid_argument("convolve: label-set mismatch");
  }
  Character out(phi1.cutoff(), phi1.labels());
  for (const auto& [tau, unused] : out.values()) {
    (void)unused;
    double acc = 0.0;
    for (const CoproductTerm& term : coproduct(tau)) {
      const double right = term.tree.has_value() ? phi2.at(*term.tree) : 1.0;
      acc += static_cast<double>(term.multiplicity) * phi1.at_forest(term.forest) * right;
    }
    out.set(tau, acc);
  }
  return out;
}

std::vector<double> effective_symmetry_residuals(const ButcherTableau& t, int order) {
  if (order > 8) throw std::invalid_argument("effective_symmetry_residuals: order too large");
  const Character phi = Character::rk(t, order);
  const Character composed = convolve(phi, phi.negated_step());
  std::vector<double> residuals(order, 0.0);
  for (const auto& [tau, value] : composed.values()) {
    auto& r = residuals[tau.size() - 1];
    r = std::max(r, std::abs(value));
  }
  return residuals;
}

int certified_order(const ButcherTableau& t, int max_order) {
  constexpr double kTol = 1e-12;
  const Character phi = Character::rk(t, max_order);
  int order = 0;
  for (int p = 1; p <= max_order; ++p) {
    double worst = 0.0;
    for (const auto& [tau, value] : phi.values()) {
      if (tau.size() != p) continue;
      worst = std::max(worst, std::abs(value - 1.0 / static_cast<double>(tree_factorial(tau))));
    }
    if (worst > kTol) break;
    order = p;
  }
  return order;
}

}  // namespace ees::trees
