#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ees/tableau.hpp"

namespace ees::trees {

/// Non-planar labelled rooted tree. Children are kept sorted under the
/// canonical total order (size, root label, child list lexicographically),
/// so structural equality is equality of trees up to sibling permutation.
/// All functions here are pure; trees are freely shareable across threads.
struct Tree {
  int label = 1;
  std::vector<Tree> children;

  int size() const;
  bool operator==(const Tree& other) const = default;
};

std::strong_ordering compare(const Tree& lhs, const Tree& rhs);
inline bool tree_less(const Tree& lhs, const Tree& rhs) { return compare(lhs, rhs) < 0; }

Tree leaf(int label = 1);
/// Joins children under a new root with the given label, canonicalizing.
Tree join(std::vector<Tree> children, int label = 1);
/// Re-sorts all child lists; idempotent.
Tree canonical(Tree t);
/// Forgets vertex labels (maps every label to 1).
Tree unlabelled(const Tree& t);

/// Nested-bracket rendering, e.g. "[[]_1,[]_2]_1"; a leaf prints as "[]_a".
std::string format(const Tree& t);

/// All distinct canonical trees with at most max_nodes vertices and labels
/// in {1..labels}, ordered by the canonical order.
std::vector<Tree> enumerate_trees(int max_nodes, int labels);

/// Exact rational with a normalized sign and gcd-reduced terms.
struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

// Combinatorial quantities from the B-series calculus, evaluated on the
// unlabelled shape of the tree.
long long tree_factorial(const Tree& t);
long long sigma(const Tree& t);
Rational beta(const Tree& t);

/// RK elementary weight phi(tau) of the tableau; vertex labels are ignored.
/// Trees larger than 8 nodes are rejected.
double elementary_weight(const ButcherTableau& t, const Tree& tau);

/// Multiset of trees, canonically sorted.
using Forest = std::vector<Tree>;
Forest make_forest(std::vector<Tree> trees);

/// One term of a coproduct: left leg a forest, right leg a tree or the empty
/// tree (nullopt), with an integer multiplicity.
struct CoproductTerm {
  Forest forest;
  std::optional<Tree> tree;
  long long multiplicity = 0;
};

/// Connes-Kreimer coproduct of a tree, with equal (forest, tree) keys merged.
std::vector<CoproductTerm> coproduct(const Tree& t);

/// Coefficient map tau -> R over all canonical trees with |tau| <= cutoff
/// (with `labels` vertex labels); the empty tree implicitly maps to 1.
class Character {
 public:
  Character(int cutoff, int labels = 1);

  /// Elementary-weight character of an RK scheme.
  static Character rk(const ButcherTableau& t, int cutoff);
  /// Exact-flow character e(tau) = 1/tau!.
  static Character exact_flow(int cutoff, int labels = 1);
  /// Convolution identity: 1 on the empty tree, 0 elsewhere.
  static Character identity(int cutoff, int labels = 1);

  int cutoff() const { return cutoff_; }
  int labels() const { return labels_; }

  double at(const Tree& t) const;
  void set(const Tree& t, double value);

  /// Character of the same scheme run with a negated step:
  /// phi_bar(tau) = (-1)^{|tau|} phi(tau).
  Character negated_step() const;

  /// Multiplicative extension to forests (empty forest -> 1).
  double at_forest(const Forest& f) const;

  const std::map<Tree, double, bool (*)(const Tree&, const Tree&)>& values() const {
    return values_;
  }

 private:
  int cutoff_;
  int labels_;
  std::map<Tree, double, bool (*)(const Tree&, const Tree&)> values_;
};

/// Convolution (phi1 * phi2)(tau) = sum phi1(tau^(1)) phi2(tau^(2)) over the
/// coproduct; corresponds to applying phi1's scheme first. Throws on cutoff
/// or label mismatch.
Character convolve(const Character& phi1, const Character& phi2);

/// residuals[k-1] = max over trees with |tau| = k of |(phi * phi_bar)(tau)|,
/// where phi is the scheme's character. All residuals through order m vanish
/// iff the backward-then-forward composition is the identity to order m.
std::vector<double> effective_symmetry_residuals(const ButcherTableau& t, int order);

/// Largest p such that phi(tau) = 1/tau! for every tree with |tau| <= p,
/// probed up to max_order; ties broken at tolerance 1e-12.
int certified_order(const ButcherTableau& t, int max_order);

}  // namespace ees::trees
