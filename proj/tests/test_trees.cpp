#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "ees/rng.hpp"
#include "ees/tableau.hpp"
#include "ees/trees.hpp"

using namespace ees;
using namespace ees::trees;

namespace {

Tree chain(int length) {
  Tree t = leaf();
  for (int i = 1; i < length; ++i) t = join({t});
  return t;
}

Tree cherry() { return join({leaf(), leaf()}); }

// Independent count of unlabelled rooted trees by the Euler-transform
// recurrence a(n+1) = (1/n) sum_{k=1..n} (sum_{d|k} d a(d)) a(n-k+1).
std::vector<long long> unlabelled_rooted_tree_counts(int max_nodes) {
  std::vector<long long> a(max_nodes + 1, 0);
  a[1] = 1;
  for (int n = 1; n < max_nodes; ++n) {
    long long total = 0;
    for (int k = 1; k <= n; ++k) {
      long long divisor_sum = 0;
      for (int d = 1; d <= k; ++d) {
        if (k % d == 0) divisor_sum += d * a[d];
      }
      total += divisor_sum * a[n - k + 1];
    }
    a[n + 1] = total / n;
  }
  return a;
}

// Brute-force count of distinct increasing labellings: assign 1..n to the
// vertices of a planar representative (root fixed to 1), keep assignments
// where children exceed parents, and dedupe by canonical labelled form.
long long count_increasing_labellings(const Tree& shape) {
  const int n = shape.size();

  struct Flat {
    std::vector<int> parent;
    void walk(const Tree& t, int parent_index) {
      const int me = static_cast<int>(parent.size());
      parent.push_back(parent_index);
      for (const Tree& child : t.children) walk(child, me);
    }
  };
  Flat flat;
  flat.walk(shape, -1);

  std::vector<int> labels(n);
  std::iota(labels.begin(), labels.end(), 1);

  // rebuild a labelled tree from a label assignment in walk order
  struct Build {
    const std::vector<int>* labels = nullptr;
    int cursor = 0;
    Tree rebuild(const Tree& t) {
      Tree out;
      out.label = (*labels)[cursor++];
      for (const Tree& child : t.children) out.children.push_back(rebuild(child));
      return out;
    }
  };

  std::set<std::string> seen;
  do {
    bool increasing = true;
    for (int v = 0; v < n; ++v) {
      const int p = flat.parent[v];
      if (p >= 0 && labels[v] < labels[p]) {
        increasing = false;
        break;
      }
    }
    if (!increasing) continue;
    Build build;
    build.labels = &labels;
    seen.insert(format(canonical(build.rebuild(shape))));
  } while (std::next_permutation(labels.begin(), labels.end()));
  return static_cast<long long>(seen.size());
}

}  // namespace

TEST_CASE("canonicalization is idempotent and order insensitive") {
  const Tree a = join({chain(2), leaf(), cherry()});
  const Tree b = join({cherry(), leaf(), chain(2)});
  CHECK(a == b);
  CHECK(canonical(a) == a);
  CHECK(a.size() == 1 + 2 + 1 + 3);

  const Tree labelled_a = join({leaf(2), leaf(1)}, 3);
  const Tree labelled_b = join({leaf(1), leaf(2)}, 3);
  CHECK(labelled_a == labelled_b);
}

TEST_CASE("tree formatting") {
  CHECK(format(leaf()) == "[]_1");
  CHECK(format(leaf(2)) == "[]_2");
  CHECK(format(cherry()) == "[[]_1,[]_1]_1");
  CHECK(format(join({leaf(2)}, 1)) == "[[]_2]_1");
}

TEST_CASE("enumeration counts match the generating recurrence") {
  const auto trees5 = enumerate_trees(5, 1);
  std::map<int, int> by_order;
  for (const Tree& t : trees5) by_order[t.size()] += 1;
  CHECK(by_order[1] == 1);
  CHECK(by_order[2] == 1);
  CHECK(by_order[3] == 2);
  CHECK(by_order[4] == 4);
  CHECK(by_order[5] == 9);
  CHECK(trees5.size() == 17);

  const auto expected = unlabelled_rooted_tree_counts(8);
  const auto trees8 = enumerate_trees(8, 1);
  std::map<int, long long> by_order8;
  for (const Tree& t : trees8) by_order8[t.size()] += 1;
  for (int n = 1; n <= 8; ++n) CHECK(by_order8[n] == expected[n]);

  // no duplicates
  std::set<std::string> rendered;
  for (const Tree& t : trees8) rendered.insert(format(t));
  CHECK(rendered.size() == trees8.size());
}

TEST_CASE("labelled enumeration") {
  CHECK(enumerate_trees(1, 3).size() == 3);
  // 2 singletons plus 2x2 labelled chains
  CHECK(enumerate_trees(2, 2).size() == 6);

  // order-3 labelled trees with 2 labels: 8 chains + 6 cherries
  const auto trees = enumerate_trees(3, 2);
  long long third_order = 0;
  for (const Tree& t : trees) third_order += (t.size() == 3) ? 1 : 0;
  CHECK(third_order == 14);
}

TEST_CASE("tree factorial and symmetry factor") {
  CHECK(tree_factorial(leaf()) == 1);
  CHECK(sigma(leaf()) == 1);
  CHECK(beta(leaf()) == Rational{1, 1});

  CHECK(tree_factorial(chain(3)) == 6);
  CHECK(sigma(chain(3)) == 1);

  CHECK(tree_factorial(cherry()) == 3);
  CHECK(sigma(cherry()) == 2);

  // bushy order-4 tree [.,.,.]
  const Tree bush = join({leaf(), leaf(), leaf()});
  CHECK(tree_factorial(bush) == 4);
  CHECK(sigma(bush) == 6);

  // [., [.]] mixes shapes
  const Tree mixed = join({leaf(), chain(2)});
  CHECK(tree_factorial(mixed) == 8);
  CHECK(sigma(mixed) == 1);
  CHECK(beta(mixed) == Rational{3, 1});

  // labels do not affect the combinatorics
  CHECK(tree_factorial(join({leaf(2), leaf(1)}, 2)) == 3);
  CHECK(sigma(join({leaf(2), leaf(1)}, 2)) == 2);
}

TEST_CASE("beta equals |tau|!/(sigma tau!) and the brute-force labelling count") {
  for (const Tree& t : enumerate_trees(5, 1)) {
    const Rational b = beta(t);
    CHECK(b.den == 1);

    long long fact = 1;
    for (int k = 2; k <= t.size(); ++k) fact *= k;
    CHECK(b.num * sigma(t) * tree_factorial(t) == fact);

    CHECK(b.num == count_increasing_labellings(t));
  }
}

TEST_CASE("elementary weights against hand computations") {
  const ButcherTableau ees = ees25(0.1);

  CHECK(elementary_weight(ees, leaf()) == doctest::Approx(1.0).epsilon(1e-15));
  // sum b_i c_i = 1/2 * 1/3 + 2/5 * 5/6
  CHECK(elementary_weight(ees, chain(2)) == doctest::Approx(0.5).epsilon(1e-14));
  // b_3 a_32 c_2 = 2/5 * 15/16 * 1/3
  CHECK(elementary_weight(ees, chain(3)) == doctest::Approx(0.125).epsilon(1e-14));
  // sum b_i c_i^2 matches 1/tau! = 1/3 for the cherry
  CHECK(elementary_weight(ees, cherry()) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  for (const auto& name : {"euler", "heun2", "kutta_rk3", "rk4"}) {
    CHECK(elementary_weight(classical_tableau(name), leaf()) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }

  CHECK_THROWS_AS(elementary_weight(ees, chain(9)), std::invalid_argument);
}

TEST_CASE("order certificates") {
  // ees25: order-2 conditions exact, the order-3 chain condition fails at 1/8
  CHECK(certified_order(ees25(0.1), 6) == 2);
  CHECK(certified_order(ees25(-0.2), 6) == 2);
  CHECK(certified_order(classical_tableau("euler"), 4) == 1);
  CHECK(certified_order(classical_tableau("heun2"), 4) == 2);
  CHECK(certified_order(classical_tableau("kutta_rk3"), 5) == 3);
  CHECK(certified_order(classical_tableau("rk4"), 6) == 4);

  // every ees25 weight matches the exact flow through order 2 and the chain
  // deviates at order 3
  const Character phi = Character::rk(ees25(0.1), 3);
  for (const auto& [tau, value] : phi.values()) {
    if (tau.size() <= 2) {
      CHECK(std::abs(value - 1.0 / static_cast<double>(tree_factorial(tau))) < 1e-14);
    }
  }
  CHECK(std::abs(phi.at(chain(3)) - 1.0 / 6.0) > 0.04);  // 1/8 vs 1/6
  CHECK(phi.at(chain(3)) == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("coproduct of small trees") {
  // delta(.) = . (x) empty + empty (x) .
  const auto terms_leaf = coproduct(leaf());
  REQUIRE(terms_leaf.size() == 2);
  bool saw_primitive = false, saw_unit = false;
  for (const auto& term : terms_leaf) {
    if (!term.tree.has_value()) {
      CHECK(term.forest == Forest{leaf()});
      CHECK(term.multiplicity == 1);
      saw_primitive = true;
    } else {
      CHECK(term.forest.empty());
      CHECK(*term.tree == leaf());
      CHECK(term.multiplicity == 1);
      saw_unit = true;
    }
  }
  CHECK(saw_primitive);
  CHECK(saw_unit);

  // delta([.,.]) = [.,.] (x) empty + .. (x) . + 2 . (x) [.] + empty (x) [.,.]
  const auto terms_cherry = coproduct(cherry());
  REQUIRE(terms_cherry.size() == 4);
  long long mult_mixed = 0;
  for (const auto& term : terms_cherry) {
    if (term.forest == Forest{leaf()} && term.tree.has_value() && *term.tree == chain(2)) {
      mult_mixed = term.multiplicity;
    }
  }
  CHECK(mult_mixed == 2);
}

TEST_CASE("counit property of the coproduct") {
  for (const Tree& tau : enumerate_trees(5, 1)) {
    // (id (x) eps): only the tau (x) empty term survives, multiplicity 1
    long long right_empty = 0;
    // (eps (x) id): only the empty (x) tau term survives, multiplicity 1
    long long left_empty = 0;
    for (const auto& term : coproduct(tau)) {
      if (!term.tree.has_value()) {
        REQUIRE(term.forest.size() == 1);
        CHECK(term.forest[0] == tau);
        right_empty += term.multiplicity;
      }
      if (term.forest.empty() && term.tree.has_value() && *term.tree == tau) {
        left_empty += term.multiplicity;
      }
    }
    CHECK(right_empty == 1);
    CHECK(left_empty == 1);
  }
}

TEST_CASE("convolution identity and exact-flow composition") {
  const Character phi = Character::rk(ees25(0.1), 5);
  const Character unit = Character::identity(5);

  const Character left = convolve(phi, unit);
  const Character right = convolve(unit, phi);
  for (const auto& [tau, value] : phi.values()) {
    CHECK(left.at(tau) == doctest::Approx(value).epsilon(1e-14));
    CHECK(right.at(tau) == doctest::Approx(value).epsilon(1e-14));
  }

  // two exact half-flows compose into the doubled-step flow: (e*e)(tau) =
  // 2^{|tau|} / tau!
  const Character e = Character::exact_flow(5);
  const Character ee = convolve(e, e);
  CHECK(ee.at(leaf()) == doctest::Approx(2.0).epsilon(1e-14));
  for (const auto& [tau, value] : ee.values()) {
    const double expected =
        std::pow(2.0, tau.size()) / static_cast<double>(tree_factorial(tau));
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  }

  // composing two Euler characters: second-order cross term is 1
  const Character euler = Character::rk(classical_tableau("euler"), 4);
  const Character euler2 = convolve(euler, euler);
  CHECK(euler2.at(chain(2)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("convolution is associative at cutoff 4") {
  rng::NormalStream noise(2024, 7);
  Character a(4), b(4), c(4);
  for (const auto& [tau, unused] : a.values()) {
    (void)unused;
    a.set(tau, noise.next());
    b.set(tau, noise.next());
    c.set(tau, noise.next());
  }
  const Character left = convolve(convolve(a, b), c);
  const Character right = convolve(a, convolve(b, c));
  for (const auto& [tau, value] : left.values()) {
    CHECK(value == doctest::Approx(right.at(tau)).epsilon(1e-12));
  }
}

TEST_CASE("convolution rejects mismatched cutoffs") {
  CHECK_THROWS_AS(convolve(Character::exact_flow(3), Character::exact_flow(4)),
                  std::invalid_argument);
}

TEST_CASE("effective symmetry residuals") {
  // ees25: zero through order 5, nonzero at order 6
  const auto residuals6 = effective_symmetry_residuals(ees25(0.1), 6);
  REQUIRE(residuals6.size() == 6);
  for (int k = 0; k < 5; ++k) CHECK(residuals6[k] <= 1e-13);
  CHECK(residuals6[5] > 1e-6);

  // the defining property holds for other admissible parameters
  const auto residuals_alt = effective_symmetry_residuals(ees25(-0.2), 6);
  for (int k = 0; k < 5; ++k) CHECK(residuals_alt[k] <= 1e-13);
  CHECK(residuals_alt[5] > 1e-6);

  // euler: (phi * phi_bar)([.]) = -1, so the order-2 residual is exactly 1
  const auto residuals_euler = effective_symmetry_residuals(classical_tableau("euler"), 2);
  CHECK(residuals_euler[0] <= 1e-15);
  CHECK(residuals_euler[1] == doctest::Approx(1.0).epsilon(1e-14));

  const Character phi_euler = Character::rk(classical_tableau("euler"), 2);
  const Character composed = convolve(phi_euler, phi_euler.negated_step());
  CHECK(composed.at(chain(2)) == doctest::Approx(-1.0).epsilon(1e-14));
}
