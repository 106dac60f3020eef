#include "ees/tableau.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ees {

namespace {

constexpr double kConsistencyTol = 1e-14;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

ButcherTableau ButcherTableau::create(std::string name, int stages, std::vector<double> a,
                                      std::vector<double> b, std::vector<double> c) {
  require(stages >= 1, "tableau: stages must be positive");
  const auto s = static_cast<std::size_t>(stages);
  require(a.size() == s * s, "tableau: A must be stages x stages");
  require(b.size() == s && c.size() == s, "tableau: b and c must have one entry per stage");

  for (int i = 0; i < stages; ++i) {
    for (int j = i; j < stages; ++j) {
      require(a[i * s + j] == 0.0,
              "tableau '" + name + "': A must be strictly lower triangular");
    }
    double row_sum = 0.0;
    for (int j = 0; j < i; ++j) row_sum += a[i * s + j];
    require(std::abs(row_sum - c[i]) <= kConsistencyTol,
            "tableau '" + name + "': c_i must equal the row sum of A");
  }
  double weight_sum = 0.0;
  for (double w : b) weight_sum += w;
  require(std::abs(weight_sum - 1.0) <= kConsistencyTol,
          "tableau '" + name + "': weights b must sum to 1");

  ButcherTableau t;
  t.name = std::move(name);
  t.stages = stages;
  t.a = std::move(a);
  t.b = std::move(b);
  t.c = std::move(c);
  return t;
}

ButcherTableau ees25(double x) {
  constexpr double kForbiddenTol = 1e-9;
  for (double bad : {1.0, 0.5, -0.5}) {
    if (std::abs(x - bad) < kForbiddenTol) {
      throw std::invalid_argument("ees25: x must stay away from {1, 1/2, -1/2}");
    }
  }

  const double c2 = (1.0 + 2.0 * x) / (4.0 * (1.0 - x));
  const double a21 = c2;
  const double a31 = (4.0 * x - 1.0) * (4.0 * x - 1.0) /
                     (4.0 * (x - 1.0) * (1.0 - 4.0 * x * x));
  const double a32 = (1.0 - x) / (1.0 - 4.0 * x * x);

  char label[48];
  std::snprintf(label, sizeof(label), "ees25(%g)", x);

  // c_3 = 3/(4(1-x)) analytically; taking the row sum a31 + a32 keeps the
  // consistency invariant exact in floating point.
  return ButcherTableau::create(label, 3,
                                {0.0, 0.0, 0.0,
                                 a21, 0.0, 0.0,
                                 a31, a32, 0.0},
                                {x, 0.5, 0.5 - x},
                                {0.0, a21, a31 + a32});
}

ButcherTableau ees25_default() { return ees25(0.1); }

ButcherTableau classical_tableau(std::string_view name) {
  if (name == "euler") {
    return ButcherTableau::create("euler", 1, {0.0}, {1.0}, {0.0});
  }
  if (name == "heun2") {
    return ButcherTableau::create("heun2", 2,
                                  {0.0, 0.0,
                                   1.0, 0.0},
                                  {0.5, 0.5},
                                  {0.0, 1.0});
  }
  if (name == "kutta_rk3") {
    return ButcherTableau::create("kutta_rk3", 3,
                                  {0.0, 0.0, 0.0,
                                   0.5, 0.0, 0.0,
                                   -1.0, 2.0, 0.0},
                                  {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                                  {0.0, 0.5, 1.0});
  }
  if (name == "rk4") {
    return ButcherTableau::create("rk4", 4,
                                  {0.0, 0.0, 0.0, 0.0,
                                   0.5, 0.0, 0.0, 0.0,
                                   0.0, 0.5, 0.0, 0.0,
                                   0.0, 0.0, 1.0, 0.0},
                                  {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0},
                                  {0.0, 0.5, 0.5, 1.0});
  }
  throw std::invalid_argument("classical_tableau: unknown scheme '" + std::string(name) + "'");
}

std::vector<double> stability_polynomial(const ButcherTableau& t) {
  const int s = t.stages;
  std::vector<double> coeffs;
  coeffs.reserve(s + 1);
  coeffs.push_back(1.0);

  // v starts as the all-ones vector; r_k = b^T A^{k-1} v.
  std::vector<double> v(s, 1.0);
  for (int k = 1; k <= s; ++k) {
    double r = 0.0;
    for (int i = 0; i < s; ++i) r += t.b[i] * v[i];
    coeffs.push_back(r);
    std::vector<double> next(s, 0.0);
    for (int i = 0; i < s; ++i) {
      double acc = 0.0;
      for (int j = 0; j < i; ++j) acc += t.a_at(i, j) * v[j];
      next[i] = acc;
    }
    v = std::move(next);
  }
  return coeffs;
}

std::string tableau_to_text(const ButcherTableau& t) {
  std::ostringstream os;
  os.precision(17);
  os << "name " << t.name << "\n";
  os << "s " << t.stages << "\n";
  os << "A";
  for (double v : t.a) os << ' ' << v;
  os << "\nb";
  for (double v : t.b) os << ' ' << v;
  os << "\nc";
  for (double v : t.c) os << ' ' << v;
  os << "\n";
  return os.str();
}

ButcherTableau tableau_from_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string key, name;
  int stages = 0;

  is >> key;
  require(key == "name", "tableau text: expected 'name'");
  is >> name;
  is >> key >> stages;
  require(key == "s" && stages >= 1, "tableau text: expected 's <stages>'");

  auto read_block = [&](const std::string& expect, std::size_t n) {
    is >> key;
    require(key == expect, "tableau text: expected '" + expect + "'");
    std::vector<double> values(n);
    for (auto& v : values) {
      require(static_cast<bool>(is >> v), "tableau text: truncated '" + expect + "' block");
    }
    return values;
  };

  const auto s = static_cast<std::size_t>(stages);
  auto a = read_block("A", s * s);
  auto b = read_block("b", s);
  auto c = read_block("c", s);
  return ButcherTableau::create(std::move(name), stages, std::move(a), std::move(b), std::move(c));
}

}  // namespace ees
