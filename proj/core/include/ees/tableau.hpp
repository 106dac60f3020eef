#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ees {

/// Coefficients (A, b, c) of an explicit Runge-Kutta scheme.
///
/// Invariants enforced on construction:
///  - A is strictly lower triangular (a_ij = 0 for j >= i),
///  - c_i equals the i-th row sum of A to 1e-14,
///  - the weights b sum to 1 to 1e-14.
/// Instances are immutable after construction and safe to share across threads.
struct ButcherTableau {
  std::string name;
  int stages = 0;
  std::vector<double> a;  // stages x stages, row-major
  std::vector<double> b;  // stages
  std::vector<double> c;  // stages

  double a_at(int i, int j) const { return a[i * stages + j]; }

  /// Validates the invariants and returns the tableau; throws std::invalid_argument.
  static ButcherTableau create(std::string name, int stages, std::vector<double> a,
                               std::vector<double> b, std::vector<double> c);
};

/// 3-stage EES(2,5;x) tableau. Rejects x within 1e-9 of {1, 1/2, -1/2},
/// where the coefficient denominators vanish.
ButcherTableau ees25(double x);

/// Canonical parameter choice x = 1/10.
ButcherTableau ees25_default();

/// Classical baselines: "euler", "heun2", "kutta_rk3", "rk4".
ButcherTableau classical_tableau(std::string_view name);

/// Coefficients [r_0, ..., r_s] of the stability polynomial
/// R(rho) = sum_k r_k rho^k, with r_0 = 1 and r_k = b^T A^{k-1} 1.
std::vector<double> stability_polynomial(const ButcherTableau& t);

/// Plain-text key-value serialization (name, s, A row-major, b, c).
std::string tableau_to_text(const ButcherTableau& t);
ButcherTableau tableau_from_text(std::string_view text);

}  // namespace ees
