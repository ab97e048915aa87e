#pragma once

// Independent LP checks: exhaustive vertex enumeration for small problems
// and an optimality-certificate check built from primal values and duals.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include <diffcast/simplex.hpp>

namespace diffcast::testing {

/// Best objective over all basic feasible points of a bounded LP. Every
/// vertex makes n linearly independent constraints active out of the rows
/// and finite bounds; equalities are enforced by the feasibility check.
/// Returns nullopt when no vertex is feasible.
inline std::optional<double> vertex_enumeration(const LPProblem &lp, double tol = 1e-9) {
  const int n = lp.variables();
  struct Constraint {
    Eigen::VectorXd a;
    double b;
  };
  std::vector<Constraint> all;
  for (const auto &r : lp.rows) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (auto [j, v] : r.coefs) a[j] += v;
    all.push_back({a, r.rhs});
  }
  for (int j = 0; j < n; ++j) {
    for (double bound : {lp.lower[j], lp.upper[j]}) {
      if (!std::isfinite(bound)) continue;
      Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
      a[j] = 1.0;
      all.push_back({a, bound});
    }
  }
  auto feasible = [&](const Eigen::VectorXd &x) {
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
      const double lhs = all[i].a.dot(x), rhs = all[i].b;
      const double t = tol * (1.0 + std::abs(rhs));
      switch (lp.rows[i].sense) {
      case RowSense::less_equal: if (lhs > rhs + t) return false; break;
      case RowSense::greater_equal: if (lhs < rhs - t) return false; break;
      case RowSense::equal: if (std::abs(lhs - rhs) > t) return false; break;
      }
    }
    for (int j = 0; j < n; ++j)
      if (x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol) return false;
    return true;
  };
  const int k = static_cast<int>(all.size());
  std::optional<double> best;
  std::vector<int> pick(static_cast<std::size_t>(n));
  // iterate over all n-subsets of the k constraints
  std::vector<bool> mask(static_cast<std::size_t>(k), false);
  std::fill(mask.begin(), mask.begin() + std::min(n, k), true);
  if (n > k) return std::nullopt;
  do {
    int c = 0;
    for (int i = 0; i < k; ++i)
      if (mask[i]) pick[c++] = i;
    Eigen::MatrixXd A(n, n);
    Eigen::VectorXd b(n);
    for (int r = 0; r < n; ++r) {
      A.row(r) = all[pick[r]].a.transpose();
      b[r] = all[pick[r]].b;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < n) continue;
    const Eigen::VectorXd x = lu.solve(b);
    if (!feasible(x)) continue;
    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
    if (!best || (lp.sense == ObjectiveSense::minimize ? obj < *best : obj > *best)) best = obj;
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

struct CertificateReport {
  double primal_residual = 0.0;  // worst row or bound violation
  double dual_violation = 0.0;   // worst wrong-signed reduced cost or row dual
  double gap = 0.0;              // |primal objective - dual objective|
};

/// Primal feasibility, dual sign conditions and the duality gap of an
/// optimal solution, computed directly from the original problem.
inline CertificateReport certify(const LPProblem &lp, const LPSolution &sol, double active_tol = 1e-7) {
  CertificateReport r;
  const int n = lp.variables();
  const double s = lp.sense == ObjectiveSense::minimize ? 1.0 : -1.0;
  std::vector<double> reduced(lp.objective);
  double dual_obj = 0.0;
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    const auto &row = lp.rows[i];
    double lhs = 0.0;
    for (auto [j, a] : row.coefs) {
      lhs += a * sol.x[j];
      reduced[j] -= sol.duals[i] * a;
    }
    const double y = s * sol.duals[i]; // as for minimization
    double viol = 0.0;
    if (row.sense == RowSense::less_equal) {
      viol = lhs - row.rhs;
      r.dual_violation = std::max(r.dual_violation, y);
    } else if (row.sense == RowSense::greater_equal) {
      viol = row.rhs - lhs;
      r.dual_violation = std::max(r.dual_violation, -y);
    } else {
      viol = std::abs(lhs - row.rhs);
    }
    r.primal_residual = std::max(r.primal_residual, viol);
    dual_obj += sol.duals[i] * row.rhs;
  }
  double primal_obj = 0.0;
  for (int j = 0; j < n; ++j) {
    primal_obj += lp.objective[j] * sol.x[j];
    r.primal_residual = std::max({r.primal_residual, lp.lower[j] - sol.x[j], sol.x[j] - lp.upper[j]});
    const double d = s * reduced[j];
    const bool at_lower = std::isfinite(lp.lower[j]) && sol.x[j] <= lp.lower[j] + active_tol;
    const bool at_upper = std::isfinite(lp.upper[j]) && sol.x[j] >= lp.upper[j] - active_tol;
    if (!at_lower) r.dual_violation = std::max(r.dual_violation, d);   // must not want to decrease
    if (!at_upper) r.dual_violation = std::max(r.dual_violation, -d);  // must not want to increase
    // bound terms of the dual objective
    if (at_lower && std::isfinite(lp.lower[j])) dual_obj += reduced[j] * lp.lower[j];
    else if (at_upper && std::isfinite(lp.upper[j])) dual_obj += reduced[j] * lp.upper[j];
  }
  r.gap = std::abs(primal_obj - dual_obj);
  return r;
}

// Random LP that is feasible by construction around an interior point x0.
inline LPProblem random_lp(std::mt19937_64 &rng, int n, int m, bool boxed) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 5);
  LPProblem lp;
  lp.sense = rng() % 2 ? ObjectiveSense::maximize : ObjectiveSense::minimize;
  std::vector<double> x0(n);
  for (int j = 0; j < n; ++j) {
    const double lo = rng() % 2 ? 0.0 : -3.0 * (0.5 + 0.5 * u(rng) + 0.5);
    const double hi = lo + 1.0 + 4.0 * (u(rng) + 1.0) / 2.0;
    x0[j] = lo + (hi - lo) * (0.25 + 0.5 * (u(rng) + 1.0) / 2.0);
    double cost = u(rng);
    double h = hi;
    if (!boxed && rng() % 3 == 0) {
      // open above; keep the problem bounded by making the direction unattractive
      h = kInf;
      const double mag = 0.1 + std::abs(cost);
      cost = lp.sense == ObjectiveSense::minimize ? mag : -mag;
    }
    lp.add_variable("x" + std::to_string(j), cost, lo, h);
  }
  int equalities = 0;
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> coefs;
    double ax = 0.0;
    for (int j = 0; j < n; ++j) {
      if (rng() % 4 == 0) continue;
      const double a = u(rng) * 3.0;
      coefs.push_back({j, a});
      ax += a * x0[j];
    }
    const double slack = 0.1 + (u(rng) + 1.0);
    const int k = kind(rng);
    if (k == 0 && equalities < 2) {
      ++equalities;
      lp.add_row(coefs, RowSense::equal, ax);
    } else if (k <= 2) {
      lp.add_row(coefs, RowSense::greater_equal, ax - slack);
    } else {
      lp.add_row(coefs, RowSense::less_equal, ax + slack);
    }
  }
  return lp;
}

} // namespace diffcast::testing
