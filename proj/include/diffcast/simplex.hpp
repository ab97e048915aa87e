#pragma once

// Dense-basis bounded primal simplex. Problems are stated in general form
// (row senses, two-sided variable bounds) and transformed to
//   min c'x  s.t.  A x = b,  0 <= x <= u
// before solving with a two-phase method.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace diffcast {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { less_equal, equal, greater_equal };
enum class ObjectiveSense { minimize, maximize };
enum class LPStatus { optimal, infeasible, unbounded };

inline std::string_view to_string(LPStatus s) {
  switch (s) {
  case LPStatus::optimal: return "optimal";
  case LPStatus::infeasible: return "infeasible";
  case LPStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct LPRow {
  std::vector<std::pair<int, double>> coefs;
  RowSense sense = RowSense::less_equal;
  double rhs = 0.0;
};

struct LPProblem {
  ObjectiveSense sense = ObjectiveSense::minimize;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> names;
  std::vector<LPRow> rows;

  int variables() const { return static_cast<int>(objective.size()); }

  int add_variable(std::string name, double cost, double lo = 0.0, double hi = kInf) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    names.push_back(std::move(name));
    return variables() - 1;
  }

  int add_row(std::vector<std::pair<int, double>> coefs, RowSense sense, double rhs) {
    rows.push_back({std::move(coefs), sense, rhs});
    return static_cast<int>(rows.size()) - 1;
  }

  void validate() const {
    const auto n = objective.size();
    if (lower.size() != n || upper.size() != n || names.size() != n)
      throw DimensionError("variable arrays have inconsistent lengths");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(objective[j])) throw ParameterError("non-finite cost for " + names[j]);
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == kInf || upper[j] == -kInf)
        throw ParameterError("invalid bounds for " + names[j]);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!std::isfinite(rows[i].rhs)) throw ParameterError("non-finite right-hand side in row " + std::to_string(i));
      for (auto [j, a] : rows[i].coefs) {
        if (j < 0 || static_cast<std::size_t>(j) >= n)
          throw DimensionError("row " + std::to_string(i) + " references variable " + std::to_string(j));
        if (!std::isfinite(a)) throw ParameterError("non-finite coefficient in row " + std::to_string(i));
      }
    }
  }
};

/// Sparse equality form with non-negative, optionally upper-bounded columns.
struct StandardForm {
  int rows = 0;
  std::vector<std::vector<std::pair<int, double>>> columns; // (row, value)
  std::vector<double> cost;
  std::vector<double> upper;
  std::vector<double> rhs;
  double cost_offset = 0.0;
  double objective_sign = 1.0;     // -1 when the original problem maximizes
  std::vector<double> row_sign;    // rows negated to make rhs >= 0
  struct VarMap {
    double offset = 0.0;
    int col = -1;     // x = offset + sign * x[col] - x[neg]
    double sign = 1.0;
    int neg = -1;
  };
  std::vector<VarMap> var_map;

  int cols() const { return static_cast<int>(columns.size()); }
};

inline StandardForm to_standard_form(const LPProblem &lp) {
  lp.validate();
  StandardForm sf;
  sf.rows = static_cast<int>(lp.rows.size());
  sf.objective_sign = lp.sense == ObjectiveSense::maximize ? -1.0 : 1.0;
  sf.rhs.resize(lp.rows.size());
  for (std::size_t i = 0; i < lp.rows.size(); ++i) sf.rhs[i] = lp.rows[i].rhs;

  // per-variable columns gathered from the row-wise description
  std::vector<std::vector<std::pair<int, double>>> var_cols(lp.objective.size());
  for (std::size_t i = 0; i < lp.rows.size(); ++i)
    for (auto [j, a] : lp.rows[i].coefs)
      if (a != 0.0) var_cols[j].emplace_back(static_cast<int>(i), a);

  auto add_col = [&](std::vector<std::pair<int, double>> col, double cost, double ub) {
    sf.columns.push_back(std::move(col));
    sf.cost.push_back(cost);
    sf.upper.push_back(ub);
    return sf.cols() - 1;
  };

  for (std::size_t j = 0; j < lp.objective.size(); ++j) {
    const double c = sf.objective_sign * lp.objective[j];
    const double lo = lp.lower[j], hi = lp.upper[j];
    StandardForm::VarMap vm;
    auto negated = var_cols[j];
    for (auto &e : negated) e.second = -e.second;
    if (std::isfinite(lo)) {
      vm.offset = lo;
      vm.col = add_col(var_cols[j], c, hi - lo);
      if (hi < lo) throw ParameterError("empty bounds for " + lp.names[j]);
    } else if (std::isfinite(hi)) {
      vm.offset = hi;
      vm.sign = -1.0;
      vm.col = add_col(negated, -c, kInf);
    } else {
      vm.col = add_col(var_cols[j], c, kInf);
      vm.neg = add_col(negated, -c, kInf);
    }
    if (vm.offset != 0.0) {
      for (auto [i, a] : var_cols[j]) sf.rhs[i] -= a * vm.offset;
      sf.cost_offset += c * vm.offset;
    }
    sf.var_map.push_back(vm);
  }
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    if (lp.rows[i].sense == RowSense::less_equal) add_col({{static_cast<int>(i), 1.0}}, 0.0, kInf);
    if (lp.rows[i].sense == RowSense::greater_equal) add_col({{static_cast<int>(i), -1.0}}, 0.0, kInf);
  }
  sf.row_sign.assign(lp.rows.size(), 1.0);
  for (std::size_t i = 0; i < lp.rows.size(); ++i)
    if (sf.rhs[i] < 0.0) {
      sf.row_sign[i] = -1.0;
      sf.rhs[i] = -sf.rhs[i];
    }
  for (auto &col : sf.columns)
    for (auto &[i, a] : col) a *= sf.row_sign[i];
  return sf;
}

struct SimplexOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  long iteration_limit = 50000;
  /// consecutive degenerate pivots before switching to Bland's rule
  int degenerate_switch = 50;
  int refresh_interval = 100;
};

struct LPSolution {
  LPStatus status = LPStatus::infeasible;
  double objective = 0.0;
  std::vector<double> x;     // original variables
  std::vector<double> duals; // one per original row, sign convention of the original objective
  long iterations = 0;
};

namespace detail {

/// Revised simplex state over a StandardForm extended with one artificial
/// column per row. B^-1 is kept dense and row-major.
class BoundedSimplex {
public:
  enum class VarState : unsigned char { basic, lower, upper };

  BoundedSimplex(const StandardForm &sf, const SimplexOptions &opt) : sf_(sf), opt_(opt) {
    m_ = sf.rows;
    n_struct_ = sf.cols();
    n_ = n_struct_ + m_;
    cols_ = sf.columns;
    upper_ = sf.upper;
    for (int i = 0; i < m_; ++i) {
      cols_.push_back({{i, 1.0}});
      upper_.push_back(kInf);
    }
    state_.assign(static_cast<std::size_t>(n_), VarState::lower);
    basis_.assign(static_cast<std::size_t>(m_), -1);
    crash();
  }

  /// Returns false when phase one cannot reach a feasible point.
  bool phase_one() {
    cost_.assign(static_cast<std::size_t>(n_), 0.0);
    bool any_artificial = false;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= n_struct_) {
        cost_[basis_[i]] = 1.0;
        any_artificial = true;
      }
    // non-basic artificials are never needed again
    for (int j = n_struct_; j < n_; ++j)
      if (state_[j] != VarState::basic) upper_[j] = 0.0;
    if (any_artificial) {
      if (iterate() == LPStatus::unbounded) throw Error("internal", "phase one reported unboundedness");
      double infeas = 0.0;
      for (int i = 0; i < m_; ++i)
        if (basis_[i] >= n_struct_) infeas += x_basic_[i];
      if (infeas > opt_.feasibility_tol * std::max(1.0, rhs_scale_)) return false;
      drive_out_artificials();
    }
    for (int j = n_struct_; j < n_; ++j) upper_[j] = 0.0;
    return true;
  }

  LPStatus phase_two() {
    cost_.assign(static_cast<std::size_t>(n_), 0.0);
    for (int j = 0; j < n_struct_; ++j) cost_[j] = sf_.cost[j];
    refresh();
    return iterate();
  }

  std::vector<double> values() const {
    std::vector<double> x(static_cast<std::size_t>(n_struct_), 0.0);
    for (int j = 0; j < n_struct_; ++j)
      if (state_[j] == VarState::upper) x[j] = upper_[j];
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_struct_) x[basis_[i]] = std::max(0.0, x_basic_[i]);
    return x;
  }

  const std::vector<double> &duals() const { return y_; }
  long iterations() const { return iterations_; }

private:
  // -- basis bookkeeping ---------------------------------------------------

  void crash() {
    binv_ = Matrix::Zero(m_, m_);
    std::vector<char> row_done(static_cast<std::size_t>(m_), 0);
    // singleton structural columns with a positive entry become basic
    for (int j = 0; j < n_struct_; ++j) {
      if (cols_[j].size() != 1) continue;
      const auto [i, a] = cols_[j].front();
      if (row_done[i] || a <= 0.0) continue;
      const double v = sf_.rhs[i] / a;
      if (v > upper_[j]) continue;
      basis_[i] = j;
      state_[j] = VarState::basic;
      binv_(i, i) = 1.0 / a;
      row_done[i] = 1;
    }
    for (int i = 0; i < m_; ++i)
      if (!row_done[i]) {
        basis_[i] = n_struct_ + i;
        state_[n_struct_ + i] = VarState::basic;
        binv_(i, i) = 1.0;
      }
    rhs_scale_ = 0.0;
    for (double b : sf_.rhs) rhs_scale_ = std::max(rhs_scale_, std::abs(b));
    x_basic_.assign(static_cast<std::size_t>(m_), 0.0);
    y_.assign(static_cast<std::size_t>(m_), 0.0);
    refresh_values();
  }

  /// x_B = B^-1 (b - sum_{j at upper} a_j u_j)
  void refresh_values() {
    Vector r = Eigen::Map<const Vector>(sf_.rhs.data(), m_);
    for (int j = 0; j < n_; ++j)
      if (state_[j] == VarState::upper)
        for (auto [i, a] : cols_[j]) r[i] -= a * upper_[j];
    const Vector xb = binv_ * r;
    for (int i = 0; i < m_; ++i) x_basic_[i] = xb[i];
  }

  /// y' = c_B' B^-1
  void refresh_duals() {
    Vector cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    const Vector y = binv_.transpose() * cb;
    for (int i = 0; i < m_; ++i) y_[i] = y[i];
  }

  void refresh() {
    refresh_values();
    refresh_duals();
  }

  void reinvert() {
    Matrix b = Matrix::Zero(m_, m_);
    for (int i = 0; i < m_; ++i)
      for (auto [r, a] : cols_[basis_[i]]) b(r, i) = a;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    binv_ = lu.inverse();
  }

  double reduced_cost(int j) const {
    double d = cost_[j];
    for (auto [i, a] : cols_[j]) d -= y_[i] * a;
    return d;
  }

  void column(int j, std::vector<double> &alpha) const {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    for (auto [k, a] : cols_[j])
      for (int i = 0; i < m_; ++i) alpha[i] += binv_(i, k) * a;
  }

  /// Product-form update of B^-1.
  void pivot(int p, int q, const std::vector<double> &alpha) {
    binv_.row(p) /= alpha[p];
    for (int i = 0; i < m_; ++i) {
      if (i == p || alpha[i] == 0.0) continue;
      binv_.row(i).noalias() -= alpha[i] * binv_.row(p);
    }
    basis_[p] = q;
  }

  // -- main loop -----------------------------------------------------------

  LPStatus iterate() {
    std::vector<double> alpha(static_cast<std::size_t>(m_));
    int degenerate_run = 0;
    bool bland = false;
    long since_refresh = 0;
    refresh_duals();
    for (;;) {
      if (iterations_ >= opt_.iteration_limit)
        throw IterationLimitError("simplex exceeded " + std::to_string(opt_.iteration_limit) + " iterations");
      if (since_refresh >= opt_.refresh_interval) {
        refresh();
        since_refresh = 0;
      }

      // pricing
      int q = -1;
      double best = 0.0, dq = 0.0;
      for (int j = 0; j < n_; ++j) {
        if (state_[j] == VarState::basic || upper_[j] == 0.0) continue;
        const double d = reduced_cost(j);
        const double viol = state_[j] == VarState::lower ? -d : d;
        if (viol <= opt_.optimality_tol) continue;
        if (bland) {
          q = j;
          dq = d;
          break;
        }
        if (viol > best) {
          best = viol;
          q = j;
          dq = d;
        }
      }
      if (q < 0) {
        // confirm with freshly computed duals before declaring optimality
        if (since_refresh == 0) return LPStatus::optimal;
        refresh();
        since_refresh = 0;
        continue;
      }

      column(q, alpha);
      const double dir = state_[q] == VarState::lower ? 1.0 : -1.0;
      double theta = upper_[q]; // bound flip distance
      int leave = -1;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double a = alpha[i] * dir;
        double t;
        bool to_upper;
        if (a > opt_.pivot_tol) {
          t = std::max(0.0, x_basic_[i]) / a;
          to_upper = false;
        } else if (a < -opt_.pivot_tol && std::isfinite(upper_[basis_[i]])) {
          t = std::max(0.0, upper_[basis_[i]] - x_basic_[i]) / -a;
          to_upper = true;
        } else {
          continue;
        }
        bool take;
        if (leave < 0)
          take = t < theta;
        else if (t < theta - 1e-12)
          take = true;
        else if (t <= theta + 1e-12)
          take = bland ? basis_[i] < basis_[leave] : std::abs(a) > leave_pivot;
        else
          take = false;
        if (take) {
          theta = t;
          leave = i;
          leave_to_upper = to_upper;
          leave_pivot = std::abs(a);
        }
      }
      if (!std::isfinite(theta)) return LPStatus::unbounded;
      ++iterations_;
      ++since_refresh;

      if (theta <= 1e-12) {
        if (++degenerate_run >= opt_.degenerate_switch) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      for (int i = 0; i < m_; ++i) x_basic_[i] -= theta * dir * alpha[i];
      if (leave < 0) {
        // entering variable moves to its opposite bound; basis unchanged
        state_[q] = state_[q] == VarState::lower ? VarState::upper : VarState::lower;
        continue;
      }
      const int out = basis_[leave];
      const double entering_value = state_[q] == VarState::lower ? theta : upper_[q] - theta;
      state_[out] = leave_to_upper ? VarState::upper : VarState::lower;
      state_[q] = VarState::basic;
      // y_new = y + d_q / alpha_p * (row p of old B^-1)
      const double ratio = dq / alpha[leave];
      for (int i = 0; i < m_; ++i) y_[i] += ratio * binv_(leave, i);
      pivot(leave, q, alpha);
      x_basic_[leave] = entering_value;
    }
  }

  void drive_out_artificials() {
    std::vector<double> alpha(static_cast<std::size_t>(m_));
    for (int p = 0; p < m_; ++p) {
      if (basis_[p] < n_struct_) continue;
      // row p of B^-1 A gives the candidates
      int q = -1;
      double best = opt_.pivot_tol;
      for (int j = 0; j < n_struct_; ++j) {
        if (state_[j] == VarState::basic) continue;
        double v = 0.0;
        for (auto [k, a] : cols_[j]) v += binv_(p, k) * a;
        if (std::abs(v) > best) {
          best = std::abs(v);
          q = j;
        }
      }
      if (q < 0) continue; // redundant row; the artificial stays basic at zero
      column(q, alpha);
      // degenerate pivot: no value changes, the entering variable keeps its bound value
      const int out = basis_[p];
      const double entering_value = state_[q] == VarState::upper ? upper_[q] : 0.0;
      state_[out] = VarState::lower;
      state_[q] = VarState::basic;
      pivot(p, q, alpha);
      x_basic_[p] = entering_value;
      ++iterations_;
    }
  }

  const StandardForm &sf_;
  SimplexOptions opt_;
  int m_ = 0, n_ = 0, n_struct_ = 0;
  std::vector<std::vector<std::pair<int, double>>> cols_;
  std::vector<double> upper_, cost_;
  std::vector<VarState> state_;
  std::vector<int> basis_;
  Matrix binv_;
  std::vector<double> x_basic_, y_;
  double rhs_scale_ = 1.0;
  long iterations_ = 0;
};

} // namespace detail

/// Two-phase bounded primal simplex. Dantzig pricing; after a run of
/// degenerate pivots the entering and leaving choices follow Bland's
/// smallest-index rule until the objective moves again.
inline LPSolution simplex_solve(const LPProblem &lp, const SimplexOptions &opt = {}) {
  const StandardForm sf = to_standard_form(lp);
  LPSolution sol;
  detail::BoundedSimplex solver(sf, opt);
  if (!solver.phase_one()) {
    sol.status = LPStatus::infeasible;
    sol.iterations = solver.iterations();
    return sol;
  }
  sol.status = solver.phase_two();
  sol.iterations = solver.iterations();
  if (sol.status != LPStatus::optimal) return sol;

  const auto xs = solver.values();
  sol.x.resize(lp.objective.size());
  for (std::size_t j = 0; j < lp.objective.size(); ++j) {
    const auto &vm = sf.var_map[j];
    double v = vm.offset + vm.sign * xs[vm.col];
    if (vm.neg >= 0) v -= xs[vm.neg];
    sol.x[j] = v;
  }
  double obj = 0.0;
  for (std::size_t j = 0; j < lp.objective.size(); ++j) obj += lp.objective[j] * sol.x[j];
  sol.objective = obj;
  const auto &y = solver.duals();
  sol.duals.resize(lp.rows.size());
  for (std::size_t i = 0; i < lp.rows.size(); ++i) sol.duals[i] = sf.objective_sign * sf.row_sign[i] * y[i];
  return sol;
}

} // namespace diffcast
