#pragma once

// Dense two-phase simplex for the small path-based flow LPs in this project.
//
// Problems are stated over bounded variables and ranged-free linear rows:
//
//   minimize    c^T x
//   subject to  a_i^T x  {<=, =, >=}  b_i
//               lower_j <= x_j <= upper_j
//
// and solved on an explicit tableau. Pricing is Dantzig's rule with a switch
// to Bland's rule after a run of degenerate pivots, which rules out cycling.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "robust_te/errors.hpp"

namespace robust_te::lp {

enum class Sense { kLessEqual, kEqual, kGreaterEqual };
enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kIterationLimit: return "iteration-limit";
  }
  return "?";
}

template <typename Scalar>
class Problem {
 public:
  using Index = Eigen::Index;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  static constexpr Scalar kInfinity = std::numeric_limits<Scalar>::infinity();

  struct Variable {
    Scalar lower;
    Scalar upper;
    Scalar cost;
    std::string name;
  };

  struct Constraint {
    Sense sense;
    Scalar rhs;
    std::string name;
    std::vector<std::pair<Index, Scalar>> terms;
  };

  Index add_variable(Scalar lower = Scalar(0), Scalar upper = kInfinity, Scalar cost = Scalar(0),
                     std::string name = {}) {
    if (lower > upper) throw PreconditionError("variable lower bound exceeds upper bound");
    if (name.empty()) name = "x" + std::to_string(variables_.size());
    variables_.push_back(Variable{lower, upper, cost, std::move(name)});
    return static_cast<Index>(variables_.size() - 1);
  }

  Index add_constraint(Sense sense, Scalar rhs, std::string name = {}) {
    if (name.empty()) name = "c" + std::to_string(constraints_.size());
    constraints_.push_back(Constraint{sense, rhs, std::move(name), {}});
    return static_cast<Index>(constraints_.size() - 1);
  }

  // Adds `value` to the coefficient of `var` in `row`.
  void add_term(Index row, Index var, Scalar value) {
    check_var(var);
    auto& terms = constraints_.at(static_cast<std::size_t>(row)).terms;
    for (auto& [v, coef] : terms) {
      if (v == var) {
        coef += value;
        return;
      }
    }
    terms.emplace_back(var, value);
  }

  void set_cost(Index var, Scalar cost) {
    check_var(var);
    variables_[static_cast<std::size_t>(var)].cost = cost;
  }

  Index num_variables() const { return static_cast<Index>(variables_.size()); }
  Index num_constraints() const { return static_cast<Index>(constraints_.size()); }
  const Variable& variable(Index j) const { return variables_.at(static_cast<std::size_t>(j)); }
  const Constraint& constraint(Index i) const {
    return constraints_.at(static_cast<std::size_t>(i));
  }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  Scalar objective_value(const Vector& x) const {
    Scalar v(0);
    for (std::size_t j = 0; j < variables_.size(); ++j) {
      v += variables_[j].cost * x(static_cast<Index>(j));
    }
    return v;
  }

  // Largest bound or row violation of `x`, with each row scaled by 1 + |rhs|.
  Scalar max_violation(const Vector& x) const {
    Scalar worst(0);
    for (std::size_t j = 0; j < variables_.size(); ++j) {
      const Scalar v = x(static_cast<Index>(j));
      worst = std::max({worst, variables_[j].lower - v, v - variables_[j].upper});
    }
    for (const auto& c : constraints_) {
      Scalar lhs(0);
      for (const auto& [var, coef] : c.terms) lhs += coef * x(var);
      const Scalar scale = Scalar(1) + std::abs(c.rhs);
      Scalar viol(0);
      switch (c.sense) {
        case Sense::kLessEqual: viol = lhs - c.rhs; break;
        case Sense::kGreaterEqual: viol = c.rhs - lhs; break;
        case Sense::kEqual: viol = std::abs(lhs - c.rhs); break;
      }
      worst = std::max(worst, viol / scale);
    }
    return worst;
  }

 private:
  void check_var(Index var) const {
    if (var < 0 || var >= num_variables()) throw PreconditionError("variable index out of range");
  }

  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
};

template <typename Scalar>
struct Solution {
  Status status = Status::kInfeasible;
  Scalar objective = Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  long iterations = 0;
};

struct SolverOptions {
  double feasibility_tolerance = 1e-7;
  double optimality_tolerance = 1e-7;
  double pivot_tolerance = 1e-9;
  // Optimal solutions violating any row or bound by more than this throw SolverError.
  double report_tolerance = 1e-6;
  long max_iterations = 200000;
  int degenerate_run_before_bland = 50;
};

namespace detail {

template <typename Scalar>
class Tableau {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  // rows x (cols + 1); the last column holds the right-hand side and the last
  // row holds reduced costs (its rhs entry is minus the objective value).
  Matrix t;
  std::vector<Eigen::Index> basis;
  Eigen::Index cols = 0;
  Eigen::Index rows = 0;

  Scalar& rhs(Eigen::Index i) { return t(i, cols); }
  Scalar rhs(Eigen::Index i) const { return t(i, cols); }

  void pivot(Eigen::Index r, Eigen::Index q) {
    const Scalar p = t(r, q);
    t.row(r) /= p;
    t(r, q) = Scalar(1);
    for (Eigen::Index i = 0; i <= rows; ++i) {
      if (i == r) continue;
      const Scalar f = t(i, q);
      if (f != Scalar(0)) {
        t.row(i) -= f * t.row(r);
        t(i, q) = Scalar(0);
      }
    }
    basis[static_cast<std::size_t>(r)] = q;
  }
};

// Runs primal simplex iterations on columns [0, allowed_cols). Returns
// kOptimal, kUnbounded or kIterationLimit.
template <typename Scalar>
Status iterate(Tableau<Scalar>& tab, Eigen::Index allowed_cols, const SolverOptions& opt,
               long& iterations) {
  const Scalar opt_tol(opt.optimality_tolerance);
  const Scalar piv_tol(opt.pivot_tolerance);
  int degenerate_run = 0;
  bool bland = false;
  while (true) {
    if (iterations >= opt.max_iterations) return Status::kIterationLimit;

    Eigen::Index q = -1;
    Scalar best = -opt_tol;
    for (Eigen::Index j = 0; j < allowed_cols; ++j) {
      const Scalar d = tab.t(tab.rows, j);
      if (d < best) {
        q = j;
        if (bland) break;
        best = d;
      }
    }
    if (q < 0) return Status::kOptimal;

    Eigen::Index r = -1;
    Scalar best_ratio = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < tab.rows; ++i) {
      const Scalar a = tab.t(i, q);
      if (a <= piv_tol) continue;
      const Scalar ratio = std::max(Scalar(0), tab.rhs(i)) / a;
      const bool better = ratio < best_ratio - piv_tol;
      const bool tie = !better && ratio <= best_ratio + piv_tol && r >= 0 &&
                       tab.basis[static_cast<std::size_t>(i)] <
                           tab.basis[static_cast<std::size_t>(r)];
      if (better || tie) {
        r = i;
        best_ratio = std::min(best_ratio, ratio);
      }
    }
    if (r < 0) return Status::kUnbounded;

    if (best_ratio <= piv_tol) {
      if (++degenerate_run > opt.degenerate_run_before_bland) bland = true;
    } else {
      degenerate_run = 0;
    }
    tab.pivot(r, q);
    ++iterations;
  }
}

}  // namespace detail

template <typename Scalar>
Solution<Scalar> solve(const Problem<Scalar>& problem, const SolverOptions& opt = {}) {
  using Index = Eigen::Index;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  // Map each original variable onto nonnegative structural columns:
  // x = offset + sign * y  (one column), or x = y+ - y- for free variables.
  struct Mapping {
    Index col;
    Index neg_col;  // -1 unless free
    Scalar offset;
    Scalar sign;
  };
  std::vector<Mapping> map;
  Index n_struct = 0;
  struct Row {
    std::vector<std::pair<Index, Scalar>> terms;
    Sense sense;
    Scalar rhs;
  };
  std::vector<Row> rows;

  for (const auto& v : problem.variables()) {
    if (std::isfinite(v.lower)) {
      map.push_back(Mapping{n_struct++, -1, v.lower, Scalar(1)});
      if (std::isfinite(v.upper)) {
        rows.push_back(Row{{{map.back().col, Scalar(1)}}, Sense::kLessEqual, v.upper - v.lower});
      }
    } else if (std::isfinite(v.upper)) {
      map.push_back(Mapping{n_struct++, -1, v.upper, Scalar(-1)});
    } else {
      Index pos = n_struct++;
      Index neg = n_struct++;
      map.push_back(Mapping{pos, neg, Scalar(0), Scalar(1)});
    }
  }

  Vector cost = Vector::Zero(n_struct);
  for (std::size_t j = 0; j < map.size(); ++j) {
    const Scalar c = problem.variables()[j].cost;
    cost(map[j].col) += c * map[j].sign;
    if (map[j].neg_col >= 0) cost(map[j].neg_col) -= c;
  }

  for (const auto& c : problem.constraints()) {
    Row row{{}, c.sense, c.rhs};
    for (const auto& [var, coef] : c.terms) {
      const Mapping& m = map[static_cast<std::size_t>(var)];
      row.rhs -= coef * m.offset;
      row.terms.emplace_back(m.col, coef * m.sign);
      if (m.neg_col >= 0) row.terms.emplace_back(m.neg_col, -coef);
    }
    rows.push_back(std::move(row));
  }

  // Normalize to nonnegative right-hand sides.
  for (auto& row : rows) {
    if (row.rhs < Scalar(0)) {
      row.rhs = -row.rhs;
      for (auto& term : row.terms) term.second = -term.second;
      if (row.sense == Sense::kLessEqual) {
        row.sense = Sense::kGreaterEqual;
      } else if (row.sense == Sense::kGreaterEqual) {
        row.sense = Sense::kLessEqual;
      }
    }
  }

  const Index m = static_cast<Index>(rows.size());
  Index n_slack = 0;
  Index n_art = 0;
  for (const auto& row : rows) {
    if (row.sense != Sense::kEqual) ++n_slack;
    if (row.sense != Sense::kLessEqual) ++n_art;
  }
  const Index art_begin = n_struct + n_slack;
  const Index cols = art_begin + n_art;

  detail::Tableau<Scalar> tab;
  tab.rows = m;
  tab.cols = cols;
  tab.t = detail::Tableau<Scalar>::Matrix::Zero(m + 1, cols + 1);
  tab.basis.assign(static_cast<std::size_t>(m), -1);

  Index slack = n_struct;
  Index art = art_begin;
  for (Index i = 0; i < m; ++i) {
    const Row& row = rows[static_cast<std::size_t>(i)];
    for (const auto& [col, coef] : row.terms) tab.t(i, col) += coef;
    tab.rhs(i) = row.rhs;
    if (row.sense == Sense::kLessEqual) {
      tab.t(i, slack) = Scalar(1);
      tab.basis[static_cast<std::size_t>(i)] = slack++;
    } else {
      if (row.sense == Sense::kGreaterEqual) tab.t(i, slack++) = Scalar(-1);
      tab.t(i, art) = Scalar(1);
      tab.basis[static_cast<std::size_t>(i)] = art++;
    }
  }

  Solution<Scalar> sol;
  long iterations = 0;

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    for (Index i = 0; i < m; ++i) {
      if (tab.basis[static_cast<std::size_t>(i)] >= art_begin) tab.t.row(m) -= tab.t.row(i);
    }
    for (Index j = art_begin; j < cols; ++j) tab.t(m, j) = Scalar(0);
    Status s = detail::iterate(tab, cols, opt, iterations);
    if (s == Status::kIterationLimit) {
      sol.status = s;
      sol.iterations = iterations;
      return sol;
    }
    const Scalar infeasibility = -tab.rhs(m);
    Scalar scale(1);
    for (const auto& row : rows) scale = std::max(scale, row.rhs);
    if (infeasibility > Scalar(opt.feasibility_tolerance) * scale) {
      sol.status = Status::kInfeasible;
      sol.iterations = iterations;
      return sol;
    }
    // Drive remaining (zero-level) artificials out of the basis.
    std::vector<Index> redundant;
    for (Index i = 0; i < m; ++i) {
      if (tab.basis[static_cast<std::size_t>(i)] < art_begin) continue;
      Index q = -1;
      Scalar best(opt.pivot_tolerance);
      for (Index j = 0; j < art_begin; ++j) {
        if (std::abs(tab.t(i, j)) > best) {
          best = std::abs(tab.t(i, j));
          q = j;
        }
      }
      if (q >= 0) {
        tab.pivot(i, q);
      } else {
        redundant.push_back(i);
      }
    }
    // Redundant rows keep their artificial basic at zero; zeroing the row
    // keeps it inert for the rest of the solve.
    for (Index i : redundant) {
      tab.t.row(i).setZero();
      tab.t(i, tab.basis[static_cast<std::size_t>(i)]) = Scalar(1);
    }
  }

  // Phase 2 reduced costs: d_j = c_j - c_B^T B^{-1} A_j.
  tab.t.row(m).setZero();
  tab.t.row(m).head(n_struct) = cost.transpose();
  for (Index i = 0; i < m; ++i) {
    const Index b = tab.basis[static_cast<std::size_t>(i)];
    const Scalar cb = b < n_struct ? cost(b) : Scalar(0);
    if (cb != Scalar(0)) tab.t.row(m) -= cb * tab.t.row(i);
  }
  Status s = detail::iterate(tab, art_begin, opt, iterations);
  sol.iterations = iterations;
  sol.status = s;
  if (s != Status::kOptimal) return sol;

  Vector y = Vector::Zero(cols);
  for (Index i = 0; i < m; ++i) {
    y(tab.basis[static_cast<std::size_t>(i)]) = std::max(Scalar(0), tab.rhs(i));
  }
  sol.values.resize(problem.num_variables());
  for (std::size_t j = 0; j < map.size(); ++j) {
    Scalar v = map[j].offset + map[j].sign * y(map[j].col);
    if (map[j].neg_col >= 0) v -= y(map[j].neg_col);
    const auto& var = problem.variables()[j];
    if (std::isfinite(var.lower)) v = std::max(v, var.lower);
    if (std::isfinite(var.upper)) v = std::min(v, var.upper);
    sol.values(static_cast<Index>(j)) = v;
  }
  sol.objective = problem.objective_value(sol.values);

  const Scalar viol = problem.max_violation(sol.values);
  if (viol > Scalar(opt.report_tolerance)) {
    throw SolverError("simplex returned a solution violating constraints by " +
                      std::to_string(static_cast<double>(viol)));
  }
  return sol;
}

// CPLEX LP text format, for cross-checking with external solvers.
template <typename Scalar>
void write_lp(const Problem<Scalar>& problem, std::ostream& out) {
  auto term = [&](Scalar coef, const std::string& name, bool first) {
    if (first) {
      out << (coef < Scalar(0) ? " - " : " ");
    } else {
      out << (coef < Scalar(0) ? " - " : " + ");
    }
    out << std::setprecision(17) << std::abs(static_cast<double>(coef)) << ' ' << name;
  };
  out << "Minimize\n obj:";
  bool first = true;
  for (const auto& v : problem.variables()) {
    if (v.cost == Scalar(0)) continue;
    term(v.cost, v.name, first);
    first = false;
  }
  if (first) out << " 0 " << problem.variables().front().name;
  out << "\nSubject To\n";
  for (const auto& c : problem.constraints()) {
    out << ' ' << c.name << ':';
    bool f = true;
    for (const auto& [var, coef] : c.terms) {
      term(coef, problem.variable(var).name, f);
      f = false;
    }
    if (f) out << " 0 " << problem.variables().front().name;
    const char* op = c.sense == Sense::kLessEqual ? "<=" : c.sense == Sense::kEqual ? "=" : ">=";
    out << ' ' << op << ' ' << std::setprecision(17) << static_cast<double>(c.rhs) << "\n";
  }
  out << "Bounds\n";
  for (const auto& v : problem.variables()) {
    const bool lo = std::isfinite(v.lower);
    const bool hi = std::isfinite(v.upper);
    if (!lo && !hi) {
      out << ' ' << v.name << " free\n";
    } else if (lo && hi) {
      out << ' ' << static_cast<double>(v.lower) << " <= " << v.name
          << " <= " << static_cast<double>(v.upper) << "\n";
    } else if (lo) {
      out << ' ' << v.name << " >= " << static_cast<double>(v.lower) << "\n";
    } else {
      out << " -inf <= " << v.name << " <= " << static_cast<double>(v.upper) << "\n";
    }
  }
  out << "End\n";
}

using ProblemD = Problem<double>;
using SolutionD = Solution<double>;

}  // namespace robust_te::lp
