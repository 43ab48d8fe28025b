// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "eor/solver.hpp"

namespace eor {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "Optimal";
    case SolveStatus::kInfeasible: return "Infeasible";
    case SolveStatus::kUnbounded: return "Unbounded";
    case SolveStatus::kLimit: return "Limit";
  }
  return "Unknown";
}

std::optional<double> Solution::value(std::string_view name) const {
  for (const auto& [n, v] : assignment) {
    if (n == name) return v;
  }
  return std::nullopt;
}

double max_violation(const StandardFormLP& lp, const std::vector<double>& x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < lp.n; ++j) {
    worst = std::max({worst, lp.l_x[j] - x[j], x[j] - lp.u_x[j]});
  }
  for (std::size_t i = 0; i < lp.m; ++i) {
    double ax = 0.0;
    for (const auto& e : lp.rows[i]) ax += e.value * x[e.col];
    worst = std::max({worst, lp.l_s[i] - ax, ax - lp.u_s[i]});
  }
  return worst;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;

// How an original column maps to nonnegative internal columns:
//   x = offset + sign * y[first]                 (one column)
//   x = y[first] - y[first + 1]                  (free, two columns)
struct ColumnMap {
  std::size_t first = 0;
  bool split = false;
  double offset = 0.0;
  double sign = 1.0;
};

// One internal equality row: sum(a * y) + slack_sign * s = rhs, scaled by
// `flip` so that rhs >= 0. `origin` is the LP row it came from, or npos for
// variable upper-bound rows.
struct InternalRow {
  std::vector<double> coeffs;  // over structural internal columns
  double slack_sign = 0.0;     // 0: no slack (equality)
  double rhs = 0.0;
  double flip = 1.0;
  std::size_t origin = static_cast<std::size_t>(-1);
};

// Dense tableau over columns [structural | slacks | artificials | rhs].
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const {
    return data_[r * (cols_ + 1) + c];
  }
  double& rhs(std::size_t r) { return at(r, cols_); }
  [[nodiscard]] double rhs(std::size_t r) const { return at(r, cols_); }
  // Objective row lives at index rows_.
  double& cost(std::size_t c) { return at(rows_, c); }
  [[nodiscard]] double cost(std::size_t c) const { return at(rows_, c); }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }
  [[nodiscard]] const std::vector<std::size_t>& basis() const { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    for (std::size_t k = 0; k <= cols_; ++k) at(r, k) /= p;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t k = 0; k <= cols_; ++k) at(i, k) -= f * at(r, k);
      at(i, c) = 0.0;
    }
    basis_[r] = c;
  }

  // Reduced-cost row from a cost vector over all columns.
  void load_costs(const std::vector<double>& costs) {
    for (std::size_t c = 0; c <= cols_; ++c) cost(c) = c < cols_ ? costs[c] : 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = costs[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) cost(c) -= cb * at(r, c);
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
  std::vector<std::size_t> basis_;
};

enum class Phase { kOptimal, kUnbounded, kLimit };

// Bland's rule: lowest-index entering column with negative reduced cost,
// lowest-index basic variable among ratio ties.
Phase run_simplex(Tableau& t, const std::vector<bool>& allowed, std::size_t& iterations,
                  std::size_t max_iterations) {
  for (;;) {
    std::size_t enter = t.cols();
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (allowed[c] && t.cost(c) < -kCostTol) {
        enter = c;
        break;
      }
    }
    if (enter == t.cols()) return Phase::kOptimal;
    if (iterations >= max_iterations) return Phase::kLimit;

    std::size_t leave = t.rows();
    double best = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = t.rhs(r) / a;
      if (leave == t.rows() || ratio < best - 1e-12 ||
          (ratio <= best + 1e-12 && t.basis()[r] < t.basis()[leave])) {
        leave = r;
        best = ratio;
      }
    }
    if (leave == t.rows()) return Phase::kUnbounded;
    t.pivot(leave, enter);
    ++iterations;
  }
}

}  // namespace

Solution solve_lp(const StandardFormLP& lp, LpBudget budget) {
  const auto started = std::chrono::steady_clock::now();
  Solution sol;
  auto finish = [&](SolveStatus status) {
    sol.status = status;
    sol.stats.wall_time = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - started);
    return sol;
  };

  for (std::size_t j = 0; j < lp.n; ++j) {
    if (lp.l_x[j] > lp.u_x[j] + kFeasibilityTol) return finish(SolveStatus::kInfeasible);
  }
  for (std::size_t i = 0; i < lp.m; ++i) {
    if (lp.l_s[i] > lp.u_s[i] + kFeasibilityTol) return finish(SolveStatus::kInfeasible);
  }

  // Column substitution.
  std::vector<ColumnMap> cmap(lp.n);
  std::size_t nstruct = 0;
  std::vector<InternalRow> irows;
  for (std::size_t j = 0; j < lp.n; ++j) {
    auto& cm = cmap[j];
    cm.first = nstruct;
    const bool lo = std::isfinite(lp.l_x[j]);
    const bool hi = std::isfinite(lp.u_x[j]);
    if (lo) {
      cm.offset = lp.l_x[j];
      cm.sign = 1.0;
      ++nstruct;
    } else if (hi) {
      cm.offset = lp.u_x[j];
      cm.sign = -1.0;
      ++nstruct;
    } else {
      cm.split = true;
      nstruct += 2;
    }
  }
  auto expand = [&](const SparseRow& row, double& shift) {
    std::vector<double> a(nstruct, 0.0);
    shift = 0.0;
    for (const auto& e : row) {
      const auto& cm = cmap[e.col];
      if (cm.split) {
        a[cm.first] += e.value;
        a[cm.first + 1] -= e.value;
      } else {
        a[cm.first] += e.value * cm.sign;
        shift += e.value * cm.offset;
      }
    }
    return a;
  };
  auto push_row = [&](std::vector<double> a, double slack_sign, double rhs,
                      std::size_t origin) {
    InternalRow r;
    r.flip = rhs < 0 ? -1.0 : 1.0;
    for (auto& v : a) v *= r.flip;
    r.coeffs = std::move(a);
    r.slack_sign = slack_sign * r.flip;
    r.rhs = rhs * r.flip;
    r.origin = origin;
    irows.push_back(std::move(r));
  };

  for (std::size_t i = 0; i < lp.m; ++i) {
    double shift = 0.0;
    auto a = expand(lp.rows[i], shift);
    const bool lo = std::isfinite(lp.l_s[i]);
    const bool hi = std::isfinite(lp.u_s[i]);
    if (lo && hi && lp.l_s[i] == lp.u_s[i]) {
      push_row(std::move(a), 0.0, lp.l_s[i] - shift, i);
      continue;
    }
    if (lo) push_row(a, -1.0, lp.l_s[i] - shift, i);
    if (hi) push_row(std::move(a), 1.0, lp.u_s[i] - shift, i);
  }
  for (std::size_t j = 0; j < lp.n; ++j) {
    const auto& cm = cmap[j];
    if (!cm.split && std::isfinite(lp.l_x[j]) && std::isfinite(lp.u_x[j])) {
      std::vector<double> a(nstruct, 0.0);
      a[cm.first] = 1.0;
      push_row(std::move(a), 1.0, lp.u_x[j] - lp.l_x[j], static_cast<std::size_t>(-1));
    }
  }

  const std::size_t rows = irows.size();
  std::size_t nslack = 0;
  std::vector<std::size_t> slack_col(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (irows[r].slack_sign != 0.0) slack_col[r] = nstruct + nslack++;
  }
  const std::size_t art0 = nstruct + nslack;
  const std::size_t cols = art0 + rows;

  Tableau t(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < nstruct; ++c) t.at(r, c) = irows[r].coeffs[c];
    if (irows[r].slack_sign != 0.0) t.at(r, slack_col[r]) = irows[r].slack_sign;
    t.at(r, art0 + r) = 1.0;
    t.rhs(r) = irows[r].rhs;
    t.basis()[r] = art0 + r;
  }

  // Phase 1: minimize the sum of artificials.
  std::vector<double> phase1(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) phase1[art0 + r] = 1.0;
  t.load_costs(phase1);
  std::vector<bool> allowed(cols, true);
  std::size_t iterations = 0;
  if (run_simplex(t, allowed, iterations, budget.max_iterations) == Phase::kLimit) {
    sol.stats.iterations = iterations;
    return finish(SolveStatus::kLimit);
  }
  double infeas = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (t.basis()[r] >= art0) infeas += t.rhs(r);
  }
  double scale = 1.0;
  for (const auto& r : irows) scale = std::max(scale, std::abs(r.rhs));
  if (infeas > kFeasibilityTol * scale) {
    sol.stats.iterations = iterations;
    return finish(SolveStatus::kInfeasible);
  }

  // Drive zero-level artificials out of the basis where possible; rows where
  // that fails are redundant and keep their artificial pinned at zero.
  for (std::size_t r = 0; r < rows; ++r) {
    if (t.basis()[r] < art0) continue;
    for (std::size_t c = 0; c < art0; ++c) {
      if (std::abs(t.at(r, c)) > kPivotTol) {
        t.pivot(r, c);
        break;
      }
    }
  }
  for (std::size_t c = art0; c < cols; ++c) allowed[c] = false;

  // Phase 2.
  std::vector<double> phase2(cols, 0.0);
  for (std::size_t j = 0; j < lp.n; ++j) {
    const auto& cm = cmap[j];
    if (cm.split) {
      phase2[cm.first] = lp.c[j];
      phase2[cm.first + 1] = -lp.c[j];
    } else {
      phase2[cm.first] = lp.c[j] * cm.sign;
    }
  }
  t.load_costs(phase2);
  const Phase p2 = run_simplex(t, allowed, iterations, budget.max_iterations);
  sol.stats.iterations = iterations;
  if (p2 == Phase::kLimit) return finish(SolveStatus::kLimit);
  if (p2 == Phase::kUnbounded) return finish(SolveStatus::kUnbounded);

  std::vector<double> y(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) y[t.basis()[r]] = t.rhs(r);
  std::vector<double> x(lp.n, 0.0);
  double obj = 0.0;
  for (std::size_t j = 0; j < lp.n; ++j) {
    const auto& cm = cmap[j];
    x[j] = cm.split ? y[cm.first] - y[cm.first + 1] : cm.offset + cm.sign * y[cm.first];
    obj += lp.c[j] * x[j];
  }

  // Simplex multipliers: reduced cost of artificial r is 0 - y_r, so
  // y_r = -cost(art0 + r). Map back through the row flip.
  sol.row_duals.assign(lp.m, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (irows[r].origin == static_cast<std::size_t>(-1)) continue;
    const double yr = -t.cost(art0 + r);
    sol.row_duals[irows[r].origin] += irows[r].flip * yr;
  }

  sol.objective = lp.negated_objective ? -obj : obj;
  if (sol.objective == 0.0) sol.objective = 0.0;
  sol.assignment.reserve(lp.n);
  for (std::size_t j = 0; j < lp.n; ++j) sol.assignment.emplace_back(lp.var_names[j], x[j]);
  return finish(SolveStatus::kOptimal);
}

}  // namespace eor
