// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <vector>

#include "eor/solver.hpp"

namespace eor {

namespace {

struct Node {
  double bound = 0.0;  // LP bound of the parent (minimization)
  std::size_t id = 0;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct NodeOrder {
  // Best-first: smallest bound first, then oldest node.
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

}  // namespace

Solution solve_milp(const StandardFormLP& lp, const std::vector<bool>& integer,
                    MilpBudget budget) {
  const auto started = std::chrono::steady_clock::now();
  const bool any_integer =
      std::find(integer.begin(), integer.end(), true) != integer.end();
  if (!any_integer) {
    return solve_lp(lp, LpBudget{budget.max_lp_iterations});
  }

  Solution result;
  result.status = SolveStatus::kInfeasible;
  std::optional<std::vector<double>> incumbent;
  double incumbent_value = kInf;  // minimization orientation
  bool exhausted = true;

  Node root;
  root.bound = -kInf;
  root.lower = lp.l_x;
  root.upper = lp.u_x;
  for (std::size_t j = 0; j < lp.n; ++j) {
    if (!integer[j]) continue;
    if (std::isfinite(root.lower[j])) root.lower[j] = std::ceil(root.lower[j] - kIntegralityTol);
    if (std::isfinite(root.upper[j])) root.upper[j] = std::floor(root.upper[j] + kIntegralityTol);
  }

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::size_t next_id = 1;
  open.push(std::move(root));

  StandardFormLP relax = lp;
  while (!open.empty()) {
    Node node = open.top();
    open.pop();
    if (incumbent && node.bound >= incumbent_value - kObjectiveTol) continue;
    if (result.stats.nodes >= budget.max_nodes) {
      exhausted = false;
      break;
    }
    ++result.stats.nodes;

    relax.l_x = node.lower;
    relax.u_x = node.upper;
    relax.negated_objective = false;
    const Solution sub = solve_lp(relax, LpBudget{budget.max_lp_iterations});
    result.stats.iterations += sub.stats.iterations;
    if (sub.status == SolveStatus::kInfeasible) continue;
    if (sub.status == SolveStatus::kLimit) {
      exhausted = false;
      continue;
    }
    if (sub.status == SolveStatus::kUnbounded) {
      result.status = SolveStatus::kUnbounded;
      result.assignment.clear();
      result.stats.wall_time = std::chrono::duration_cast<std::chrono::microseconds>(
          std::chrono::steady_clock::now() - started);
      return result;
    }
    const double value = sub.objective;
    if (incumbent && value >= incumbent_value - kObjectiveTol) continue;

    // Most fractional integer column; lowest ordinal on ties.
    std::size_t branch = lp.n;
    double best_frac = kIntegralityTol;
    for (std::size_t j = 0; j < lp.n; ++j) {
      if (!integer[j]) continue;
      const double x = sub.assignment[j].second;
      const double frac = std::abs(x - std::round(x));
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        branch = j;
      }
    }

    if (branch == lp.n) {
      std::vector<double> x(lp.n);
      double obj = 0.0;
      for (std::size_t j = 0; j < lp.n; ++j) {
        x[j] = integer[j] ? std::round(sub.assignment[j].second) : sub.assignment[j].second;
        obj += lp.c[j] * x[j];
      }
      if (!incumbent || obj < incumbent_value - kObjectiveTol) {
        incumbent = std::move(x);
        incumbent_value = obj;
      }
      continue;
    }

    const double x = sub.assignment[branch].second;
    Node down;
    down.bound = value;
    down.id = next_id++;
    down.lower = node.lower;
    down.upper = node.upper;
    down.upper[branch] = std::floor(x);
    Node up;
    up.bound = value;
    up.id = next_id++;
    up.lower = std::move(node.lower);
    up.upper = std::move(node.upper);
    up.lower[branch] = std::ceil(x);
    open.push(std::move(down));
    open.push(std::move(up));
  }

  if (incumbent) {
    result.objective = lp.negated_objective ? -incumbent_value : incumbent_value;
    if (result.objective == 0.0) result.objective = 0.0;
    for (std::size_t j = 0; j < lp.n; ++j) {
      result.assignment.emplace_back(lp.var_names[j], (*incumbent)[j]);
    }
    result.status = exhausted ? SolveStatus::kOptimal : SolveStatus::kLimit;
  } else {
    result.status = exhausted ? SolveStatus::kInfeasible : SolveStatus::kLimit;
  }
  result.stats.wall_time = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - started);
  return result;
}

Solution solve_milp(const LinearModel& model, MilpBudget budget) {
  return solve_milp(to_standard_form(model), integrality(model), budget);
}

}  // namespace eor
