// SPDX-License-Identifier: Apache-2.0

// Exact desk-scale solvers: dense two-phase simplex (Bland's rule) for
// StandardFormLP and best-first branch-and-bound for mixed-integer models.

#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eor/model.hpp"

namespace eor {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kLimit };

[[nodiscard]] std::string_view to_string(SolveStatus status);

inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kObjectiveTol = 1e-9;

struct SolveStats {
  std::size_t iterations = 0;
  std::size_t nodes = 0;
  std::chrono::microseconds wall_time{0};
};

struct Solution {
  SolveStatus status = SolveStatus::kInfeasible;
  // Original sense (un-negated). Meaningful for kOptimal, and for kLimit when
  // an incumbent exists.
  double objective = 0.0;
  // Variable order; empty when no point is available.
  std::vector<std::pair<std::string, double>> assignment;
  // Row multipliers of the minimization form, one per constraint; populated
  // by solve_lp on kOptimal.
  std::vector<double> row_duals;
  SolveStats stats;

  [[nodiscard]] std::optional<double> value(std::string_view name) const;
};

struct LpBudget {
  std::size_t max_iterations = 100000;
};

struct MilpBudget {
  std::size_t max_nodes = 100000;
  std::size_t max_lp_iterations = 100000;
};

[[nodiscard]] Solution solve_lp(const StandardFormLP& lp, LpBudget budget = {});

// `integer` is indexed by column; an empty vector means a pure LP.
[[nodiscard]] Solution solve_milp(const StandardFormLP& lp, const std::vector<bool>& integer,
                                  MilpBudget budget = {});
[[nodiscard]] Solution solve_milp(const LinearModel& model, MilpBudget budget = {});

// Largest violation of any row or column bound by `x`.
[[nodiscard]] double max_violation(const StandardFormLP& lp, const std::vector<double>& x);

}  // namespace eor
