// SPDX-License-Identifier: Apache-2.0

#include "eor/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <utility>

namespace eor {

std::size_t graph_size(const BipartiteGraph& g) {
  return g.edges.size() * kEdgeAttrs + g.constraint_vertices.size() * kConstraintAttrs +
         g.variable_vertices.size() * kVariableAttrs;
}

bool attrs_match(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

std::size_t EditBreakdown::total_cost() const {
  return constraint_insert * kConstraintAttrs + constraint_delete * kConstraintAttrs +
         constraint_substituted_attrs + variable_substituted_attrs +
         variable_insert * kVariableAttrs + variable_delete * kVariableAttrs +
         edge_insert * kEdgeAttrs + edge_delete * kEdgeAttrs + edge_substituted;
}

BipartiteGraph build_graph(const StandardFormLP& lp) {
  BipartiteGraph g;
  g.constraint_vertices.reserve(lp.m);
  for (std::size_t i = 0; i < lp.m; ++i) {
    g.constraint_vertices.push_back(ConstraintVertex{lp.con_names[i], lp.l_s[i], lp.u_s[i]});
  }
  g.variable_vertices.reserve(lp.n);
  for (std::size_t j = 0; j < lp.n; ++j) {
    g.variable_vertices.push_back(VariableVertex{lp.var_names[j], lp.l_x[j], lp.u_x[j], lp.c[j]});
  }
  for (std::size_t i = 0; i < lp.m; ++i) {
    for (const auto& e : lp.rows[i]) {
      if (e.value != 0.0) g.edges.push_back(GraphEdge{i, e.col, e.value});
    }
  }
  return g;
}

namespace {

std::size_t mismatches(const ConstraintVertex& a, const ConstraintVertex& b) {
  return static_cast<std::size_t>(!attrs_match(a.lower, b.lower)) +
         static_cast<std::size_t>(!attrs_match(a.upper, b.upper));
}

std::size_t mismatches(const VariableVertex& a, const VariableVertex& b) {
  return static_cast<std::size_t>(!attrs_match(a.lower, b.lower)) +
         static_cast<std::size_t>(!attrs_match(a.upper, b.upper)) +
         static_cast<std::size_t>(!attrs_match(a.cost, b.cost));
}

using EdgeKey = std::pair<std::size_t, std::size_t>;

std::map<EdgeKey, double> edge_map(const BipartiteGraph& g) {
  std::map<EdgeKey, double> out;
  for (const auto& e : g.edges) {
    if (!out.emplace(EdgeKey{e.constraint, e.variable}, e.coeff).second) {
      throw GraphError("duplicate edge between constraint '" +
                       g.constraint_vertices[e.constraint].name + "' and variable '" +
                       g.variable_vertices[e.variable].name + "'");
    }
  }
  return out;
}

double normalized(std::size_t ged, std::size_t a, std::size_t b) {
  const std::size_t denom = std::max(a, b);
  return denom == 0 ? 0.0 : static_cast<double>(ged) / static_cast<double>(denom);
}

}  // namespace

GedReport evaluate_matching(const BipartiteGraph& updated, const BipartiteGraph& original,
                            const VertexMatching& matching) {
  GedReport r;
  r.matching = matching;
  r.size_updated = graph_size(updated);
  r.size_original = graph_size(original);
  auto& b = r.breakdown;

  if (matching.constraints.size() != updated.constraint_vertices.size() ||
      matching.variables.size() != updated.variable_vertices.size()) {
    throw GraphError("matching does not cover the updated graph");
  }

  std::vector<bool> con_used(original.constraint_vertices.size(), false);
  std::vector<bool> var_used(original.variable_vertices.size(), false);
  for (std::size_t i = 0; i < matching.constraints.size(); ++i) {
    if (const auto& m = matching.constraints[i]) {
      if (*m >= con_used.size() || con_used[*m]) throw GraphError("matching is not injective");
      con_used[*m] = true;
      b.constraint_substituted_attrs +=
          mismatches(updated.constraint_vertices[i], original.constraint_vertices[*m]);
    } else {
      ++b.constraint_insert;
    }
  }
  for (std::size_t j = 0; j < matching.variables.size(); ++j) {
    if (const auto& m = matching.variables[j]) {
      if (*m >= var_used.size() || var_used[*m]) throw GraphError("matching is not injective");
      var_used[*m] = true;
      b.variable_substituted_attrs +=
          mismatches(updated.variable_vertices[j], original.variable_vertices[*m]);
    } else {
      ++b.variable_insert;
    }
  }
  b.constraint_delete = static_cast<std::size_t>(std::count(con_used.begin(), con_used.end(), false));
  b.variable_delete = static_cast<std::size_t>(std::count(var_used.begin(), var_used.end(), false));

  const auto original_edges = edge_map(original);
  std::map<EdgeKey, bool> covered;
  for (const auto& [key, _] : original_edges) covered[key] = false;
  for (const auto& [key, coeff] : edge_map(updated)) {
    const auto& mc = matching.constraints[key.first];
    const auto& mv = matching.variables[key.second];
    if (mc && mv) {
      const auto it = original_edges.find(EdgeKey{*mc, *mv});
      if (it != original_edges.end()) {
        covered[it->first] = true;
        if (!attrs_match(coeff, it->second)) ++b.edge_substituted;
        continue;
      }
    }
    ++b.edge_insert;
  }
  for (const auto& [_, hit] : covered) {
    if (!hit) ++b.edge_delete;
  }

  r.ged = b.total_cost();
  r.nged = normalized(r.ged, r.size_updated, r.size_original);
  return r;
}

GedReport ged_named(const BipartiteGraph& updated, const BipartiteGraph& original) {
  auto index = [](const auto& vertices, const char* kind) {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      if (!out.emplace(vertices[i].name, i).second) {
        throw GraphError(std::string("duplicate ") + kind + " name '" + vertices[i].name + "'");
      }
    }
    return out;
  };
  const auto orig_cons = index(original.constraint_vertices, "constraint");
  const auto orig_vars = index(original.variable_vertices, "variable");
  (void)index(updated.constraint_vertices, "constraint");
  (void)index(updated.variable_vertices, "variable");

  VertexMatching matching;
  for (const auto& v : updated.constraint_vertices) {
    const auto it = orig_cons.find(v.name);
    matching.constraints.push_back(it == orig_cons.end() ? std::nullopt
                                                         : std::optional<std::size_t>(it->second));
  }
  for (const auto& v : updated.variable_vertices) {
    const auto it = orig_vars.find(v.name);
    matching.variables.push_back(it == orig_vars.end() ? std::nullopt
                                                       : std::optional<std::size_t>(it->second));
  }
  return evaluate_matching(updated, original, matching);
}

namespace {

// Depth-first branch-and-bound over injective partial matchings. Updated
// vertices are assigned in a fixed order (constraints first, then
// variables); the cost of an edge is charged as soon as both of its endpoints
// are assigned, so the accumulated cost is exact for the decided part.
class ExactSearch {
 public:
  ExactSearch(const BipartiteGraph& updated, const BipartiteGraph& original)
      : u_(updated), o_(original) {
    nuc_ = u_.constraint_vertices.size();
    nuv_ = u_.variable_vertices.size();
    noc_ = o_.constraint_vertices.size();
    nov_ = o_.variable_vertices.size();

    u_adj_.assign(nuc_, std::vector<std::optional<double>>(nuv_));
    for (const auto& e : u_.edges) u_adj_[e.constraint][e.variable] = e.coeff;
    o_adj_.assign(noc_, std::vector<std::optional<double>>(nov_));
    for (const auto& e : o_.edges) o_adj_[e.constraint][e.variable] = e.coeff;

    con_assign_.assign(nuc_, std::nullopt);
    var_assign_.assign(nuv_, std::nullopt);
    con_taken_.assign(noc_, false);
    var_taken_.assign(nov_, false);

    // Trivial upper bound: delete everything, insert everything.
    best_cost_ = graph_size(u_) + graph_size(o_);
    best_.constraints.assign(nuc_, std::nullopt);
    best_.variables.assign(nuv_, std::nullopt);
  }

  std::pair<std::size_t, VertexMatching> run() {
    descend(0, 0);
    return {best_cost_, best_};
  }

 private:
  // Lower bound on the cost still to come for vertices not yet assigned.
  [[nodiscard]] std::size_t remaining_bound(std::size_t step) const {
    std::size_t bound = 0;
    std::size_t free_oc = 0;
    std::size_t free_ov = 0;
    for (std::size_t k = 0; k < noc_; ++k) free_oc += con_taken_[k] ? 0 : 1;
    for (std::size_t k = 0; k < nov_; ++k) free_ov += var_taken_[k] ? 0 : 1;

    const std::size_t rem_uc = step < nuc_ ? nuc_ - step : 0;
    const std::size_t rem_uv = step < nuc_ ? nuv_ : nuv_ - (step - nuc_);

    for (std::size_t i = (step < nuc_ ? step : nuc_); i < nuc_; ++i) {
      std::size_t best = kConstraintAttrs;
      for (std::size_t k = 0; k < noc_; ++k) {
        if (!con_taken_[k]) best = std::min(best, mismatches(u_.constraint_vertices[i], o_.constraint_vertices[k]));
      }
      bound += best;
    }
    for (std::size_t j = (step < nuc_ ? 0 : step - nuc_); j < nuv_; ++j) {
      std::size_t best = kVariableAttrs;
      for (std::size_t k = 0; k < nov_; ++k) {
        if (!var_taken_[k]) best = std::min(best, mismatches(u_.variable_vertices[j], o_.variable_vertices[k]));
      }
      bound += best;
    }
    // Original vertices that cannot all be matched must be deleted.
    if (free_oc > rem_uc) bound += (free_oc - rem_uc) * kConstraintAttrs;
    if (free_ov > rem_uv) bound += (free_ov - rem_uv) * kVariableAttrs;
    return bound;
  }

  // Edge cost incurred when updated variable `j` is assigned (all constraints
  // are already decided by then). Original edges whose endpoints are both
  // matched but have no counterpart are deletions; updated edges without a
  // counterpart are insertions. Edges touching an unmatched original vertex
  // are settled at the end.
  [[nodiscard]] std::size_t edge_cost_for_variable(std::size_t j) const {
    std::size_t cost = 0;
    const auto& mv = var_assign_[j];
    for (std::size_t i = 0; i < nuc_; ++i) {
      const auto& ue = u_adj_[i][j];
      const auto& mc = con_assign_[i];
      std::optional<double> oe;
      if (mc && mv) oe = o_adj_[*mc][*mv];
      if (ue && oe) {
        cost += attrs_match(*ue, *oe) ? 0 : 1;
      } else if (ue || oe) {
        cost += 1;
      }
    }
    return cost;
  }

  // Original edges incident to an original vertex nobody matched.
  [[nodiscard]] std::size_t orphan_edge_cost() const {
    std::size_t cost = 0;
    for (std::size_t k = 0; k < noc_; ++k) {
      for (std::size_t l = 0; l < nov_; ++l) {
        if (o_adj_[k][l] && (!con_taken_[k] || !var_taken_[l])) ++cost;
      }
    }
    return cost;
  }

  void descend(std::size_t step, std::size_t cost) {
    if (cost + remaining_bound(step) >= best_cost_) return;
    if (step == nuc_ + nuv_) {
      std::size_t total = cost + orphan_edge_cost();
      for (std::size_t k = 0; k < noc_; ++k) total += con_taken_[k] ? 0 : kConstraintAttrs;
      for (std::size_t l = 0; l < nov_; ++l) total += var_taken_[l] ? 0 : kVariableAttrs;
      if (total < best_cost_) {
        best_cost_ = total;
        best_.constraints = con_assign_;
        best_.variables = var_assign_;
      }
      return;
    }

    if (step < nuc_) {
      const std::size_t i = step;
      std::vector<std::pair<std::size_t, std::optional<std::size_t>>> options;
      for (std::size_t k = 0; k < noc_; ++k) {
        if (!con_taken_[k]) {
          options.emplace_back(mismatches(u_.constraint_vertices[i], o_.constraint_vertices[k]), k);
        }
      }
      options.emplace_back(kConstraintAttrs, std::nullopt);
      std::stable_sort(options.begin(), options.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [c, k] : options) {
        con_assign_[i] = k;
        if (k) con_taken_[*k] = true;
        descend(step + 1, cost + c);
        if (k) con_taken_[*k] = false;
        con_assign_[i] = std::nullopt;
      }
      return;
    }

    const std::size_t j = step - nuc_;
    std::vector<std::pair<std::size_t, std::optional<std::size_t>>> options;
    for (std::size_t l = 0; l < nov_; ++l) {
      if (!var_taken_[l]) {
        options.emplace_back(mismatches(u_.variable_vertices[j], o_.variable_vertices[l]), l);
      }
    }
    options.emplace_back(kVariableAttrs, std::nullopt);
    std::stable_sort(options.begin(), options.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [c, l] : options) {
      var_assign_[j] = l;
      if (l) var_taken_[*l] = true;
      descend(step + 1, cost + c + edge_cost_for_variable(j));
      if (l) var_taken_[*l] = false;
      var_assign_[j] = std::nullopt;
    }
  }

  const BipartiteGraph& u_;
  const BipartiteGraph& o_;
  std::size_t nuc_ = 0, nuv_ = 0, noc_ = 0, nov_ = 0;
  std::vector<std::vector<std::optional<double>>> u_adj_;
  std::vector<std::vector<std::optional<double>>> o_adj_;
  std::vector<std::optional<std::size_t>> con_assign_;
  std::vector<std::optional<std::size_t>> var_assign_;
  std::vector<bool> con_taken_;
  std::vector<bool> var_taken_;
  std::size_t best_cost_ = 0;
  VertexMatching best_;
};

}  // namespace

GedReport ged_exact(const BipartiteGraph& updated, const BipartiteGraph& original,
                    std::size_t size_cap) {
  const std::size_t largest =
      std::max({updated.constraint_vertices.size(), updated.variable_vertices.size(),
                original.constraint_vertices.size(), original.variable_vertices.size()});
  if (largest > size_cap) {
    throw GraphError("exact GED limited to " + std::to_string(size_cap) +
                     " vertices per kind, got " + std::to_string(largest));
  }
  (void)edge_map(updated);
  (void)edge_map(original);

  auto [cost, matching] = ExactSearch(updated, original).run();
  GedReport report = evaluate_matching(updated, original, matching);
  if (report.ged != cost) {
    throw GraphError("internal error: exact search cost " + std::to_string(cost) +
                     " disagrees with matching evaluation " + std::to_string(report.ged));
  }
  return report;
}

GedReport decision_information(const LinearModel& original, const LinearModel& updated) {
  return ged_named(build_graph(to_standard_form(updated)),
                   build_graph(to_standard_form(original)));
}

}  // namespace eor
