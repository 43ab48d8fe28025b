// SPDX-License-Identifier: Apache-2.0

// Attributed bipartite graphs of standard-form LPs and the graph edit
// distance used to score how much a what-if query changed a model.
//
// Constraint vertices carry [lower, upper]; variable vertices carry
// [lower, upper, cost]; every nonzero matrix entry is an edge carrying its
// coefficient. Each edit of one attribute costs 1, so inserting or deleting a
// vertex costs its attribute count and an edge costs 1.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eor/model.hpp"

namespace eor {

struct ConstraintVertex {
  std::string name;
  double lower = -kInf;
  double upper = kInf;
};

struct VariableVertex {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  double cost = 0.0;
};

struct GraphEdge {
  std::size_t constraint = 0;  // index into constraint_vertices
  std::size_t variable = 0;    // index into variable_vertices
  double coeff = 0.0;
};

struct BipartiteGraph {
  std::vector<ConstraintVertex> constraint_vertices;
  std::vector<VariableVertex> variable_vertices;
  std::vector<GraphEdge> edges;
};

inline constexpr std::size_t kConstraintAttrs = 2;
inline constexpr std::size_t kVariableAttrs = 3;
inline constexpr std::size_t kEdgeAttrs = 1;

// Sum of attribute counts over all vertices and edges.
[[nodiscard]] std::size_t graph_size(const BipartiteGraph& g);

// Numeric attribute equality: |a-b| <= 1e-9 * max(1, |a|, |b|), infinities
// equal only to the same-signed infinity.
[[nodiscard]] bool attrs_match(double a, double b);

struct EditBreakdown {
  std::size_t constraint_insert = 0;
  std::size_t constraint_delete = 0;
  std::size_t constraint_substituted_attrs = 0;
  std::size_t variable_substituted_attrs = 0;
  std::size_t variable_insert = 0;
  std::size_t variable_delete = 0;
  std::size_t edge_insert = 0;
  std::size_t edge_delete = 0;
  std::size_t edge_substituted = 0;

  // Breakdown weighted by unit costs.
  [[nodiscard]] std::size_t total_cost() const;

  friend bool operator==(const EditBreakdown&, const EditBreakdown&) = default;
};

// Vertex correspondence: for each updated vertex, the original vertex it is
// matched to, or nullopt when it is inserted. Original vertices absent from
// the range are deleted.
struct VertexMatching {
  std::vector<std::optional<std::size_t>> constraints;
  std::vector<std::optional<std::size_t>> variables;
};

struct GedReport {
  std::size_t ged = 0;
  std::size_t size_original = 0;
  std::size_t size_updated = 0;
  double nged = 0.0;
  EditBreakdown breakdown;
  VertexMatching matching;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[nodiscard]] BipartiteGraph build_graph(const StandardFormLP& lp);

// Edit cost of transforming `original` into `updated` under a fixed matching.
[[nodiscard]] GedReport evaluate_matching(const BipartiteGraph& updated,
                                          const BipartiteGraph& original,
                                          const VertexMatching& matching);

// Vertices matched by (kind, name). Throws GraphError on duplicate names.
[[nodiscard]] GedReport ged_named(const BipartiteGraph& updated, const BipartiteGraph& original);

inline constexpr std::size_t kDefaultExactCap = 8;

// True minimum over all kind-respecting matchings. Throws GraphError when
// either graph has more than `size_cap` vertices of one kind.
[[nodiscard]] GedReport ged_exact(const BipartiteGraph& updated, const BipartiteGraph& original,
                                  std::size_t size_cap = kDefaultExactCap);

// to_standard_form -> build_graph -> ged_named(updated, original).
[[nodiscard]] GedReport decision_information(const LinearModel& original,
                                             const LinearModel& updated);

}  // namespace eor
