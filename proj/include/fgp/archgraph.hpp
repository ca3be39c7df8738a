#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fgp/error.hpp"
#include "fgp/matrix.hpp"

namespace fgp {

// Ordered operation alphabet. The index of an op is stable for the
// vocabulary's lifetime and is what one-hot feature columns refer to.
class OpVocabulary {
 public:
  OpVocabulary() = default;
  explicit OpVocabulary(std::vector<std::string> ops);

  std::size_t size() const { return ops_.size(); }
  const std::string& name(std::size_t index) const { return ops_.at(index); }
  const std::vector<std::string>& names() const { return ops_; }
  std::optional<std::size_t> index_of(std::string_view op) const;

  bool operator==(const OpVocabulary& other) const { return ops_ == other.ops_; }

 private:
  std::vector<std::string> ops_;
};

struct Edge {
  int src = 0;
  int dst = 0;
  bool operator==(const Edge&) const = default;
  bool operator<(const Edge& o) const {
    return src != o.src ? src < o.src : dst < o.dst;
  }
};

// A neural architecture as a directed acyclic operation graph: one-hot
// operation features per node plus directed edges src -> dst.
//
// `bidirectional` marks a graph produced by undirect(); such graphs contain
// reverse edges by construction and are exempt from the acyclicity check.
struct ArchGraph {
  Matrix features;           // |V| x |O|, one-hot rows
  std::vector<Edge> edges;
  bool bidirectional = false;

  std::size_t num_nodes() const { return features.rows; }

  // Op index of node i (position of the 1 in its feature row).
  std::size_t node_op(std::size_t i) const;

  // Builds the one-hot feature matrix from per-node op indices.
  static ArchGraph from_ops(std::size_t vocab_size, const std::vector<std::size_t>& node_ops,
                            std::vector<Edge> edges);
};

// Disjoint topological levels V^(1)..V^(T) obtained by iteratively peeling
// in-degree-0 nodes.
struct TopoPartition {
  std::vector<std::vector<int>> levels;  // node indices, ascending within a level

  std::size_t depth() const { return levels.size(); }
  // Level of node i, 1-based; 0 if absent (never happens for valid input).
  std::size_t level_of(int node) const;
};

// std::nullopt when every invariant holds; otherwise the first violation
// found (BadFeatureRow, DanglingEdgeIndex, DuplicateEdge, CyclicGraph).
std::optional<Error> validate(const ArchGraph& graph);

// Throwing form of validate().
void require_valid(const ArchGraph& graph);

// Level partition by iterative peeling; throws CyclicGraph if peeling
// stalls before exhausting the nodes.
TopoPartition assign_topological_order(const ArchGraph& graph);

// N^(i): sources of edges arriving at i. Ascending order.
std::vector<int> in_neighbors(const ArchGraph& graph, int node);
// K^(i): destinations of edges leaving i. Ascending order.
std::vector<int> out_neighbors(const ArchGraph& graph, int node);

// Adds the reverse of every edge; features unchanged. Result is flagged
// bidirectional and its edge list is sorted and deduplicated, which makes
// the operation idempotent.
ArchGraph undirect(const ArchGraph& graph);

}  // namespace fgp
