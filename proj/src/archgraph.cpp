#include "fgp/archgraph.hpp"

#include <algorithm>
#include <set>

namespace fgp {

OpVocabulary::OpVocabulary(std::vector<std::string> ops) : ops_(std::move(ops)) {
  if (ops_.empty()) throw Error("InvalidVocabulary", "vocabulary must be non-empty");
  std::set<std::string> seen;
  for (const auto& op : ops_) {
    if (op.empty()) throw Error("InvalidVocabulary", "empty operation name");
    if (!seen.insert(op).second)
      throw Error("InvalidVocabulary", "duplicate operation name '" + op + "'");
  }
}

std::optional<std::size_t> OpVocabulary::index_of(std::string_view op) const {
  for (std::size_t i = 0; i < ops_.size(); ++i)
    if (ops_[i] == op) return i;
  return std::nullopt;
}

std::size_t ArchGraph::node_op(std::size_t i) const {
  for (std::size_t j = 0; j < features.cols; ++j)
    if (features.at(i, j) == 1.0) return j;
  throw Error("BadFeatureRow", "node " + std::to_string(i) + " has no one-hot entry");
}

ArchGraph ArchGraph::from_ops(std::size_t vocab_size, const std::vector<std::size_t>& node_ops,
                              std::vector<Edge> edges) {
  ArchGraph g;
  g.features = Matrix(node_ops.size(), vocab_size);
  for (std::size_t i = 0; i < node_ops.size(); ++i) {
    if (node_ops[i] >= vocab_size)
      throw Error("UnknownOp", "op index " + std::to_string(node_ops[i]) + " out of range");
    g.features.at(i, node_ops[i]) = 1.0;
  }
  g.edges = std::move(edges);
  return g;
}

std::size_t TopoPartition::level_of(int node) const {
  for (std::size_t t = 0; t < levels.size(); ++t)
    for (int v : levels[t])
      if (v == node) return t + 1;
  return 0;
}

namespace {

std::optional<Error> check_edges(const ArchGraph& g) {
  const int n = static_cast<int>(g.num_nodes());
  std::set<Edge> seen;
  for (const Edge& e : g.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      return Error("DanglingEdgeIndex", "edge (" + std::to_string(e.src) + "," +
                                            std::to_string(e.dst) + ") references node >= " +
                                            std::to_string(n));
    }
    if (e.src == e.dst) {
      return Error("CyclicGraph", "self-loop at node " + std::to_string(e.src));
    }
    if (!seen.insert(e).second) {
      return Error("DuplicateEdge",
                   "edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ") repeated");
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Error> validate(const ArchGraph& g) {
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    int ones = 0;
    for (std::size_t j = 0; j < g.features.cols; ++j) {
      const double v = g.features.at(i, j);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        return Error("BadFeatureRow",
                     "node " + std::to_string(i) + " has non-binary feature entry");
      }
    }
    if (ones != 1) {
      return Error("BadFeatureRow", "node " + std::to_string(i) + " has " +
                                        std::to_string(ones) + " ones, expected exactly 1");
    }
  }
  if (auto err = check_edges(g)) return err;
  if (!g.bidirectional) {
    // Kahn peeling doubles as the cycle check.
    try {
      assign_topological_order(g);
    } catch (const Error& e) {
      return e;
    }
  }
  return std::nullopt;
}

void require_valid(const ArchGraph& g) {
  if (auto err = validate(g)) throw *err;
}

TopoPartition assign_topological_order(const ArchGraph& g) {
  const int n = static_cast<int>(g.num_nodes());
  std::vector<int> in_degree(n, 0);
  std::vector<std::vector<int>> out(n);
  for (const Edge& e : g.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      throw Error("DanglingEdgeIndex", "edge (" + std::to_string(e.src) + "," +
                                           std::to_string(e.dst) + ") out of range");
    }
    ++in_degree[e.dst];
    out[e.src].push_back(e.dst);
  }

  TopoPartition topo;
  std::vector<bool> assigned(n, false);
  int remaining = n;
  while (remaining > 0) {
    std::vector<int> level;
    for (int i = 0; i < n; ++i) {
      if (!assigned[i] && in_degree[i] == 0) level.push_back(i);
    }
    if (level.empty()) {
      throw Error("CyclicGraph", "peeling stalled with " + std::to_string(remaining) +
                                     " nodes unassigned");
    }
    for (int i : level) {
      assigned[i] = true;
      for (int j : out[i]) --in_degree[j];
    }
    remaining -= static_cast<int>(level.size());
    topo.levels.push_back(std::move(level));
  }
  return topo;
}

std::vector<int> in_neighbors(const ArchGraph& g, int node) {
  if (node < 0 || node >= static_cast<int>(g.num_nodes()))
    throw Error("DanglingEdgeIndex", "node " + std::to_string(node) + " out of range");
  std::vector<int> result;
  for (const Edge& e : g.edges)
    if (e.dst == node) result.push_back(e.src);
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<int> out_neighbors(const ArchGraph& g, int node) {
  if (node < 0 || node >= static_cast<int>(g.num_nodes()))
    throw Error("DanglingEdgeIndex", "node " + std::to_string(node) + " out of range");
  std::vector<int> result;
  for (const Edge& e : g.edges)
    if (e.src == node) result.push_back(e.dst);
  std::sort(result.begin(), result.end());
  return result;
}

ArchGraph undirect(const ArchGraph& g) {
  ArchGraph u;
  u.features = g.features;
  u.bidirectional = true;
  std::set<Edge> edge_set;
  for (const Edge& e : g.edges) {
    edge_set.insert(e);
    edge_set.insert(Edge{e.dst, e.src});
  }
  u.edges.assign(edge_set.begin(), edge_set.end());
  return u;
}

}  // namespace fgp
