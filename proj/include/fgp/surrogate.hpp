#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fgp/archgraph.hpp"
#include "fgp/matrix.hpp"

namespace fgp {

enum class Aggregation { Sum, Mean, Max };

std::string to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

// The shared random apparatus of the flow surrogate, fixed once per
// experiment. All entries are reproducible from (seed, sigma, k, |O|):
// P is drawn row-major from N(0, sigma^2), then W row-major from the same,
// then r from U(0, 1).
struct SurrogateParams {
  Matrix op_projection;               // P: |O| x k
  Matrix message_projection;          // W: 2k x k
  std::vector<double> source_message; // r: k, initial fp-message of order-1 nodes
  double alpha = 0.5;
  double sigma = 0.1;
  std::size_t k = 8;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::Sum;

  std::size_t vocab_size() const { return op_projection.rows; }
};

// k-dimensional summary of an architecture's information flow.
struct FlowSurrogate {
  std::vector<double> values;
};

// Per-node fp/bp message vectors. Pooled intermediates are transient and
// live only inside the passes.
struct MessageState {
  std::vector<std::vector<double>> fp;
  std::vector<std::vector<double>> bp;
};

SurrogateParams init_params(const OpVocabulary& vocab, std::size_t k, double sigma, double alpha,
                            std::uint64_t seed);

// H = X * P; row i is the embedding of node i. Nodes sharing an op share a row.
Matrix node_embeddings(const ArchGraph& graph, const SurrogateParams& params);

// f = alpha * m + (1 - alpha) * ReLU([h || m] W). Concatenation order is
// h first, then m.
std::vector<double> convert(const std::vector<double>& pooled, const std::vector<double>& h,
                            const SurrogateParams& params);

// fp-message propagation in level order. Order-1 nodes carry r unconverted;
// every later node pools its in-neighbors' messages and converts.
MessageState forward_pass(const ArchGraph& graph, const TopoPartition& topo,
                          const SurrogateParams& params);

// bp-message propagation in reverse level order, seeded from the forward
// state: order-T nodes keep b = f unconverted; earlier nodes pool over
// out-neighbors and convert. Nodes below level T with no outgoing edges
// pool a zero vector.
MessageState backward_pass(const ArchGraph& graph, const TopoPartition& topo,
                           const SurrogateParams& params, MessageState state);

// Full pipeline: topological order, forward pass, backward pass, then the
// sum of order-1 bp-messages.
FlowSurrogate compute_surrogate(const ArchGraph& graph, const SurrogateParams& params);

// Elementwise equal to mapping compute_surrogate over graphs; jobs > 1 fans
// the pure per-graph work across threads. Failures are collected and
// reported with their graph indices.
std::vector<FlowSurrogate> batch_surrogates(const std::vector<ArchGraph>& graphs,
                                            const SurrogateParams& params, std::size_t jobs = 1);

// CSV with one row per architecture: id, k values. Writes atomically.
void save_surrogates_csv(const std::string& path, const std::vector<std::string>& ids,
                         const std::vector<FlowSurrogate>& surrogates, std::uint64_t seed);

}  // namespace fgp
