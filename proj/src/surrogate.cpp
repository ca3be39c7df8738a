#include "fgp/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "fgp/io.hpp"
#include "fgp/rng.hpp"

namespace fgp {

namespace {

constexpr double kOverflowLimit = 1e12;

void check_magnitude(const std::vector<double>& v, const char* where) {
  for (double x : v) {
    if (!std::isfinite(x) || std::abs(x) > kOverflowLimit) {
      throw Error("NumericOverflow", std::string(where) + " message exceeded 1e12");
    }
  }
}

// Sums message vectors in a canonical order (lexicographically sorted), so
// the result is bitwise independent of how nodes were labeled.
std::vector<double> pool_messages(std::vector<std::vector<double>> incoming, std::size_t k,
                                  Aggregation agg) {
  if (incoming.empty()) return std::vector<double>(k, 0.0);
  switch (agg) {
    case Aggregation::Sum:
    case Aggregation::Mean: {
      std::sort(incoming.begin(), incoming.end());
      std::vector<double> pooled(k, 0.0);
      for (const auto& msg : incoming)
        for (std::size_t j = 0; j < k; ++j) pooled[j] += msg[j];
      if (agg == Aggregation::Mean) {
        const double inv = 1.0 / static_cast<double>(incoming.size());
        for (double& x : pooled) x *= inv;
      }
      return pooled;
    }
    case Aggregation::Max: {
      std::vector<double> pooled = incoming.front();
      for (std::size_t m = 1; m < incoming.size(); ++m)
        for (std::size_t j = 0; j < k; ++j) pooled[j] = std::max(pooled[j], incoming[m][j]);
      return pooled;
    }
  }
  throw Error("InvalidHyperparameter", "unknown aggregation");
}

std::vector<double> embedding_row(const Matrix& h, std::size_t node) {
  std::vector<double> row(h.cols);
  for (std::size_t j = 0; j < h.cols; ++j) row[j] = h.at(node, j);
  return row;
}

}  // namespace

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Sum: return "sum";
    case Aggregation::Mean: return "mean";
    case Aggregation::Max: return "max";
  }
  return "sum";
}

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "sum") return Aggregation::Sum;
  if (s == "mean") return Aggregation::Mean;
  if (s == "max") return Aggregation::Max;
  throw Error("InvalidHyperparameter", "aggregation must be sum, mean or max, got '" + s + "'");
}

SurrogateParams init_params(const OpVocabulary& vocab, std::size_t k, double sigma, double alpha,
                            std::uint64_t seed) {
  if (k < 1) throw Error("InvalidHyperparameter", "k must be >= 1");
  if (!(sigma > 0.0)) throw Error("InvalidHyperparameter", "sigma must be positive");
  if (alpha < 0.0 || alpha > 1.0) throw Error("InvalidHyperparameter", "alpha must be in [0, 1]");

  SurrogateParams p;
  p.alpha = alpha;
  p.sigma = sigma;
  p.k = k;
  p.seed = seed;

  Rng rng(seed);
  p.op_projection = Matrix(vocab.size(), k);
  for (double& x : p.op_projection.values) x = rng.normal(0.0, sigma);
  p.message_projection = Matrix(2 * k, k);
  for (double& x : p.message_projection.values) x = rng.normal(0.0, sigma);
  p.source_message.resize(k);
  for (double& x : p.source_message) x = rng.uniform();
  return p;
}

Matrix node_embeddings(const ArchGraph& graph, const SurrogateParams& params) {
  if (graph.features.cols != params.vocab_size()) {
    throw Error("ShapeMismatch", "graph has " + std::to_string(graph.features.cols) +
                                     " ops, params expect " +
                                     std::to_string(params.vocab_size()));
  }
  return matmul(graph.features, params.op_projection);
}

std::vector<double> convert(const std::vector<double>& pooled, const std::vector<double>& h,
                            const SurrogateParams& params) {
  const std::size_t k = params.k;
  if (pooled.size() != k || h.size() != k)
    throw Error("ShapeMismatch", "convert expects vectors of length k");

  std::vector<double> out(k);
  const Matrix& w = params.message_projection;
  for (std::size_t j = 0; j < k; ++j) {
    double proj = 0.0;
    for (std::size_t i = 0; i < k; ++i) proj += h[i] * w.at(i, j);
    for (std::size_t i = 0; i < k; ++i) proj += pooled[i] * w.at(k + i, j);
    out[j] = params.alpha * pooled[j] + (1.0 - params.alpha) * std::max(0.0, proj);
  }
  return out;
}

MessageState forward_pass(const ArchGraph& graph, const TopoPartition& topo,
                          const SurrogateParams& params) {
  const Matrix h = node_embeddings(graph, params);
  MessageState state;
  state.fp.assign(graph.num_nodes(), {});

  for (int v : topo.levels.front()) state.fp[v] = params.source_message;

  for (std::size_t t = 1; t < topo.levels.size(); ++t) {
    for (int v : topo.levels[t]) {
      std::vector<std::vector<double>> incoming;
      for (int u : in_neighbors(graph, v)) incoming.push_back(state.fp[u]);
      auto pooled = pool_messages(std::move(incoming), params.k, params.aggregation);
      state.fp[v] = convert(pooled, embedding_row(h, v), params);
      check_magnitude(state.fp[v], "forward");
    }
  }
  return state;
}

MessageState backward_pass(const ArchGraph& graph, const TopoPartition& topo,
                           const SurrogateParams& params, MessageState state) {
  const Matrix h = node_embeddings(graph, params);
  state.bp.assign(graph.num_nodes(), {});

  for (int v : topo.levels.back()) state.bp[v] = state.fp[v];

  for (std::size_t t = topo.levels.size() - 1; t-- > 0;) {
    for (int v : topo.levels[t]) {
      std::vector<std::vector<double>> incoming;
      for (int u : out_neighbors(graph, v)) incoming.push_back(state.bp[u]);
      // A sink below level T pools nothing and converts a zero vector.
      auto pooled = pool_messages(std::move(incoming), params.k, params.aggregation);
      state.bp[v] = convert(pooled, embedding_row(h, v), params);
      check_magnitude(state.bp[v], "backward");
    }
  }
  return state;
}

FlowSurrogate compute_surrogate(const ArchGraph& graph, const SurrogateParams& params) {
  require_valid(graph);
  const TopoPartition topo = assign_topological_order(graph);
  MessageState state = forward_pass(graph, topo, params);
  state = backward_pass(graph, topo, params, std::move(state));

  std::vector<std::vector<double>> roots;
  for (int v : topo.levels.front()) roots.push_back(state.bp[v]);
  FlowSurrogate s;
  s.values = pool_messages(std::move(roots), params.k, Aggregation::Sum);
  check_magnitude(s.values, "surrogate");
  return s;
}

std::vector<FlowSurrogate> batch_surrogates(const std::vector<ArchGraph>& graphs,
                                            const SurrogateParams& params, std::size_t jobs) {
  std::vector<FlowSurrogate> out(graphs.size());
  std::vector<std::string> failures(graphs.size());

  auto worker = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < graphs.size(); i += stride) {
      try {
        out[i] = compute_surrogate(graphs[i], params);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };

  if (jobs <= 1 || graphs.size() < 2) {
    worker(0, 1);
  } else {
    const std::size_t n = std::min<std::size_t>(jobs, graphs.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker, t, n);
    for (auto& th : threads) th.join();
  }

  std::string report;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      if (!report.empty()) report += "; ";
      report += "graph " + std::to_string(i) + ": " + failures[i];
    }
  }
  if (!report.empty()) throw Error("BatchFailure", report);
  return out;
}

void save_surrogates_csv(const std::string& path, const std::vector<std::string>& ids,
                         const std::vector<FlowSurrogate>& surrogates, std::uint64_t seed) {
  if (ids.size() != surrogates.size())
    throw Error("ShapeMismatch", "ids and surrogates differ in length");
  std::ostringstream csv;
  csv << "# seed=" << seed << "\n";
  csv << "id";
  const std::size_t k = surrogates.empty() ? 0 : surrogates.front().values.size();
  for (std::size_t j = 0; j < k; ++j) csv << ",s" << j;
  csv << "\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    csv << ids[i];
    for (double v : surrogates[i].values) csv << "," << format_double(v);
    csv << "\n";
  }
  atomic_write_file(path, csv.str());
}

}  // namespace fgp
