#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgp/archgraph.hpp"
#include "fgp/surrogate.hpp"

namespace fgp {

struct ArchRecord {
  std::string id;
  ArchGraph graph;
  std::optional<double> performance;  // y
  std::optional<double> proxy;        // c
  std::optional<FlowSurrogate> surrogate;
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::size_t> validation;
};

// Immutable after load/generation. Ground-truth performance is read through
// performance(), which counts reads: pre-training asserts the counter never
// moves while it runs.
struct BenchDataset {
  OpVocabulary vocab;
  std::vector<ArchRecord> records;
  Splits splits;
  std::optional<std::size_t> surrogate_dim;  // header k, set once surrogates exist
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return records.size(); }

  double performance(std::size_t index) const;
  double proxy(std::size_t index) const;
  std::size_t performance_reads() const { return performance_reads_; }

 private:
  mutable std::size_t performance_reads_ = 0;
};

enum class SpaceFamily { Cell201Like, Cell101Like };

std::string to_string(SpaceFamily f);
SpaceFamily space_family_from_string(const std::string& s);

// Sampling bounds for a cell search space: fixed input/output terminals,
// random intermediate ops, random forward edges.
struct SpaceSpec {
  SpaceFamily family = SpaceFamily::Cell201Like;
  std::size_t min_nodes = 4;
  std::size_t max_nodes = 8;
  std::size_t max_edges = 16;
  OpVocabulary vocab;
  std::string input_op = "input";
  std::string output_op = "output";

  static SpaceSpec cell201_like();
  static SpaceSpec cell101_like();

  std::size_t input_op_index() const;
  std::size_t output_op_index() const;
};

void validate_spec(const SpaceSpec& spec);

// Canonical representative of a graph under level-respecting relabelings:
// levels are laid out consecutively, nodes within a level sorted by op, and
// ties among same-op nodes resolved by exhaustively minimizing the edge
// list (small groups; capped with a deterministic structural fallback).
struct CanonicalForm {
  std::vector<std::size_t> node_ops;
  std::vector<Edge> edges;

  bool operator==(const CanonicalForm&) const = default;
  bool operator<(const CanonicalForm& o) const;
};

CanonicalForm canonical_form(const ArchGraph& graph);
std::string canonical_key(const ArchGraph& graph);

// True when every node lies on some path from an in-degree-0 node to an
// out-degree-0 node.
bool all_nodes_on_io_path(const ArchGraph& graph);

// Structural membership check used by generation and mutation.
bool in_space(const ArchGraph& graph, const SpaceSpec& spec);

// Seeded sampler; emits `count` unique (by canonical form) valid graphs.
// Throws SpaceExhausted when deduplication cannot reach the count.
BenchDataset generate_space(const SpaceSpec& spec, std::size_t count, std::uint64_t seed);

// Deterministic stand-in for a trained-accuracy table. The noiseless part is
// a weighted sum of ops on the heaviest input->output path plus a
// depth/width interaction; noise is seeded per graph through the canonical
// form, so isomorphic graphs score identically. The proxy adds independent
// noise on top of the performance, keeping the two rank-correlated.
struct OracleConfig {
  std::map<std::string, double> op_weights = {
      {"input", 0.0},  {"output", 0.0},     {"conv3x3", 1.0}, {"conv1x1", 0.7},
      {"skip", 0.35},  {"avgpool3x3", 0.15}, {"none", -0.4},
  };
  double unknown_op_weight_span = 1.0;  // unknown ops hash into [0, span)
  double depth_width_coeff = 0.5;
  double noise_std = 0.11;        // 2% of the default space's noiseless span (5.5)
  double proxy_noise_std = 0.55;  // keeps Spearman(proxy, perf) near 0.83
};

struct OracleScores {
  double performance = 0.0;
  double proxy = 0.0;
};

OracleScores synthetic_oracle(const ArchGraph& graph, const OpVocabulary& vocab,
                              const OracleConfig& config, std::uint64_t oracle_seed);

// Noiseless component only (exposed for calibration and tests).
double oracle_noiseless(const ArchGraph& graph, const OpVocabulary& vocab,
                        const OracleConfig& config);

// Fills performance and proxy for every record.
void apply_oracle(BenchDataset& dataset, const OracleConfig& config, std::uint64_t oracle_seed);

// Seeded shuffle; train/test by train_frac (round to nearest), then
// val_count validation records carved from the test side.
void make_splits(BenchDataset& dataset, double train_frac, std::size_t val_count,
                 std::uint64_t seed);

// JSONL: header line {"schema", "vocab", "k"}, then one record per line
// {"id", "nodes", "edges", "performance", "proxy", "surrogate"}.
void save_jsonl(const BenchDataset& dataset, const std::string& path);
BenchDataset load_jsonl(const std::string& path);

}  // namespace fgp
