#include "fgp/benchdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fgp/io.hpp"
#include "fgp/rng.hpp"

namespace fgp {

double BenchDataset::performance(std::size_t index) const {
  ++performance_reads_;
  const auto& p = records.at(index).performance;
  if (!p) throw Error("MissingPerformance", "record " + records.at(index).id + " is unlabeled");
  return *p;
}

double BenchDataset::proxy(std::size_t index) const {
  const auto& c = records.at(index).proxy;
  if (!c) throw Error("MissingProxyScores", "record " + records.at(index).id + " has no proxy");
  return *c;
}

std::string to_string(SpaceFamily f) {
  return f == SpaceFamily::Cell201Like ? "cell201-like" : "cell101-like";
}

SpaceFamily space_family_from_string(const std::string& s) {
  if (s == "cell201-like") return SpaceFamily::Cell201Like;
  if (s == "cell101-like") return SpaceFamily::Cell101Like;
  throw Error("ConfigError", "unknown space family '" + s + "'");
}

namespace {

OpVocabulary default_vocab() {
  return OpVocabulary(
      {"input", "output", "conv1x1", "conv3x3", "avgpool3x3", "skip", "none"});
}

}  // namespace

SpaceSpec SpaceSpec::cell201_like() {
  SpaceSpec spec;
  spec.family = SpaceFamily::Cell201Like;
  spec.min_nodes = 4;
  spec.max_nodes = 8;
  spec.max_edges = 16;
  spec.vocab = default_vocab();
  return spec;
}

SpaceSpec SpaceSpec::cell101_like() {
  SpaceSpec spec;
  spec.family = SpaceFamily::Cell101Like;
  spec.min_nodes = 4;
  spec.max_nodes = 7;
  spec.max_edges = 12;
  spec.vocab = default_vocab();
  return spec;
}

std::size_t SpaceSpec::input_op_index() const {
  auto idx = vocab.index_of(input_op);
  if (!idx) throw Error("ConfigError", "vocabulary lacks input op '" + input_op + "'");
  return *idx;
}

std::size_t SpaceSpec::output_op_index() const {
  auto idx = vocab.index_of(output_op);
  if (!idx) throw Error("ConfigError", "vocabulary lacks output op '" + output_op + "'");
  return *idx;
}

void validate_spec(const SpaceSpec& spec) {
  if (spec.min_nodes < 2) throw Error("ConfigError", "min_nodes must be >= 2");
  if (spec.max_nodes < spec.min_nodes) throw Error("ConfigError", "max_nodes < min_nodes");
  if (spec.max_edges + 1 < spec.min_nodes)
    throw Error("ConfigError", "max_edges too small to connect min_nodes");
  spec.input_op_index();
  spec.output_op_index();
  if (spec.vocab.size() < 3)
    throw Error("ConfigError", "vocabulary needs at least one intermediate op");
}

bool CanonicalForm::operator<(const CanonicalForm& o) const {
  if (node_ops != o.node_ops) return node_ops < o.node_ops;
  return edges < o.edges;
}

namespace {

std::vector<Edge> relabeled_edges(const std::vector<Edge>& edges,
                                  const std::vector<int>& new_index) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const Edge& e : edges) out.push_back({new_index[e.src], new_index[e.dst]});
  std::sort(out.begin(), out.end());
  return out;
}

// Deterministic structural signature used when the permutation space is too
// large to enumerate: iterative refinement over (op, sorted neighbor sigs).
std::vector<std::uint64_t> refinement_signatures(const ArchGraph& g,
                                                 const std::vector<std::size_t>& levels) {
  const std::size_t n = g.num_nodes();
  std::vector<std::uint64_t> sig(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t base[2] = {levels[i], g.node_op(i)};
    sig[i] = fnv1a(base, sizeof(base));
  }
  for (std::size_t round = 0; round < n; ++round) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint64_t> in_sigs, out_sigs;
      for (int u : in_neighbors(g, static_cast<int>(i))) in_sigs.push_back(sig[u]);
      for (int u : out_neighbors(g, static_cast<int>(i))) out_sigs.push_back(sig[u]);
      std::sort(in_sigs.begin(), in_sigs.end());
      std::sort(out_sigs.begin(), out_sigs.end());
      std::vector<std::uint64_t> all;
      all.push_back(sig[i]);
      all.insert(all.end(), in_sigs.begin(), in_sigs.end());
      all.push_back(0x5bd1e995u);
      all.insert(all.end(), out_sigs.begin(), out_sigs.end());
      next[i] = fnv1a(all.data(), all.size() * sizeof(std::uint64_t));
    }
    sig = std::move(next);
  }
  return sig;
}

constexpr std::size_t kMaxCanonCombos = 1u << 20;

}  // namespace

CanonicalForm canonical_form(const ArchGraph& g) {
  const std::size_t n = g.num_nodes();
  CanonicalForm best;
  if (n == 0) return best;

  const TopoPartition topo = assign_topological_order(g);
  std::vector<std::size_t> level_of(n, 0);
  for (std::size_t t = 0; t < topo.levels.size(); ++t)
    for (int v : topo.levels[t]) level_of[static_cast<std::size_t>(v)] = t;

  // Per level, nodes sorted by op; same-op runs are permutation groups.
  struct Group {
    std::vector<int> members;   // original node ids
    std::size_t first_position; // new-index slot of the group's first member
  };
  std::vector<Group> groups;
  std::vector<std::size_t> ops_layout;  // canonical op sequence (fixed)
  std::size_t position = 0;
  for (const auto& level : topo.levels) {
    std::vector<int> nodes = level;
    std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
      const auto oa = g.node_op(static_cast<std::size_t>(a));
      const auto ob = g.node_op(static_cast<std::size_t>(b));
      return oa != ob ? oa < ob : a < b;
    });
    std::size_t i = 0;
    while (i < nodes.size()) {
      std::size_t j = i;
      const auto op = g.node_op(static_cast<std::size_t>(nodes[i]));
      while (j < nodes.size() && g.node_op(static_cast<std::size_t>(nodes[j])) == op) ++j;
      groups.push_back({std::vector<int>(nodes.begin() + i, nodes.begin() + j), position + i});
      for (std::size_t p = i; p < j; ++p) ops_layout.push_back(op);
      i = j;
    }
    position += nodes.size();
  }
  best.node_ops = ops_layout;

  std::size_t combos = 1;
  bool overflow = false;
  for (const auto& grp : groups) {
    std::size_t f = 1;
    for (std::size_t i = 2; i <= grp.members.size(); ++i) f *= i;
    if (combos > kMaxCanonCombos / std::max<std::size_t>(f, 1)) {
      overflow = true;
      break;
    }
    combos *= f;
  }

  if (overflow) {
    // Too many interchangeable nodes: order same-op group members by a
    // structural signature instead. Deterministic and isomorphism-invariant
    // up to signature collisions.
    const auto sigs = refinement_signatures(g, level_of);
    std::vector<int> new_index(n, 0);
    for (const auto& grp : groups) {
      std::vector<int> members = grp.members;
      std::sort(members.begin(), members.end(), [&](int a, int b) {
        const auto sa = sigs[static_cast<std::size_t>(a)];
        const auto sb = sigs[static_cast<std::size_t>(b)];
        return sa != sb ? sa < sb : a < b;
      });
      for (std::size_t p = 0; p < members.size(); ++p)
        new_index[static_cast<std::size_t>(members[p])] =
            static_cast<int>(grp.first_position + p);
    }
    best.edges = relabeled_edges(g.edges, new_index);
    return best;
  }

  // Odometer over per-group permutations, keeping the minimal edge list.
  std::vector<std::vector<int>> perms;
  for (const auto& grp : groups) {
    std::vector<int> sorted = grp.members;
    std::sort(sorted.begin(), sorted.end());
    perms.push_back(sorted);
  }
  std::vector<Edge> best_edges;
  bool first = true;
  while (true) {
    std::vector<int> new_index(n, 0);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      for (std::size_t p = 0; p < perms[gi].size(); ++p)
        new_index[static_cast<std::size_t>(perms[gi][p])] =
            static_cast<int>(groups[gi].first_position + p);
    }
    std::vector<Edge> candidate = relabeled_edges(g.edges, new_index);
    if (first || candidate < best_edges) {
      best_edges = std::move(candidate);
      first = false;
    }
    // Advance the odometer.
    std::size_t gi = 0;
    for (; gi < perms.size(); ++gi) {
      if (std::next_permutation(perms[gi].begin(), perms[gi].end())) break;
      // wrapped to sorted order; carry to the next group
    }
    if (gi == perms.size()) break;
  }
  best.edges = std::move(best_edges);
  return best;
}

std::string canonical_key(const ArchGraph& g) {
  const CanonicalForm form = canonical_form(g);
  std::ostringstream key;
  for (std::size_t op : form.node_ops) key << op << ',';
  key << '|';
  for (const Edge& e : form.edges) key << e.src << '>' << e.dst << ',';
  return key.str();
}

bool all_nodes_on_io_path(const ArchGraph& g) {
  const std::size_t n = g.num_nodes();
  if (n == 0) return true;
  std::vector<char> from_source(n, 0), to_sink(n, 0);
  TopoPartition topo;
  try {
    topo = assign_topological_order(g);
  } catch (const Error&) {
    return false;
  }
  std::vector<int> order;
  for (const auto& level : topo.levels)
    for (int v : level) order.push_back(v);

  for (int v : order) {
    auto in = in_neighbors(g, v);
    if (in.empty()) {
      from_source[static_cast<std::size_t>(v)] = 1;
    } else {
      for (int u : in)
        if (from_source[static_cast<std::size_t>(u)]) from_source[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto out = out_neighbors(g, *it);
    if (out.empty()) {
      to_sink[static_cast<std::size_t>(*it)] = 1;
    } else {
      for (int u : out)
        if (to_sink[static_cast<std::size_t>(u)]) to_sink[static_cast<std::size_t>(*it)] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!from_source[i] || !to_sink[i]) return false;
  return true;
}

bool in_space(const ArchGraph& g, const SpaceSpec& spec) {
  if (validate(g)) return false;
  const std::size_t n = g.num_nodes();
  if (n < spec.min_nodes || n > spec.max_nodes) return false;
  if (g.edges.size() > spec.max_edges) return false;
  if (g.features.cols != spec.vocab.size()) return false;
  if (g.node_op(0) != spec.input_op_index()) return false;
  if (g.node_op(n - 1) != spec.output_op_index()) return false;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const std::size_t op = g.node_op(i);
    if (op == spec.input_op_index() || op == spec.output_op_index()) return false;
  }
  return all_nodes_on_io_path(g);
}

namespace {

ArchGraph sample_graph(const SpaceSpec& spec, Rng& rng,
                       const std::vector<std::size_t>& intermediate_ops) {
  const std::size_t n =
      spec.min_nodes + rng.index(spec.max_nodes - spec.min_nodes + 1);
  std::vector<std::size_t> ops(n);
  ops[0] = spec.input_op_index();
  ops[n - 1] = spec.output_op_index();
  for (std::size_t i = 1; i + 1 < n; ++i)
    ops[i] = intermediate_ops[rng.index(intermediate_ops.size())];

  std::set<Edge> edges;
  // Every node gets a parent below it, so everything is reachable from 0.
  for (std::size_t j = 1; j < n; ++j)
    edges.insert({static_cast<int>(rng.index(j)), static_cast<int>(j)});
  // Every non-terminal gets a successor, so everything reaches n-1.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    bool has_out = false;
    for (const Edge& e : edges)
      if (e.src == static_cast<int>(i)) {
        has_out = true;
        break;
      }
    if (!has_out)
      edges.insert({static_cast<int>(i),
                    static_cast<int>(i + 1 + rng.index(n - 1 - i))});
  }
  if (edges.size() < spec.max_edges) {
    const std::size_t budget = spec.max_edges - edges.size();
    const std::size_t extra = rng.index(budget + 1);
    std::size_t added = 0;
    for (std::size_t attempt = 0; attempt < extra * 4 && added < extra; ++attempt) {
      const std::size_t i = rng.index(n - 1);
      const std::size_t j = i + 1 + rng.index(n - 1 - i);
      if (edges.insert({static_cast<int>(i), static_cast<int>(j)}).second) ++added;
    }
  }
  return ArchGraph::from_ops(spec.vocab.size(), ops,
                             std::vector<Edge>(edges.begin(), edges.end()));
}

}  // namespace

BenchDataset generate_space(const SpaceSpec& spec, std::size_t count, std::uint64_t seed) {
  validate_spec(spec);
  if (count < 1) throw Error("ConfigError", "count must be >= 1");

  std::vector<std::size_t> intermediate_ops;
  for (std::size_t i = 0; i < spec.vocab.size(); ++i)
    if (i != spec.input_op_index() && i != spec.output_op_index()) intermediate_ops.push_back(i);

  BenchDataset dataset;
  dataset.vocab = spec.vocab;
  dataset.provenance = {{"generator", "space-sampler/v1"},
                        {"seed", seed},
                        {"family", to_string(spec.family)},
                        {"min_nodes", spec.min_nodes},
                        {"max_nodes", spec.max_nodes},
                        {"max_edges", spec.max_edges}};

  Rng rng(seed);
  std::set<std::string> seen;
  const std::size_t max_attempts = 200 * count + 1000;
  std::size_t attempts = 0;
  while (dataset.records.size() < count) {
    if (++attempts > max_attempts) {
      throw Error("SpaceExhausted", "could not reach " + std::to_string(count) +
                                        " unique graphs after " + std::to_string(attempts - 1) +
                                        " attempts");
    }
    ArchGraph g = sample_graph(spec, rng, intermediate_ops);
    if (g.edges.size() > spec.max_edges) continue;
    if (validate(g)) continue;
    if (!all_nodes_on_io_path(g)) continue;
    if (!seen.insert(canonical_key(g)).second) continue;

    char id[32];
    std::snprintf(id, sizeof(id), "arch-%06zu", dataset.records.size());
    ArchRecord rec;
    rec.id = id;
    rec.graph = std::move(g);
    dataset.records.push_back(std::move(rec));
  }
  return dataset;
}

namespace {

double op_weight(const OpVocabulary& vocab, std::size_t op, const OracleConfig& cfg) {
  const std::string& name = vocab.name(op);
  auto it = cfg.op_weights.find(name);
  if (it != cfg.op_weights.end()) return it->second;
  const std::uint64_t h = fnv1a(name.data(), name.size());
  return cfg.unknown_op_weight_span * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

}  // namespace

double oracle_noiseless(const ArchGraph& g, const OpVocabulary& vocab,
                        const OracleConfig& cfg) {
  const TopoPartition topo = assign_topological_order(g);
  const std::size_t n = g.num_nodes();

  // Heaviest source-to-sink path by op weight.
  std::vector<double> best(n, 0.0);
  for (const auto& level : topo.levels) {
    for (int v : level) {
      const auto in = in_neighbors(g, v);
      double upstream = 0.0;
      if (!in.empty()) {
        upstream = best[static_cast<std::size_t>(in.front())];
        for (int u : in) upstream = std::max(upstream, best[static_cast<std::size_t>(u)]);
      }
      best[static_cast<std::size_t>(v)] =
          upstream + op_weight(vocab, g.node_op(static_cast<std::size_t>(v)), cfg);
    }
  }
  double path_term = 0.0;
  bool any_sink = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (out_neighbors(g, static_cast<int>(i)).empty()) {
      path_term = any_sink ? std::max(path_term, best[i]) : best[i];
      any_sink = true;
    }
  }

  std::size_t max_width = 0;
  for (const auto& level : topo.levels) max_width = std::max(max_width, level.size());
  const double interaction = cfg.depth_width_coeff *
                             static_cast<double>(topo.depth()) *
                             static_cast<double>(max_width) / static_cast<double>(n);
  return path_term + interaction;
}

OracleScores synthetic_oracle(const ArchGraph& g, const OpVocabulary& vocab,
                              const OracleConfig& cfg, std::uint64_t oracle_seed) {
  require_valid(g);
  const std::string key = canonical_key(g);
  Rng rng(fnv1a(key.data(), key.size()) ^ (0x9e3779b97f4a7c15ull * (oracle_seed + 1)));
  OracleScores scores;
  const double noiseless = oracle_noiseless(g, vocab, cfg);
  scores.performance = noiseless + rng.normal(0.0, cfg.noise_std);
  scores.proxy = scores.performance + rng.normal(0.0, cfg.proxy_noise_std);
  return scores;
}

void apply_oracle(BenchDataset& dataset, const OracleConfig& cfg, std::uint64_t oracle_seed) {
  for (ArchRecord& rec : dataset.records) {
    const OracleScores s = synthetic_oracle(rec.graph, dataset.vocab, cfg, oracle_seed);
    rec.performance = s.performance;
    rec.proxy = s.proxy;
  }
}

void make_splits(BenchDataset& dataset, double train_frac, std::size_t val_count,
                 std::uint64_t seed) {
  if (train_frac < 0.0 || train_frac > 1.0)
    throw Error("ConfigError", "train_frac must be in [0, 1]");
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(n)));
  if (n_train > n) throw Error("InsufficientRecords", "train fraction exceeds dataset");
  const std::size_t n_test_initial = n - n_train;
  if (val_count >= n_test_initial && !(val_count == 0 && n_test_initial == 0))
    throw Error("InsufficientRecords",
                "validation count " + std::to_string(val_count) + " must be below test size " +
                    std::to_string(n_test_initial));

  Splits splits;
  splits.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  splits.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                           order.begin() + static_cast<std::ptrdiff_t>(n_train + val_count));
  splits.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + val_count),
                     order.end());
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.validation.begin(), splits.validation.end());
  std::sort(splits.test.begin(), splits.test.end());
  dataset.splits = std::move(splits);
}

namespace {

nlohmann::json record_to_json(const ArchRecord& rec, const OpVocabulary& vocab) {
  nlohmann::json j;
  j["id"] = rec.id;
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < rec.graph.num_nodes(); ++i)
    nodes.push_back(vocab.name(rec.graph.node_op(i)));
  j["nodes"] = nodes;
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : rec.graph.edges) edges.push_back({e.src, e.dst});
  j["edges"] = edges;
  j["performance"] = rec.performance ? nlohmann::json(*rec.performance) : nlohmann::json();
  j["proxy"] = rec.proxy ? nlohmann::json(*rec.proxy) : nlohmann::json();
  j["surrogate"] = rec.surrogate ? nlohmann::json(rec.surrogate->values) : nlohmann::json();
  return j;
}

}  // namespace

void save_jsonl(const BenchDataset& dataset, const std::string& path) {
  std::ostringstream out;
  nlohmann::json header;
  header["schema"] = "arch-dataset/v1";
  header["vocab"] = dataset.vocab.names();
  header["k"] =
      dataset.surrogate_dim ? nlohmann::json(*dataset.surrogate_dim) : nlohmann::json();
  out << header.dump() << "\n";
  for (const ArchRecord& rec : dataset.records)
    out << record_to_json(rec, dataset.vocab).dump() << "\n";
  atomic_write_file(path, out.str());
}

BenchDataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot open '" + path + "'");

  BenchDataset dataset;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line))
    throw Error("SchemaError", "missing header line in '" + path + "'");
  ++line_no;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", "line 1: " + std::string(e.what()));
  }
  if (header.value("schema", "arch-dataset/v1") != "arch-dataset/v1")
    throw Error("SchemaError", "unsupported dataset schema");
  if (!header.contains("vocab")) throw Error("SchemaError", "header lacks 'vocab'");
  dataset.vocab = OpVocabulary(header.at("vocab").get<std::vector<std::string>>());
  if (header.contains("k") && !header.at("k").is_null())
    dataset.surrogate_dim = header.at("k").get<std::size_t>();

  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("ParseError", "line " + std::to_string(line_no) + ": " + e.what());
    }
    ArchRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      const auto nodes = j.at("nodes").get<std::vector<std::string>>();
      std::vector<std::size_t> ops;
      for (const auto& op : nodes) {
        auto idx = dataset.vocab.index_of(op);
        if (!idx)
          throw Error("UnknownOp",
                      "line " + std::to_string(line_no) + ": op '" + op + "' not in vocabulary");
        ops.push_back(*idx);
      }
      std::vector<Edge> edges;
      for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2)
          throw Error("SchemaError", "line " + std::to_string(line_no) + ": bad edge entry");
        edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
      }
      rec.graph = ArchGraph::from_ops(dataset.vocab.size(), ops, std::move(edges));
      if (j.contains("performance") && !j.at("performance").is_null())
        rec.performance = j.at("performance").get<double>();
      if (j.contains("proxy") && !j.at("proxy").is_null())
        rec.proxy = j.at("proxy").get<double>();
      if (j.contains("surrogate") && !j.at("surrogate").is_null()) {
        FlowSurrogate s;
        s.values = j.at("surrogate").get<std::vector<double>>();
        if (dataset.surrogate_dim && s.values.size() != *dataset.surrogate_dim)
          throw Error("SchemaError",
                      "line " + std::to_string(line_no) + ": surrogate length != header k");
        rec.surrogate = std::move(s);
      }
    } catch (const Error&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw Error("SchemaError", "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(rec.id).second)
      throw Error("SchemaError", "line " + std::to_string(line_no) + ": duplicate id " + rec.id);
    dataset.records.push_back(std::move(rec));
  }
  dataset.provenance = {{"source", path}};
  return dataset;
}

}  // namespace fgp
