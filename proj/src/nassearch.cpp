#include "fgp/nassearch.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "fgp/io.hpp"
#include "fgp/rng.hpp"
#include "fgp/training.hpp"

namespace fgp {

double SearchState::best_performance() const {
  double best = -1e300;
  for (const EvaluatedArch& a : pool) best = std::max(best, a.performance);
  return best;
}

namespace {

void append_trace(SearchState& state) {
  SearchTraceRow row;
  row.round = state.round;
  row.pool_size = state.pool.size();
  row.best_performance = state.best_performance();
  row.regret = state.reference_max - row.best_performance;
  state.trace.push_back(row);
}

ArchGraph mutate_once(const ArchGraph& graph, const SpaceSpec& spec, Rng& rng) {
  const std::size_t n = graph.num_nodes();
  std::vector<std::size_t> node_ops(n);
  for (std::size_t i = 0; i < n; ++i) node_ops[i] = graph.node_op(i);

  std::vector<std::size_t> intermediate_ops;
  for (std::size_t i = 0; i < spec.vocab.size(); ++i)
    if (i != spec.input_op_index() && i != spec.output_op_index()) intermediate_ops.push_back(i);

  // Kinds: 0 = op reassignment, 1 = edge addition, 2 = edge removal.
  std::vector<int> kinds;
  if (n > 2 && intermediate_ops.size() > 1) kinds.push_back(0);
  if (graph.edges.size() < spec.max_edges) kinds.push_back(1);
  if (!graph.edges.empty()) kinds.push_back(2);
  if (kinds.empty()) throw Error("MutationExhausted", "no mutation kind applicable");
  const int kind = kinds[rng.index(kinds.size())];

  ArchGraph mutant = graph;
  switch (kind) {
    case 0: {
      const std::size_t node = 1 + rng.index(n - 2);
      std::size_t new_op = intermediate_ops[rng.index(intermediate_ops.size())];
      while (new_op == node_ops[node])
        new_op = intermediate_ops[rng.index(intermediate_ops.size())];
      node_ops[node] = new_op;
      mutant = ArchGraph::from_ops(spec.vocab.size(), node_ops, graph.edges);
      break;
    }
    case 1: {
      const int src = static_cast<int>(rng.index(n));
      int dst = static_cast<int>(rng.index(n));
      if (src == dst) dst = (dst + 1) % static_cast<int>(n);
      mutant.edges.push_back({src, dst});
      break;
    }
    default: {
      mutant.edges.erase(mutant.edges.begin() +
                         static_cast<std::ptrdiff_t>(rng.index(mutant.edges.size())));
      break;
    }
  }
  return mutant;
}

}  // namespace

ArchGraph mutate(const ArchGraph& graph, const SpaceSpec& spec, std::uint64_t seed,
                 std::size_t retries) {
  if (!in_space(graph, spec))
    throw Error("ConfigError", "mutation seed graph is not in the space");
  Rng rng(seed);
  for (std::size_t attempt = 0; attempt < retries; ++attempt) {
    ArchGraph mutant = mutate_once(graph, spec, rng);
    if (in_space(mutant, spec)) return mutant;
  }
  throw Error("MutationExhausted",
              "no valid mutation after " + std::to_string(retries) + " attempts");
}

SearchState init_search(const SpaceSpec& spec, const SearchConfig& cfg, const EvalFn& evaluate,
                        std::uint64_t seed, double reference_max) {
  SearchState state;
  state.budget = cfg.budget;
  state.seed = seed;
  state.reference_max = reference_max;

  // Rejection-free seeding straight from the space sampler.
  BenchDataset sample = generate_space(spec, cfg.initial_pool, seed);
  for (ArchRecord& rec : sample.records) {
    EvaluatedArch arch;
    arch.canonical = canonical_key(rec.graph);
    arch.performance = evaluate(rec.graph);
    arch.graph = std::move(rec.graph);
    state.pool.push_back(std::move(arch));
  }
  append_trace(state);
  return state;
}

namespace {

void guided_round(SearchState& state, const PredictFn& predict, const SpaceSpec& spec,
                  const SearchConfig& cfg, const EvalFn& evaluate) {
  if (state.pool.size() >= state.budget) return;

  std::set<std::string> seen;
  for (const EvaluatedArch& a : state.pool) seen.insert(a.canonical);

  Rng rng(state.seed ^ (0x9e3779b97f4a7c15ull * (state.round + 1)));

  struct Candidate {
    ArchGraph graph;
    std::string canonical;
    double predicted;
  };
  std::vector<Candidate> candidates;
  std::set<std::string> candidate_keys;

  for (std::size_t p = 0; p < state.pool.size(); ++p) {
    for (std::size_t m = 0; m < cfg.mutants_per_arch; ++m) {
      // Evaluated or already-proposed candidates are re-mutated a bounded
      // number of times rather than wasting budget on duplicates.
      bool placed = false;
      for (std::size_t attempt = 0; attempt < 20 && !placed; ++attempt) {
        ArchGraph mutant = mutate(state.pool[p].graph, spec, rng.next_u64());
        std::string key = canonical_key(mutant);
        if (seen.count(key) || candidate_keys.count(key)) continue;
        candidate_keys.insert(key);
        Candidate c;
        c.predicted = predict(mutant);
        c.graph = std::move(mutant);
        c.canonical = std::move(key);
        candidates.push_back(std::move(c));
        placed = true;
      }
    }
  }
  if (candidates.empty())
    throw Error("MutationExhausted", "round produced no novel candidates");

  const std::size_t take =
      std::min({cfg.per_round, candidates.size(), state.budget - state.pool.size()});
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].predicted > candidates[b].predicted;
  });

  for (std::size_t i = 0; i < take; ++i) {
    Candidate& c = candidates[order[i]];
    EvaluatedArch arch;
    arch.performance = evaluate(c.graph);
    arch.graph = std::move(c.graph);
    arch.canonical = std::move(c.canonical);
    state.pool.push_back(std::move(arch));
  }
  ++state.round;
  append_trace(state);
}

}  // namespace

void npenas_round_with(SearchState& state, const PredictFn& predict, const SpaceSpec& spec,
                       const SearchConfig& cfg, const EvalFn& evaluate) {
  guided_round(state, predict, spec, cfg, evaluate);
}

void npenas_round(SearchState& state, EncoderModel& predictor, const SpaceSpec& spec,
                  const SearchConfig& cfg, const EvalFn& evaluate) {
  // Re-fit on the full current pool before proposing; the predictor itself
  // is warm-started once per search and keeps training across rounds.
  std::vector<ArchGraph> undirected;
  std::vector<double> labels;
  for (const EvaluatedArch& a : state.pool) {
    undirected.push_back(undirect(a.graph));
    labels.push_back(a.performance);
  }
  rank_training_epochs(predictor, undirected, labels, cfg.margin, cfg.lr, cfg.weight_decay,
                       cfg.finetune_epochs, state.seed + state.round);

  PredictFn predict = [&predictor](const ArchGraph& g) {
    ArchGraph u = undirect(g);
    return performance_estimate(predictor, u);
  };
  guided_round(state, predict, spec, cfg, evaluate);
}

SearchState npenas_search(EncoderModel& predictor, const SpaceSpec& spec, const SearchConfig& cfg,
                          const EvalFn& evaluate, std::uint64_t seed, double reference_max) {
  SearchState state = init_search(spec, cfg, evaluate, seed, reference_max);
  while (state.pool.size() < state.budget)
    npenas_round(state, predictor, spec, cfg, evaluate);
  return state;
}

SearchState random_search(const SpaceSpec& spec, std::size_t budget, const EvalFn& evaluate,
                          std::uint64_t seed, double reference_max) {
  SearchState state;
  state.budget = budget;
  state.seed = seed;
  state.reference_max = reference_max;

  BenchDataset sample = generate_space(spec, budget, seed);
  for (std::size_t i = 0; i < sample.records.size(); ++i) {
    EvaluatedArch arch;
    arch.canonical = canonical_key(sample.records[i].graph);
    arch.performance = evaluate(sample.records[i].graph);
    arch.graph = std::move(sample.records[i].graph);
    state.pool.push_back(std::move(arch));
    state.round = i / 20;  // trace in 20-evaluation rounds, mirroring the guided loop
    if ((i + 1) % 20 == 0 || i + 1 == sample.records.size()) append_trace(state);
  }
  return state;
}

void save_search_trace_csv(const std::string& path, const SearchState& state) {
  std::ostringstream csv;
  csv << "# seed=" << state.seed << " budget=" << state.budget << " warm_start=once\n";
  csv << "round,pool_size,best_performance,regret\n";
  for (const SearchTraceRow& row : state.trace) {
    csv << row.round << "," << row.pool_size << "," << format_double(row.best_performance) << ","
        << format_double(row.regret) << "\n";
  }
  atomic_write_file(path, csv.str());
}

}  // namespace fgp
