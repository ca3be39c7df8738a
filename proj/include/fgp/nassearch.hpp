#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fgp/benchdata.hpp"
#include "fgp/encoder.hpp"

namespace fgp {

// One evaluated architecture in the search pool.
struct EvaluatedArch {
  ArchGraph graph;
  double performance = 0.0;
  std::string canonical;
};

struct SearchTraceRow {
  std::size_t round = 0;       // 0 is the seed pool
  std::size_t pool_size = 0;
  double best_performance = 0.0;
  double regret = 0.0;         // reference_max - best so far
};

struct SearchState {
  std::vector<EvaluatedArch> pool;
  std::size_t budget = 200;
  std::size_t round = 0;
  std::uint64_t seed = 0;
  double reference_max = 0.0;  // oracle max used for the regret trace
  std::vector<SearchTraceRow> trace;

  double best_performance() const;
};

// True-performance source for newly evaluated candidates.
using EvalFn = std::function<double(const ArchGraph&)>;
// Predicted-performance source used to rank mutants.
using PredictFn = std::function<double(const ArchGraph&)>;

// One atomic change: reassign one intermediate node's op, or add or remove
// one edge. Rejection-sampled until the result validates and stays in the
// space; throws MutationExhausted after `retries` failures.
ArchGraph mutate(const ArchGraph& graph, const SpaceSpec& spec, std::uint64_t seed,
                 std::size_t retries = 100);

// Search configuration shared by the predictor-guided loop and the random
// control arm.
struct SearchConfig {
  std::size_t initial_pool = 20;
  std::size_t per_round = 20;      // evaluations added per round
  std::size_t mutants_per_arch = 5;
  std::size_t budget = 200;
  std::size_t finetune_epochs = 30;
  double margin = 0.1;
  double lr = 1e-3;
  double weight_decay = 1e-6;
};

SearchState init_search(const SpaceSpec& spec, const SearchConfig& cfg, const EvalFn& evaluate,
                        std::uint64_t seed, double reference_max);

// One predictor-guided round: fine-tune the predictor on the current pool,
// mutate every pool member `mutants_per_arch` times, keep the predictor's
// top `per_round` unseen candidates, evaluate and absorb them.
void npenas_round(SearchState& state, EncoderModel& predictor, const SpaceSpec& spec,
                  const SearchConfig& cfg, const EvalFn& evaluate);

// Same round driven by an arbitrary ranking function instead of the
// encoder; lets tests plug the oracle in as a perfect predictor.
void npenas_round_with(SearchState& state, const PredictFn& predict, const SpaceSpec& spec,
                       const SearchConfig& cfg, const EvalFn& evaluate);

// Full predictor-guided search until the budget is reached.
SearchState npenas_search(EncoderModel& predictor, const SpaceSpec& spec, const SearchConfig& cfg,
                          const EvalFn& evaluate, std::uint64_t seed, double reference_max);

// Uniformly samples and evaluates `budget` architectures.
SearchState random_search(const SpaceSpec& spec, std::size_t budget, const EvalFn& evaluate,
                          std::uint64_t seed, double reference_max);

// CSV trace: "# seed=... warm_start=once" header, then
// round,pool_size,best_performance,regret rows. Atomic.
void save_search_trace_csv(const std::string& path, const SearchState& state);

}  // namespace fgp
