#include <doctest.h>

#include <cmath>

#include "fgp/surrogate.hpp"
#include "oracles.hpp"

using namespace fgp;

namespace {

OpVocabulary small_vocab() { return OpVocabulary({"in", "conv", "pool", "out"}); }

SurrogateParams example_params(double alpha, std::size_t k = 8, std::uint64_t seed = 11) {
  return init_params(small_vocab(), k, 0.1, alpha, seed);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("init_params is reproducible and validates hyperparameters") {
  const auto a = example_params(0.5);
  const auto b = example_params(0.5);
  CHECK(a.op_projection.values == b.op_projection.values);
  CHECK(a.message_projection.values == b.message_projection.values);
  CHECK(a.source_message == b.source_message);
  CHECK(a.alpha == 0.5);

  CHECK_THROWS_AS(init_params(small_vocab(), 8, 0.0, 0.5, 1), Error);
  CHECK_THROWS_AS(init_params(small_vocab(), 0, 0.1, 0.5, 1), Error);
  CHECK_THROWS_AS(init_params(small_vocab(), 8, 0.1, 1.5, 1), Error);

  // draw-order contract: r entries land in [0, 1), projections are spread
  for (double r : a.source_message) {
    CHECK(r >= 0.0);
    CHECK(r < 1.0);
  }
}

TEST_CASE("node embeddings are shared per op and match the matmul oracle") {
  const auto params = example_params(0.5, 8, 3);

  ArchGraph same_op = ArchGraph::from_ops(4, {1, 1}, {{0, 1}});
  Matrix h = node_embeddings(same_op, params);
  for (std::size_t j = 0; j < h.cols; ++j) CHECK(h.at(0, j) == h.at(1, j));

  // identity-like one-hots reproduce the rows of P
  ArchGraph all_ops = ArchGraph::from_ops(4, {0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}});
  Matrix hp = node_embeddings(all_ops, params);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < hp.cols; ++j)
      CHECK(hp.at(i, j) == params.op_projection.at(i, j));

  Rng rng(99);
  ArchGraph g = oracle::random_dag(6, 4, 0.4, rng);
  Matrix got = node_embeddings(g, params);
  Matrix expected = oracle::naive_matmul(g.features, params.op_projection);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got.values[i] == doctest::Approx(expected.values[i]).epsilon(1e-12));

  ArchGraph wrong_vocab = ArchGraph::from_ops(3, {0, 1}, {{0, 1}});
  CHECK_THROWS_AS(node_embeddings(wrong_vocab, params), Error);
}

TEST_CASE("convert collapses for alpha = 1 and zero W") {
  auto params = example_params(1.0);
  std::vector<double> pooled(params.k), h(params.k);
  Rng rng(5);
  for (auto& x : pooled) x = rng.normal(0.0, 1.0);
  for (auto& x : h) x = rng.normal(0.0, 1.0);
  CHECK(convert(pooled, h, params) == pooled);

  auto zero_w = example_params(0.0);
  for (double& w : zero_w.message_projection.values) w = 0.0;
  const auto out = convert(pooled, h, zero_w);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("convert matches the scalar-loop oracle") {
  const auto params = example_params(0.5, 8, 21);
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> pooled(params.k), h(params.k);
    for (auto& x : pooled) x = rng.normal(0.0, 1.0);
    for (auto& x : h) x = rng.normal(0.0, 1.0);
    const auto got = convert(pooled, h, params);
    const auto expected =
        oracle::convert_reference(pooled, h, params.message_projection, params.alpha);
    CHECK(max_abs_diff(got, expected) < 1e-12);
  }
}

TEST_CASE("forward pass analytic cases under alpha = 1") {
  const auto params = example_params(1.0, 4);

  // chain: the source message rides through unchanged
  ArchGraph chain = ArchGraph::from_ops(4, {0, 1, 3}, {{0, 1}, {1, 2}});
  auto topo = assign_topological_order(chain);
  auto state = forward_pass(chain, topo, params);
  CHECK(max_abs_diff(state.fp[2], params.source_message) == 0.0);

  // two sources feeding one sink: sum pooling doubles r
  ArchGraph vee = ArchGraph::from_ops(4, {0, 0, 3}, {{0, 2}, {1, 2}});
  auto vtopo = assign_topological_order(vee);
  auto vstate = forward_pass(vee, vtopo, params);
  std::vector<double> twice_r = params.source_message;
  for (double& x : twice_r) x *= 2.0;
  CHECK(max_abs_diff(vstate.fp[2], twice_r) == 0.0);
}

TEST_CASE("backward pass analytic cases under alpha = 1") {
  const auto params = example_params(1.0, 4);

  ArchGraph chain = ArchGraph::from_ops(4, {0, 1, 3}, {{0, 1}, {1, 2}});
  auto topo = assign_topological_order(chain);
  auto state = backward_pass(chain, topo, params, forward_pass(chain, topo, params));
  CHECK(max_abs_diff(state.bp[0], params.source_message) == 0.0);

  ArchGraph vee = ArchGraph::from_ops(4, {0, 0, 3}, {{0, 2}, {1, 2}});
  auto vtopo = assign_topological_order(vee);
  auto vstate = backward_pass(vee, vtopo, params, forward_pass(vee, vtopo, params));
  std::vector<double> twice_r = params.source_message;
  for (double& x : twice_r) x *= 2.0;
  CHECK(max_abs_diff(vstate.bp[0], twice_r) == 0.0);
  CHECK(max_abs_diff(vstate.bp[1], twice_r) == 0.0);
}

TEST_CASE("passes on the seeded five-node example match the reference oracle") {
  const auto params = example_params(0.5, 8, 11);
  ArchGraph g = oracle::five_node_example();
  auto topo = assign_topological_order(g);
  auto state = backward_pass(g, topo, params, forward_pass(g, topo, params));

  oracle::SurrogateReference ref(g, params);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    CHECK(max_abs_diff(state.fp[i], ref.fp(static_cast<int>(i))) < 1e-12);
    CHECK(max_abs_diff(state.bp[i], ref.bp(static_cast<int>(i))) < 1e-12);
  }
}

TEST_CASE("surrogate analytic cases under alpha = 1") {
  const auto params = example_params(1.0, 4);

  ArchGraph chain = ArchGraph::from_ops(4, {0, 1, 3}, {{0, 1}, {1, 2}});
  CHECK(max_abs_diff(compute_surrogate(chain, params).values, params.source_message) == 0.0);

  ArchGraph vee = ArchGraph::from_ops(4, {0, 0, 3}, {{0, 2}, {1, 2}});
  std::vector<double> four_r = params.source_message;
  for (double& x : four_r) x *= 4.0;
  CHECK(max_abs_diff(compute_surrogate(vee, params).values, four_r) < 1e-12);
}

TEST_CASE("seeded five-node surrogate reproduces the frozen golden vector") {
  // Reference-oracle output for vocab {in,conv,pool,out}, k=8, sigma=0.1,
  // alpha=0.5, seed=11; computed once and frozen.
  const std::vector<double> golden = {
      0.0089951006225563804, 0.090067521444857551,  0.055007872947640785,
      0.0057974317072278375, 0.039255984666873654,  0.02457478310422366,
      0.11538825671895042,   0.033634304635426132,
  };
  const auto params = example_params(0.5, 8, 11);
  const auto s = compute_surrogate(oracle::five_node_example(), params);
  CHECK(max_abs_diff(s.values, golden) < 1e-12);
}

TEST_CASE("alpha = 1 surrogate equals the path-count oracle on random DAGs") {
  Rng rng(31);
  const auto params = example_params(1.0, 6);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.index(8);
    ArchGraph g = oracle::random_dag(n, 4, 0.4, rng);
    const long long count = oracle::path_count_total(g);
    const auto s = compute_surrogate(g, params).values;
    for (std::size_t j = 0; j < params.k; ++j)
      CHECK(s[j] ==
            doctest::Approx(static_cast<double>(count) * params.source_message[j]).epsilon(1e-12));
  }
}

TEST_CASE("surrogate is pure and permutation invariant") {
  Rng rng(47);
  const auto params = example_params(0.5, 8, 13);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 2 + rng.index(12);
    ArchGraph g = oracle::random_dag(n, 4, 0.35, rng);

    const auto first = compute_surrogate(g, params).values;
    const auto second = compute_surrogate(g, params).values;
    CHECK(first == second);  // bitwise purity

    auto perm = oracle::random_permutation(n, rng);
    ArchGraph relabeled = oracle::relabel(g, perm);
    const auto third = compute_surrogate(relabeled, params).values;
    CHECK(first == third);  // exact under canonical-order sum pooling
  }
}

TEST_CASE("surrogate matches the reference oracle across aggregations") {
  Rng rng(77);
  for (Aggregation agg : {Aggregation::Sum, Aggregation::Mean, Aggregation::Max}) {
    auto params = example_params(0.5, 8, 29);
    params.aggregation = agg;
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng.index(10);
      ArchGraph g = oracle::random_dag(n, 4, 0.4, rng);
      oracle::SurrogateReference ref(g, params);
      CHECK(max_abs_diff(compute_surrogate(g, params).values, ref.surrogate()) < 1e-10);
    }
  }
}

TEST_CASE("surrogate propagates CyclicGraph and guards overflow") {
  const auto params = example_params(0.5, 4);
  ArchGraph cyclic = ArchGraph::from_ops(4, {0, 1}, {{0, 1}, {1, 0}});
  CHECK_THROWS_AS(compute_surrogate(cyclic, params), Error);

  // complete DAG on 45 nodes: alpha = 1 path counts pass 1e12
  const std::size_t n = 45;
  std::vector<std::size_t> ops(n, 1);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      edges.push_back({static_cast<int>(i), static_cast<int>(j)});
  ArchGraph complete = ArchGraph::from_ops(4, ops, std::move(edges));
  auto dense_params = example_params(1.0, 4);
  CHECK_THROWS_AS(compute_surrogate(complete, dense_params), Error);
}

TEST_CASE("batch surrogates equal the sequential map") {
  const auto params = example_params(0.5, 8, 53);

  CHECK(batch_surrogates({}, params).empty());

  ArchGraph g = oracle::five_node_example();
  auto twins = batch_surrogates({g, g}, params);
  REQUIRE(twins.size() == 2);
  CHECK(twins[0].values == twins[1].values);

  Rng rng(101);
  std::vector<ArchGraph> graphs;
  for (int i = 0; i < 100; ++i) graphs.push_back(oracle::random_dag(2 + rng.index(10), 4, 0.4, rng));

  std::vector<FlowSurrogate> sequential;
  for (const auto& graph : graphs) sequential.push_back(compute_surrogate(graph, params));

  const auto batched = batch_surrogates(graphs, params);
  const auto parallel = batch_surrogates(graphs, params, 4);
  REQUIRE(batched.size() == sequential.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    CHECK(batched[i].values == sequential[i].values);
    CHECK(parallel[i].values == sequential[i].values);
  }
}

TEST_CASE("batch surrogates report failing indices") {
  const auto params = example_params(0.5, 8);
  ArchGraph good = oracle::five_node_example();
  ArchGraph bad = ArchGraph::from_ops(4, {0, 1}, {{0, 1}, {1, 0}});
  try {
    batch_surrogates({good, bad, good}, params);
    FAIL("expected BatchFailure");
  } catch (const Error& e) {
    CHECK(e.kind() == "BatchFailure");
    CHECK(std::string(e.what()).find("graph 1") != std::string::npos);
  }
}
