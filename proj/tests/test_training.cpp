#include <doctest.h>

#include <cmath>

#include "fgp/io.hpp"
#include "fgp/training.hpp"
#include "oracles.hpp"

using namespace fgp;

namespace {

EncoderConfig small_config(std::size_t d = 8) {
  EncoderConfig cfg;
  cfg.hidden_dim = d;
  cfg.num_layers = 2;
  cfg.decoder_dims = {d};
  cfg.head_dims = {d};
  return cfg;
}

// Shared fixture: labeled dataset with cached surrogates and splits.
BenchDataset prepared_dataset(std::size_t count, std::uint64_t seed, std::size_t k = 6) {
  SpaceSpec spec = SpaceSpec::cell201_like();
  BenchDataset d = generate_space(spec, count, seed);
  apply_oracle(d, OracleConfig{}, seed + 1);
  auto params = init_params(d.vocab, k, 0.1, 0.5, seed + 2);
  auto surrogates = batch_surrogates([&] {
    std::vector<ArchGraph> graphs;
    for (const auto& rec : d.records) graphs.push_back(rec.graph);
    return graphs;
  }(), params);
  for (std::size_t i = 0; i < d.size(); ++i) d.records[i].surrogate = surrogates[i];
  d.surrogate_dim = k;
  return d;
}

}  // namespace

TEST_CASE("reconstruction loss basics and oracle") {
  Tape tape;
  DiffValue a = tape.leaf(Matrix::row_vector({1.0, 0.0}));
  DiffValue b = tape.leaf(Matrix::row_vector({0.0, 0.0}));
  CHECK(reconstruction_loss(tape, a, a).scalar() == 0.0);
  CHECK(reconstruction_loss(tape, b, a).scalar() == 1.0);

  Rng rng(3);
  std::vector<double> s(8), sh(8);
  for (auto& v : s) v = rng.normal(0.0, 1.0);
  for (auto& v : sh) v = rng.normal(0.0, 1.0);
  double expected = 0.0;
  for (std::size_t j = 0; j < 8; ++j) expected += (s[j] - sh[j]) * (s[j] - sh[j]);
  DiffValue pred = tape.leaf(Matrix::row_vector(sh));
  DiffValue target = tape.leaf(Matrix::row_vector(s));
  CHECK(reconstruction_loss(tape, pred, target).scalar() ==
        doctest::Approx(expected).epsilon(1e-12));

  DiffValue wrong = tape.leaf(Matrix::row_vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(reconstruction_loss(tape, wrong, target), Error);
}

TEST_CASE("margin ranking loss analytic cases") {
  Tape tape;
  auto score = [&](double v) { return tape.constant(v); };

  // well separated in the right order: zero loss
  std::vector<DiffValue> ordered = {score(1.0), score(0.5), score(0.0)};
  CHECK(margin_ranking_loss(tape, ordered, {3.0, 2.0, 1.0}, 0.1).scalar() == 0.0);

  // two equal scores with distinct targets pay the margin
  std::vector<DiffValue> tied = {score(0.3), score(0.3)};
  CHECK(margin_ranking_loss(tape, tied, {1.0, 0.0}, 0.1).scalar() ==
        doctest::Approx(0.1).epsilon(1e-15));

  // ties in targets contribute nothing
  std::vector<DiffValue> pair = {score(0.0), score(5.0)};
  CHECK(margin_ranking_loss(tape, pair, {2.0, 2.0}, 0.5).scalar() == 0.0);

  CHECK_THROWS_AS(margin_ranking_loss(tape, {score(1.0)}, {1.0}, 0.1), Error);
  CHECK_THROWS_AS(margin_ranking_loss(tape, pair, {1.0}, 0.1), Error);
}

TEST_CASE("margin ranking loss matches the all-pairs oracle, value and gradient") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 8;
    std::vector<double> values(n), targets(n);
    for (auto& v : values) v = rng.normal(0.0, 0.5);
    for (auto& v : targets) v = static_cast<double>(rng.index(5));

    std::vector<Parameter> params;
    params.reserve(n);
    for (double v : values) params.emplace_back("s", Matrix(1, 1, v));

    Tape tape;
    std::vector<DiffValue> scores;
    for (auto& p : params) scores.push_back(tape.param(p));
    DiffValue loss = margin_ranking_loss(tape, scores, targets, 0.2);

    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (targets[i] > targets[j])
          expected += std::max(0.0, 0.2 - (values[i] - values[j]));
    CHECK(loss.scalar() == doctest::Approx(expected).epsilon(1e-12));

    tape.backward(loss);
    for (std::size_t i = 0; i < n; ++i) {
      auto eval = [&]() {
        double total = 0.0;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b)
            if (targets[a] > targets[b])
              total += std::max(0.0, 0.2 - (params[a].value.values[0] -
                                            params[b].value.values[0]));
        return total;
      };
      const double fd = oracle::central_difference(params[i].value.values, 0, eval, 1e-6);
      CHECK(std::abs(fd - params[i].grad.values[0]) < 1e-6);
    }
  }
}

TEST_CASE("margin ranking loss is invariant to a common score offset") {
  Rng rng(31);
  Tape tape;
  std::vector<double> targets(6);
  std::vector<DiffValue> base, shifted;
  for (auto& t : targets) t = rng.normal(0.0, 1.0);
  for (std::size_t i = 0; i < 6; ++i) {
    const double v = rng.normal(0.0, 1.0);
    base.push_back(tape.constant(v));
    shifted.push_back(tape.constant(v + 42.5));
  }
  CHECK(margin_ranking_loss(tape, base, targets, 0.15).scalar() ==
        doctest::Approx(margin_ranking_loss(tape, shifted, targets, 0.15).scalar())
            .epsilon(1e-9));
}

TEST_CASE("pretrain lambda variants relax their input requirements") {
  BenchDataset d = prepared_dataset(40, 100);
  PretrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 5;

  SUBCASE("lambda2 = 0 ignores proxies entirely") {
    for (auto& rec : d.records) rec.proxy.reset();
    cfg.lambda2 = 0.0;
    EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 8);
    auto result = pretrain(model, d, cfg);
    CHECK(result.trace.size() == 2);
    CHECK(result.trace[0].aux == 0.0);
  }

  SUBCASE("lambda1 = 0 ignores surrogates entirely") {
    for (auto& rec : d.records) rec.surrogate.reset();
    cfg.lambda1 = 0.0;
    EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 8);
    auto result = pretrain(model, d, cfg);
    CHECK(result.trace.size() == 2);
    CHECK(result.trace[0].rec == 0.0);
  }

  SUBCASE("missing proxies with lambda2 > 0 is an error") {
    d.records[11].proxy.reset();
    EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 8);
    try {
      pretrain(model, d, cfg);
      FAIL("expected MissingProxyScores");
    } catch (const Error& e) {
      CHECK(e.kind() == "MissingProxyScores");
    }
  }

  SUBCASE("degenerate lambda pair is rejected") {
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 8);
    CHECK_THROWS_AS(pretrain(model, d, cfg), Error);
  }
}

TEST_CASE("pretrain never touches ground-truth performance") {
  BenchDataset d = prepared_dataset(60, 200);
  EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 1);
  PretrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  auto result = pretrain(model, d, cfg);
  CHECK(d.performance_reads() == 0);
  CHECK(result.trace.size() == 3);
  CHECK(result.target_mean.size() == 6);
  CHECK(result.target_std.size() == 6);
}

TEST_CASE("pretrain is bitwise deterministic for a fixed seed") {
  BenchDataset d = prepared_dataset(50, 300);
  PretrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.seed = 77;

  auto run = [&]() {
    EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 9);
    pretrain(model, d, cfg);
    std::vector<double> flat;
    for (Parameter* p : model.all_params())
      flat.insert(flat.end(), p->value.values.begin(), p->value.values.end());
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("pretrain on 500 graphs drives the reconstruction loss down") {
  BenchDataset d = prepared_dataset(500, 400);
  EncoderModel model = make_encoder(small_config(8), d.vocab.size(), 6, 21);
  PretrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 128;
  cfg.seed = 13;
  cfg.lambda2 = 0.0;  // isolate the reconstruction path
  cfg.lambda1 = 1.0;

  auto result = pretrain(model, d, cfg);
  REQUIRE(result.trace.size() == 200);
  const double first = result.trace.front().rec;
  const double last = result.trace.back().rec;
  CHECK(last < 0.1 * first);

  // from epoch 50 on, every epoch mean sits below the epoch-1 value
  for (std::size_t e = 49; e < result.trace.size(); ++e)
    CHECK(result.trace[e].total < result.trace[0].total);
}

TEST_CASE("finetune with all-equal labels only applies weight decay") {
  BenchDataset d = prepared_dataset(30, 500);
  for (auto& rec : d.records) rec.performance = 3.25;
  make_splits(d, 0.8, 4, 9);

  EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 31);
  const auto before = snapshot_params(model.all_params());

  FinetuneConfig cfg;
  cfg.train_ratio = 1.0;
  cfg.max_epochs = 3;
  cfg.patience = 100;
  cfg.weight_decay = 0.0;
  finetune(model, d, cfg);

  const auto after = snapshot_params(model.all_params());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i].values == after[i].values);
}

TEST_CASE("finetune with a correctly ordered two-item set keeps zero loss") {
  BenchDataset d = prepared_dataset(20, 600);
  make_splits(d, 0.1, 2, 4);  // train split of 2
  REQUIRE(d.splits.train.size() == 2);
  // labels that agree with the model's own initial ordering keep every
  // hinge at zero under a zero margin
  EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 77);
  const auto i0 = d.splits.train[0];
  const auto i1 = d.splits.train[1];
  ArchGraph u0 = undirect(d.records[i0].graph);
  ArchGraph u1 = undirect(d.records[i1].graph);
  d.records[i0].performance = performance_estimate(model, u0);
  d.records[i1].performance = performance_estimate(model, u1);

  FinetuneConfig cfg;
  cfg.train_ratio = 1.0;
  cfg.margin = 0.0;
  cfg.max_epochs = 2;
  cfg.weight_decay = 0.0;

  const auto before = snapshot_params(model.all_params());
  finetune(model, d, cfg);
  const auto after = snapshot_params(model.all_params());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i].values == after[i].values);
}

TEST_CASE("finetune errors on too few labeled items") {
  BenchDataset d = prepared_dataset(30, 700);
  make_splits(d, 0.5, 5, 3);
  EncoderModel model = make_encoder(small_config(), d.vocab.size(), 6, 1);
  FinetuneConfig cfg;
  cfg.train_ratio = 0.01;  // rounds to zero labeled graphs -> clamped to 1
  try {
    finetune(model, d, cfg);
    FAIL("expected TooFewLabeled");
  } catch (const Error& e) {
    CHECK(e.kind() == "TooFewLabeled");
  }
}

TEST_CASE("finetune improves validation ranking on a learnable dataset") {
  BenchDataset d = prepared_dataset(200, 800);
  make_splits(d, 0.5, 40, 17);
  EncoderModel model = make_encoder(small_config(12), d.vocab.size(), 6, 3);

  FinetuneConfig cfg;
  cfg.train_ratio = 0.5;  // 50 labeled graphs
  cfg.max_epochs = 120;
  cfg.patience = 20;
  cfg.seed = 5;
  auto result = finetune(model, d, cfg);
  CHECK(result.labeled_count == 50);
  CHECK(result.best_val_tau > 0.3);
  CHECK(result.epochs_run >= 1);
}

TEST_CASE("loss trace csv is written with seed header") {
  std::vector<EpochLoss> trace = {{1, 0.5, 0.25, 0.75}, {2, 0.4, 0.2, 0.6}};
  const std::string path = "/tmp/fgp_test_loss.csv";
  save_loss_csv(path, trace, 97);
  const std::string content = read_file(path);
  CHECK(content.find("# seed=97") == 0);
  CHECK(content.find("epoch,loss_rec,loss_aux,loss_total") != std::string::npos);
  CHECK(content.find("2,0.4,0.2,0.6") != std::string::npos);
}
