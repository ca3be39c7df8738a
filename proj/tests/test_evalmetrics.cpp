#include <doctest.h>

#include <cmath>

#include "fgp/evalmetrics.hpp"
#include "fgp/error.hpp"
#include "fgp/rng.hpp"
#include "oracles.hpp"

using namespace fgp;

TEST_CASE("kendall tau endpoint cases") {
  std::vector<double> x = {0.4, 1.2, 3.0, 5.5, 9.1};
  CHECK(kendall_tau(x, x) == 1.0);
  std::vector<double> neg = x;
  for (double& v : neg) v = -v;
  CHECK(kendall_tau(x, neg) == -1.0);
}

TEST_CASE("kendall tau worked example: one swapped pair out of four") {
  // all-pairs enumeration: 5 concordant, 1 discordant -> 4/6
  CHECK(kendall_tau({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("kendall tau error paths") {
  CHECK_THROWS_AS(kendall_tau({1.0}, {1.0}), Error);
  try {
    kendall_tau({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0});
    FAIL("expected AllTied");
  } catch (const Error& e) {
    CHECK(e.kind() == "AllTied");
  }
  CHECK_THROWS_AS(kendall_tau({1.0, 2.0}, {1.0}), Error);
}

TEST_CASE("kendall tau matches the sign-product oracle with ties") {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(49);
    std::vector<double> truth(n), pred(n);
    for (auto& v : truth) v = static_cast<double>(rng.index(12));  // forces ties
    for (auto& v : pred) v = static_cast<double>(rng.index(12));
    bool truth_tied = true, pred_tied = true;
    for (std::size_t i = 1; i < n; ++i) {
      truth_tied = truth_tied && truth[i] == truth[0];
      pred_tied = pred_tied && pred[i] == pred[0];
    }
    if (truth_tied || pred_tied) continue;
    CHECK(std::abs(kendall_tau(truth, pred) - oracle::tau_reference(truth, pred)) <= 1e-12);
  }
}

TEST_CASE("kendall tau is invariant under strictly monotone transforms") {
  Rng rng(11);
  std::vector<double> truth(30), pred(30);
  for (auto& v : truth) v = rng.normal(0.0, 1.0);
  for (auto& v : pred) v = rng.normal(0.0, 1.0);
  const double base = kendall_tau(truth, pred);

  std::vector<double> warped = pred;
  for (double& v : warped) v = std::exp(0.5 * v) + 3.0;
  CHECK(kendall_tau(truth, warped) == doctest::Approx(base).epsilon(1e-15));

  std::vector<double> truth_warped = truth;
  for (double& v : truth_warped) v = std::atan(2.0 * v);
  CHECK(kendall_tau(truth_warped, pred) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("precision at percent basics") {
  std::vector<double> truth = {5, 4, 3, 2, 1};
  CHECK(precision_at_percent(truth, truth, 20.0) == 1.0);

  std::vector<double> reversed = {1, 2, 3, 4, 5};
  CHECK(precision_at_percent(truth, reversed, 20.0) == 0.0);

  CHECK_THROWS_AS(precision_at_percent(truth, truth, 0.0), Error);
  CHECK_THROWS_AS(precision_at_percent(truth, truth, 120.0), Error);
}

TEST_CASE("precision at percent with a partially shared top set") {
  // n = 100, top-5 sets share exactly 3 items -> 0.6
  std::vector<double> truth(100), pred(100);
  for (std::size_t i = 0; i < 100; ++i) {
    truth[i] = -static_cast<double>(i);  // top-5 of truth: 0..4
    pred[i] = -static_cast<double>(i);
  }
  pred[0] = -1000.0;  // drop 0 and 1 out of the predicted top
  pred[1] = -1001.0;
  pred[98] = 100.0;  // pull 98 and 99 in
  pred[99] = 101.0;
  CHECK(precision_at_percent(truth, pred, 5.0) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("precision is invariant to rescaling predictions") {
  Rng rng(77);
  std::vector<double> truth(40), pred(40);
  for (auto& v : truth) v = rng.normal(0.0, 1.0);
  for (auto& v : pred) v = rng.normal(0.0, 1.0);
  const double base = precision_at_percent(truth, pred, 10.0);
  std::vector<double> scaled = pred;
  for (double& v : scaled) v = 0.25 * v + 12.0;
  CHECK(precision_at_percent(truth, scaled, 10.0) == base);
}

TEST_CASE("precision matches the set-intersection oracle") {
  Rng rng(505);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(50);
    std::vector<double> truth(n), pred(n);
    for (auto& v : truth) v = rng.normal(0.0, 1.0);
    for (auto& v : pred) v = rng.normal(0.0, 1.0);
    const double percent = 1.0 + rng.uniform() * 99.0;
    CHECK(std::abs(precision_at_percent(truth, pred, percent) -
                   oracle::precision_reference(truth, pred, percent)) <= 1e-12);
  }
}

TEST_CASE("evaluate_ranking fills the report") {
  std::vector<double> truth = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EvalReport report = evaluate_ranking(truth, truth);
  CHECK(report.kendall_tau == 1.0);
  CHECK(report.precision_at.at(1.0) == 1.0);
  CHECK(report.precision_at.at(5.0) == 1.0);
  CHECK(report.n == 10);
  auto j = report.to_json();
  CHECK(j["tau_variant"] == "tau-b");
  CHECK(j["precision_at"]["1"] == 1.0);
}

TEST_CASE("pca flattens collinear points") {
  std::vector<std::vector<double>> points;
  for (int i = 0; i < 12; ++i) {
    const double t = static_cast<double>(i);
    points.push_back({1.0 + 2.0 * t, -3.0 + 0.5 * t});
  }
  PcaResult r = pca_project(points, 2);
  CHECK(r.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r.explained_variance_ratio[1]) < 1e-12);
  for (const auto& p : r.points) CHECK(std::abs(p[1]) < 1e-9);
}

TEST_CASE("pca recovers centered coordinates of axis-aligned data up to sign") {
  // mirrored quadrant points: zero cross-covariance, x spread dominating
  std::vector<std::vector<double>> points = {
      {4.0, 1.0}, {4.0, -1.0}, {-4.0, 1.0}, {-4.0, -1.0}, {0.0, 0.0}};
  PcaResult r = pca_project(points, 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(std::abs(std::abs(r.points[i][0]) - std::abs(points[i][0])) < 1e-9);
    CHECK(std::abs(std::abs(r.points[i][1]) - std::abs(points[i][1])) < 1e-9);
  }
}

TEST_CASE("pca matches the power-iteration oracle on a seeded 50x8 matrix") {
  Rng rng(999);
  std::vector<std::vector<double>> data(50, std::vector<double>(8));
  // anisotropic scales so the spectrum has clear gaps
  const double scales[8] = {3.0, 2.2, 1.5, 1.0, 0.7, 0.4, 0.25, 0.1};
  for (auto& row : data)
    for (std::size_t j = 0; j < 8; ++j) row[j] = rng.normal(0.0, scales[j]);

  PcaResult r = pca_project(data, 2);
  oracle::PowerIterationPca ref(data, 2);

  std::vector<double> mean(8, 0.0);
  for (const auto& row : data)
    for (std::size_t j = 0; j < 8; ++j) mean[j] += row[j] / 50.0;

  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> expected(50, 0.0);
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        expected[i] += (data[i][j] - mean[j]) * ref.components[c][j];
    // align the oracle's arbitrary sign to the implementation's convention
    double dot = 0.0;
    for (std::size_t i = 0; i < 50; ++i) dot += expected[i] * r.points[i][c];
    const double sign = dot >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < 50; ++i)
      CHECK(std::abs(r.points[i][c] - sign * expected[i]) < 1e-8);
  }
}

TEST_CASE("pca is invariant to input rotation up to per-axis sign") {
  Rng rng(313);
  std::vector<std::vector<double>> data(30, std::vector<double>(4));
  const double scales[4] = {2.5, 1.4, 0.8, 0.3};
  for (auto& row : data)
    for (std::size_t j = 0; j < 4; ++j) row[j] = rng.normal(0.0, scales[j]);

  // random orthogonal map from composed Givens rotations
  Matrix q = Matrix::identity(4);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      const double angle = rng.uniform() * 6.28318530717958647;
      Matrix g = Matrix::identity(4);
      g.at(a, a) = std::cos(angle);
      g.at(b, b) = std::cos(angle);
      g.at(a, b) = -std::sin(angle);
      g.at(b, a) = std::sin(angle);
      q = matmul(q, g);
    }

  std::vector<std::vector<double>> rotated(30, std::vector<double>(4, 0.0));
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 4; ++k) rotated[i][j] += data[i][k] * q.at(k, j);

  PcaResult a = pca_project(data, 2);
  PcaResult b = pca_project(rotated, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(a.explained_variance_ratio[c] ==
          doctest::Approx(b.explained_variance_ratio[c]).epsilon(1e-9));
    double dot = 0.0;
    for (std::size_t i = 0; i < 30; ++i) dot += a.points[i][c] * b.points[i][c];
    const double sign = dot >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < 30; ++i)
      CHECK(a.points[i][c] == doctest::Approx(sign * b.points[i][c]).epsilon(1e-8));
  }
}

TEST_CASE("pca rejects degenerate inputs") {
  std::vector<std::vector<double>> two = {{1.0, 2.0}, {3.0, 4.0}};
  CHECK_THROWS_AS(pca_project(two, 2), Error);

  std::vector<std::vector<double>> same(5, std::vector<double>{1.0, 1.0, 1.0});
  try {
    pca_project(same, 2);
    FAIL("expected DegenerateCovariance");
  } catch (const Error& e) {
    CHECK(e.kind() == "DegenerateCovariance");
  }
}
