#include "fgp/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgp/error.hpp"
#include "fgp/matrix.hpp"

namespace fgp {

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["kendall_tau"] = kendall_tau;
  nlohmann::json prec = nlohmann::json::object();
  for (const auto& [percent, value] : precision_at) {
    char key[32];
    std::snprintf(key, sizeof(key), "%g", percent);
    prec[key] = value;
  }
  j["precision_at"] = prec;
  j["n"] = n;
  j["tau_variant"] = tau_variant;
  return j;
}

double kendall_tau(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.size() != pred.size())
    throw Error("ShapeMismatch", "truth and pred differ in length");
  const std::size_t n = truth.size();
  if (n < 2) throw Error("TooFewItems", "kendall_tau needs at least 2 items");

  long long concordant = 0, discordant = 0;
  long long ties_truth = 0, ties_pred = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dt = truth[i] - truth[j];
      const double dp = pred[i] - pred[j];
      if (dt == 0.0 && dp == 0.0) {
        ++ties_truth;
        ++ties_pred;
      } else if (dt == 0.0) {
        ++ties_truth;
      } else if (dp == 0.0) {
        ++ties_pred;
      } else if ((dt > 0.0) == (dp > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const auto n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const double denom_truth = static_cast<double>(n0 - ties_truth);
  const double denom_pred = static_cast<double>(n0 - ties_pred);
  if (denom_truth <= 0.0 || denom_pred <= 0.0)
    throw Error("AllTied", "one ranking is fully tied");
  return static_cast<double>(concordant - discordant) / std::sqrt(denom_truth * denom_pred);
}

namespace {

std::vector<std::size_t> top_set(const std::vector<double>& values, std::size_t count) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];  // stable: cutoff ties keep index order
  });
  order.resize(count);
  return order;
}

}  // namespace

double precision_at_percent(const std::vector<double>& truth, const std::vector<double>& pred,
                            double percent) {
  if (truth.size() != pred.size())
    throw Error("ShapeMismatch", "truth and pred differ in length");
  if (!(percent > 0.0) || percent > 100.0)
    throw Error("InvalidPercent", "percent must be in (0, 100]");
  const std::size_t n = truth.size();
  if (n < 1) throw Error("TooFewItems", "precision_at_percent needs at least 1 item");

  const auto count = static_cast<std::size_t>(
      std::ceil(percent * static_cast<double>(n) / 100.0));
  const auto top_truth = top_set(truth, count);
  const auto top_pred = top_set(pred, count);
  std::vector<char> in_truth(n, 0);
  for (std::size_t i : top_truth) in_truth[i] = 1;
  std::size_t hits = 0;
  for (std::size_t i : top_pred)
    if (in_truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(count);
}

EvalReport evaluate_ranking(const std::vector<double>& truth, const std::vector<double>& pred,
                            const std::vector<double>& percents) {
  EvalReport report;
  report.n = truth.size();
  report.kendall_tau = kendall_tau(truth, pred);
  for (double p : percents) report.precision_at[p] = precision_at_percent(truth, pred, p);
  return report;
}

namespace {

// Cyclic Jacobi eigendecomposition for small symmetric matrices.
// Returns eigenvalues descending with matching column eigenvectors.
void jacobi_eigen(Matrix a, std::vector<double>& eigenvalues, Matrix& eigenvectors) {
  const std::size_t n = a.rows;
  eigenvectors = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a.at(p, q)) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double apj = a.at(p, j), aqj = a.at(q, j);
          a.at(p, j) = c * apj - s * aqj;
          a.at(q, j) = s * apj + c * aqj;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = eigenvectors.at(i, p), viq = eigenvectors.at(i, q);
          eigenvectors.at(i, p) = c * vip - s * viq;
          eigenvectors.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a.at(i, i);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return eigenvalues[x] > eigenvalues[y]; });
  std::vector<double> sorted_vals(n);
  Matrix sorted_vecs(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    sorted_vals[c] = eigenvalues[order[c]];
    for (std::size_t r = 0; r < n; ++r) sorted_vecs.at(r, c) = eigenvectors.at(r, order[c]);
  }
  eigenvalues = std::move(sorted_vals);
  eigenvectors = std::move(sorted_vecs);
}

}  // namespace

PcaResult pca_project(const std::vector<std::vector<double>>& vectors, std::size_t out_dim) {
  const std::size_t n = vectors.size();
  if (out_dim < 1) throw Error("InvalidHyperparameter", "out_dim must be >= 1");
  if (n < out_dim + 1)
    throw Error("DegenerateCovariance",
                "need at least " + std::to_string(out_dim + 1) + " vectors, got " +
                    std::to_string(n));
  const std::size_t dim = vectors.front().size();
  if (dim < out_dim)
    throw Error("DegenerateCovariance", "input dimension below out_dim");
  for (const auto& v : vectors)
    if (v.size() != dim) throw Error("ShapeMismatch", "inconsistent vector lengths");

  std::vector<double> mean(dim, 0.0);
  for (const auto& v : vectors)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
  for (double& m : mean) m /= static_cast<double>(n);

  Matrix centered(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) centered.at(i, j) = vectors[i][j] - mean[j];

  Matrix cov(dim, dim);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += centered.at(i, a) * centered.at(i, b);
      acc /= static_cast<double>(n - 1);
      cov.at(a, b) = acc;
      cov.at(b, a) = acc;
    }
  }

  double total_variance = 0.0;
  for (std::size_t a = 0; a < dim; ++a) total_variance += cov.at(a, a);
  if (!(total_variance > 0.0))
    throw Error("DegenerateCovariance", "all points identical");

  std::vector<double> eigenvalues;
  Matrix eigenvectors;
  jacobi_eigen(cov, eigenvalues, eigenvectors);

  // Fix signs: first loading of nonzero magnitude must be positive.
  for (std::size_t c = 0; c < out_dim; ++c) {
    for (std::size_t r = 0; r < dim; ++r) {
      const double v = eigenvectors.at(r, c);
      if (std::abs(v) > 1e-12) {
        if (v < 0.0)
          for (std::size_t i = 0; i < dim; ++i) eigenvectors.at(i, c) = -eigenvectors.at(i, c);
        break;
      }
    }
  }

  PcaResult result;
  result.points.assign(n, std::vector<double>(out_dim, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < out_dim; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += centered.at(i, j) * eigenvectors.at(j, c);
      result.points[i][c] = acc;
    }
  result.explained_variance_ratio.resize(out_dim);
  for (std::size_t c = 0; c < out_dim; ++c) {
    const double ev = std::max(eigenvalues[c], 0.0);
    result.explained_variance_ratio[c] = ev / total_variance;
  }
  return result;
}

}  // namespace fgp
