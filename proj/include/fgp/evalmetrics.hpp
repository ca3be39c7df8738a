#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace fgp {

// Ranking quality of a predictor against ground truth. tau is the
// tie-corrected tau-b variant; precision_at maps percent -> overlap
// fraction of the true and predicted top sets.
struct EvalReport {
  double kendall_tau = 0.0;
  std::map<double, double> precision_at;
  std::size_t n = 0;
  std::string tau_variant = "tau-b";

  nlohmann::json to_json() const;
};

// Tau-b: (concordant - discordant) / sqrt((n0 - t_truth)(n0 - t_pred)).
// Throws TooFewItems for n < 2 and AllTied when a side is fully tied.
double kendall_tau(const std::vector<double>& truth, const std::vector<double>& pred);

// |top(truth) ∩ top(pred)| / |top(truth)| with top selecting the
// ceil(percent * n / 100) highest values; cutoff ties break by index.
double precision_at_percent(const std::vector<double>& truth, const std::vector<double>& pred,
                            double percent);

EvalReport evaluate_ranking(const std::vector<double>& truth, const std::vector<double>& pred,
                            const std::vector<double>& percents = {1.0, 5.0});

// Centered PCA projection via eigendecomposition of the sample covariance.
// Component signs are fixed so each eigenvector's first nonzero loading is
// positive.
struct PcaResult {
  std::vector<std::vector<double>> points;      // n x out_dim
  std::vector<double> explained_variance_ratio; // out_dim entries
};

PcaResult pca_project(const std::vector<std::vector<double>>& vectors, std::size_t out_dim = 2);

}  // namespace fgp
