#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgp/benchdata.hpp"
#include "fgp/diffmath.hpp"
#include "fgp/encoder.hpp"

namespace fgp {

struct PretrainConfig {
  double lambda1 = 0.5;   // reconstruction weight
  double lambda2 = 0.5;   // auxiliary proxy-ranking weight
  double margin = 0.1;    // m, auxiliary ranking margin
  std::size_t batch_size = 256;
  std::size_t epochs = 200;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  std::uint64_t seed = 0;
  bool train_only_pool = false;  // default: pre-train across the whole dataset
};

struct FinetuneConfig {
  double margin = 0.1;       // m'
  double train_ratio = 0.01; // labeled fraction of the training split
  std::size_t max_epochs = 300;
  std::size_t patience = 25; // early-stop patience on validation tau
  double lr = 1e-3;
  double weight_decay = 1e-6;
  std::uint64_t seed = 0;
};

struct EpochLoss {
  std::size_t epoch = 0;  // 1-based
  double rec = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

struct PretrainResult {
  std::vector<EpochLoss> trace;
  // Per-dimension normalization applied to the surrogate targets; recorded
  // in checkpoint metadata so later evaluation stays consistent.
  std::vector<double> target_mean;
  std::vector<double> target_std;
};

struct FinetuneResult {
  std::size_t epochs_run = 0;
  std::size_t labeled_count = 0;
  double best_val_tau = 0.0;
  bool early_stopped = false;
};

// ||target - predicted||_2^2 as a differentiable scalar (sum over the k
// dimensions; callers average across a batch).
DiffValue reconstruction_loss(Tape& tape, DiffValue predicted, DiffValue target);

// sum over ordered pairs with target_i > target_j of
// max(0, margin - (score_i - score_j)); ties in targets are skipped.
// Recorded as a single fused tape node.
DiffValue margin_ranking_loss(Tape& tape, const std::vector<DiffValue>& scores,
                              const std::vector<double>& targets, double margin);

// Self-supervised pre-training: encode, decode, then
// L = lambda1 * mean(L_rec) + lambda2 * L_aux per minibatch. Ground-truth
// performance is never read; the dataset's read counter is checked.
PretrainResult pretrain(EncoderModel& model, const BenchDataset& dataset,
                        const PretrainConfig& cfg);

// Supervised fine-tuning of theta and xi with the margin-ranking loss on a
// seeded train_ratio subset of the training split; early stop on validation
// Kendall's tau, best checkpoint restored.
FinetuneResult finetune(EncoderModel& model, const BenchDataset& dataset,
                        const FinetuneConfig& cfg);

// Margin-ranking epochs over an explicit labeled set (no validation, no
// early stop); the search loop reuses this as pools grow.
void rank_training_epochs(EncoderModel& model, const std::vector<ArchGraph>& undirected_graphs,
                          const std::vector<double>& labels, double margin, double lr,
                          double weight_decay, std::size_t epochs, std::uint64_t seed);

// CSV trace: "# seed=..." then epoch,rec,aux,total rows. Atomic.
void save_loss_csv(const std::string& path, const std::vector<EpochLoss>& trace,
                   std::uint64_t seed);

}  // namespace fgp
