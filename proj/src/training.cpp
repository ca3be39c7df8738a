#include "fgp/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fgp/evalmetrics.hpp"
#include "fgp/io.hpp"
#include "fgp/rng.hpp"

namespace fgp {

DiffValue reconstruction_loss(Tape& tape, DiffValue predicted, DiffValue target) {
  require_same_shape(predicted.data(), target.data(), "reconstruction_loss");
  (void)tape;
  return sum(square(sub(predicted, target)));
}

DiffValue margin_ranking_loss(Tape& tape, const std::vector<DiffValue>& scores,
                              const std::vector<double>& targets, double margin) {
  if (scores.size() != targets.size())
    throw Error("ShapeMismatch", "scores and targets differ in length");
  if (scores.size() < 2) throw Error("TooFewItems", "margin_ranking_loss needs >= 2 items");
  if (margin < 0.0) throw Error("InvalidHyperparameter", "margin must be >= 0");

  const std::size_t n = scores.size();
  std::vector<double> values(n);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& m = scores[i].data();
    if (m.rows != 1 || m.cols != 1)
      throw Error("ShapeMismatch", "margin_ranking_loss expects 1x1 scores");
    values[i] = m.values[0];
    ids[i] = scores[i].id;
  }

  // Forward value and per-score hinge coefficients in one fused pass; the
  // node's backward just scales the coefficients by the upstream adjoint.
  double loss = 0.0;
  std::vector<double> coef(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(targets[i] > targets[j])) continue;
      const double hinge = margin - (values[i] - values[j]);
      if (hinge > 0.0) {
        loss += hinge;
        coef[i] -= 1.0;
        coef[j] += 1.0;
      }
    }
  }
  return tape.make_node(Matrix(1, 1, loss), [ids, coef](Tape& t, int self) {
    const double g = t.node_grad(self).values[0];
    for (std::size_t i = 0; i < ids.size(); ++i)
      t.node_grad(ids[i]).values[0] += g * coef[i];
  });
}

namespace {

void check_pretrain_config(const PretrainConfig& cfg) {
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0)
    throw Error("InvalidHyperparameter", "lambda1 and lambda2 must be >= 0");
  if (cfg.lambda1 + cfg.lambda2 <= 0.0)
    throw Error("InvalidHyperparameter", "lambda1 + lambda2 must be > 0");
  if (cfg.margin < 0.0) throw Error("InvalidHyperparameter", "margin must be >= 0");
  if (cfg.batch_size < 1 || cfg.epochs < 1)
    throw Error("InvalidHyperparameter", "batch_size and epochs must be >= 1");
}

std::vector<std::vector<std::size_t>> chunk_batches(const std::vector<std::size_t>& pool,
                                                    std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < pool.size(); start += batch_size) {
    const std::size_t end = std::min(pool.size(), start + batch_size);
    batches.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(start),
                         pool.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // A trailing singleton cannot form ranking pairs; fold it into the
  // previous batch.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

PretrainResult pretrain(EncoderModel& model, const BenchDataset& dataset,
                        const PretrainConfig& cfg) {
  check_pretrain_config(cfg);
  const std::size_t reads_before = dataset.performance_reads();

  std::vector<std::size_t> pool;
  if (cfg.train_only_pool) {
    pool = dataset.splits.train;
    if (pool.empty()) throw Error("InsufficientRecords", "train-only pool requested, no split");
  } else {
    pool.resize(dataset.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  if (pool.empty()) throw Error("InsufficientRecords", "empty pre-training pool");

  const bool use_rec = cfg.lambda1 > 0.0;
  const bool use_aux = cfg.lambda2 > 0.0;
  const std::size_t k = model.surrogate_dim;

  for (std::size_t idx : pool) {
    const ArchRecord& rec = dataset.records[idx];
    if (use_rec) {
      if (!rec.surrogate)
        throw Error("MissingSurrogates", "record " + rec.id + " has no cached surrogate");
      if (rec.surrogate->values.size() != k)
        throw Error("ShapeMismatch", "surrogate of " + rec.id + " has length " +
                                         std::to_string(rec.surrogate->values.size()) +
                                         ", model expects " + std::to_string(k));
    }
    if (use_aux && !rec.proxy)
      throw Error("MissingProxyScores", "record " + rec.id + " has no proxy score");
  }

  PretrainResult result;
  result.target_mean.assign(k, 0.0);
  result.target_std.assign(k, 1.0);
  std::vector<std::vector<double>> targets(dataset.size());
  if (use_rec) {
    for (std::size_t idx : pool)
      for (std::size_t j = 0; j < k; ++j)
        result.target_mean[j] += dataset.records[idx].surrogate->values[j];
    for (double& m : result.target_mean) m /= static_cast<double>(pool.size());
    std::vector<double> var(k, 0.0);
    for (std::size_t idx : pool)
      for (std::size_t j = 0; j < k; ++j) {
        const double d = dataset.records[idx].surrogate->values[j] - result.target_mean[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < k; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(pool.size()));
      result.target_std[j] = sd > 1e-12 ? sd : 1.0;
    }
    for (std::size_t idx : pool) {
      targets[idx].resize(k);
      for (std::size_t j = 0; j < k; ++j)
        targets[idx][j] =
            (dataset.records[idx].surrogate->values[j] - result.target_mean[j]) /
            result.target_std[j];
    }
  }

  std::vector<ArchGraph> undirected(dataset.size());
  for (std::size_t idx : pool) undirected[idx] = undirect(dataset.records[idx].graph);

  std::vector<Parameter*> params = model.pretrain_params();
  AdamW optimizer({cfg.lr, cfg.weight_decay});
  Rng rng(cfg.seed);
  Tape tape;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(pool);
    const auto batches = chunk_batches(pool, cfg.batch_size);
    double epoch_rec = 0.0, epoch_aux = 0.0, epoch_total = 0.0;

    for (const auto& batch : batches) {
      tape.reset();
      DiffValue rec_sum;
      bool have_rec = false;
      std::vector<DiffValue> proxy_preds;
      std::vector<double> proxy_targets;

      for (std::size_t idx : batch) {
        DiffValue z = encode(tape, model, undirected[idx]);
        if (use_rec) {
          DiffValue predicted = decode_surrogate(tape, model, z);
          DiffValue target = tape.leaf(Matrix::row_vector(targets[idx]));
          DiffValue li = reconstruction_loss(tape, predicted, target);
          rec_sum = have_rec ? add(rec_sum, li) : li;
          have_rec = true;
        }
        if (use_aux) {
          proxy_preds.push_back(predict_proxy(tape, model, z));
          proxy_targets.push_back(dataset.proxy(idx));
        }
      }

      DiffValue loss;
      bool have_loss = false;
      double rec_value = 0.0, aux_value = 0.0;
      if (use_rec) {
        DiffValue rec_mean = scalar_mul(1.0 / static_cast<double>(batch.size()), rec_sum);
        rec_value = rec_mean.scalar();
        loss = scalar_mul(cfg.lambda1, rec_mean);
        have_loss = true;
      }
      if (use_aux && proxy_preds.size() >= 2) {
        DiffValue aux = margin_ranking_loss(tape, proxy_preds, proxy_targets, cfg.margin);
        aux_value = aux.scalar();
        DiffValue weighted = scalar_mul(cfg.lambda2, aux);
        loss = have_loss ? add(loss, weighted) : weighted;
        have_loss = true;
      }
      if (!have_loss) continue;

      tape.backward(loss);
      optimizer.step(params);
      zero_grads(params);

      epoch_rec += rec_value;
      epoch_aux += aux_value;
      epoch_total += cfg.lambda1 * rec_value + cfg.lambda2 * aux_value;
    }

    const double inv = batches.empty() ? 0.0 : 1.0 / static_cast<double>(batches.size());
    result.trace.push_back({epoch, epoch_rec * inv, epoch_aux * inv, epoch_total * inv});
  }

  if (dataset.performance_reads() != reads_before)
    throw Error("LabelFirewall", "ground-truth performance was read during pre-training");
  return result;
}

namespace {

double validation_tau(EncoderModel& model, const std::vector<ArchGraph>& undirected_val,
                      const std::vector<double>& val_truth) {
  std::vector<double> preds;
  preds.reserve(undirected_val.size());
  for (const ArchGraph& g : undirected_val) {
    Tape tape;
    DiffValue z = encode(tape, model, g);
    preds.push_back(predict_performance(tape, model, z).scalar());
  }
  try {
    return kendall_tau(val_truth, preds);
  } catch (const Error& e) {
    if (e.kind() == "AllTied") return 0.0;
    throw;
  }
}

}  // namespace

FinetuneResult finetune(EncoderModel& model, const BenchDataset& dataset,
                        const FinetuneConfig& cfg) {
  if (!(cfg.train_ratio > 0.0) || cfg.train_ratio > 1.0)
    throw Error("InvalidHyperparameter", "train_ratio must be in (0, 1]");
  if (cfg.margin < 0.0) throw Error("InvalidHyperparameter", "margin must be >= 0");
  if (cfg.max_epochs < 1) throw Error("InvalidHyperparameter", "max_epochs must be >= 1");
  if (dataset.splits.train.empty())
    throw Error("InsufficientRecords", "dataset has no training split");

  Rng rng(cfg.seed);
  std::vector<std::size_t> train = dataset.splits.train;
  rng.shuffle(train);
  auto n_labeled = static_cast<std::size_t>(
      std::llround(cfg.train_ratio * static_cast<double>(train.size())));
  n_labeled = std::max<std::size_t>(n_labeled, 1);
  if (n_labeled < 2)
    throw Error("TooFewLabeled", "train_ratio yields " + std::to_string(n_labeled) +
                                     " labeled architectures, need >= 2");
  train.resize(n_labeled);

  std::vector<ArchGraph> labeled_graphs;
  std::vector<double> labels;
  for (std::size_t idx : train) {
    labeled_graphs.push_back(undirect(dataset.records[idx].graph));
    labels.push_back(dataset.performance(idx));
  }

  std::vector<ArchGraph> val_graphs;
  std::vector<double> val_truth;
  for (std::size_t idx : dataset.splits.validation) {
    val_graphs.push_back(undirect(dataset.records[idx].graph));
    val_truth.push_back(dataset.performance(idx));
  }

  std::vector<Parameter*> params = model.finetune_params();
  AdamW optimizer({cfg.lr, cfg.weight_decay});
  Tape tape;

  FinetuneResult result;
  result.labeled_count = n_labeled;
  result.best_val_tau = -2.0;
  std::vector<Matrix> best_snapshot;
  std::size_t stale = 0;
  std::vector<std::size_t> order(n_labeled);
  for (std::size_t i = 0; i < n_labeled; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    const auto batches = chunk_batches(order, 256);
    for (const auto& batch : batches) {
      if (batch.size() < 2) continue;
      tape.reset();
      std::vector<DiffValue> preds;
      std::vector<double> ys;
      for (std::size_t i : batch) {
        DiffValue z = encode(tape, model, labeled_graphs[i]);
        preds.push_back(predict_performance(tape, model, z));
        ys.push_back(labels[i]);
      }
      DiffValue loss = margin_ranking_loss(tape, preds, ys, cfg.margin);
      tape.backward(loss);
      optimizer.step(params);
      zero_grads(params);
    }
    result.epochs_run = epoch;

    if (!val_graphs.empty()) {
      const double tau = validation_tau(model, val_graphs, val_truth);
      if (tau > result.best_val_tau + 1e-12) {
        result.best_val_tau = tau;
        best_snapshot = snapshot_params(params);
        stale = 0;
      } else if (++stale >= cfg.patience) {
        result.early_stopped = true;
        break;
      }
    }
  }

  if (!best_snapshot.empty()) restore_params(params, best_snapshot);
  return result;
}

void rank_training_epochs(EncoderModel& model, const std::vector<ArchGraph>& undirected_graphs,
                          const std::vector<double>& labels, double margin, double lr,
                          double weight_decay, std::size_t epochs, std::uint64_t seed) {
  if (undirected_graphs.size() != labels.size())
    throw Error("ShapeMismatch", "graphs and labels differ in length");
  if (labels.size() < 2) throw Error("TooFewLabeled", "ranking training needs >= 2 items");

  std::vector<Parameter*> params = model.finetune_params();
  AdamW optimizer({lr, weight_decay});
  Rng rng(seed);
  Tape tape;
  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(order);
    const auto batches = chunk_batches(order, 256);
    for (const auto& batch : batches) {
      if (batch.size() < 2) continue;
      tape.reset();
      std::vector<DiffValue> preds;
      std::vector<double> ys;
      for (std::size_t i : batch) {
        DiffValue z = encode(tape, model, undirected_graphs[i]);
        preds.push_back(predict_performance(tape, model, z));
        ys.push_back(labels[i]);
      }
      DiffValue loss = margin_ranking_loss(tape, preds, ys, margin);
      tape.backward(loss);
      optimizer.step(params);
      zero_grads(params);
    }
  }
}

void save_loss_csv(const std::string& path, const std::vector<EpochLoss>& trace,
                   std::uint64_t seed) {
  std::ostringstream csv;
  csv << "# seed=" << seed << "\n";
  csv << "epoch,loss_rec,loss_aux,loss_total\n";
  for (const EpochLoss& row : trace) {
    csv << row.epoch << "," << format_double(row.rec) << "," << format_double(row.aux) << ","
        << format_double(row.total) << "\n";
  }
  atomic_write_file(path, csv.str());
}

}  // namespace fgp
