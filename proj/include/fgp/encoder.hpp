#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgp/archgraph.hpp"
#include "fgp/diffmath.hpp"

namespace fgp {

struct EncoderConfig {
  std::size_t hidden_dim = 64;  // d
  std::size_t num_layers = 3;   // L
  bool epsilon_learnable = false;
  double epsilon = 0.0;
  std::vector<std::size_t> decoder_dims = {64};  // hidden widths of the decoder MLP
  std::vector<std::size_t> head_dims = {64};     // hidden widths of both scalar heads
};

struct LinearLayer {
  Parameter weight;  // in x out
  Parameter bias;    // 1 x out
};

// linear -> ReLU -> ... -> linear (no activation after the last layer)
struct Mlp {
  std::vector<LinearLayer> layers;
};

// One round of sum-aggregation message passing:
//   h' = MLP((1 + eps) * h + sum_{j in N(i)} h_j)
// with MLP = linear -> ReLU -> linear at hidden width d.
struct GinLayer {
  LinearLayer lin1;
  LinearLayer lin2;
  Parameter epsilon;  // 1x1, consulted only when learnable
  bool epsilon_learnable = false;
  double epsilon_value = 0.0;
};

// Message-passing encoder (theta) plus decoder (phi), performance regressor
// (xi) and proxy head (rho).
struct EncoderModel {
  EncoderConfig config;
  std::size_t vocab_size = 0;
  std::size_t surrogate_dim = 0;

  std::vector<GinLayer> layers;
  Mlp decoder;
  Mlp regressor;
  Mlp proxy_head;

  std::vector<Parameter*> encoder_params();
  std::vector<Parameter*> pretrain_params();  // theta, phi, rho
  std::vector<Parameter*> finetune_params();  // theta, xi
  std::vector<Parameter*> all_params();
};

// Weights drawn Glorot-uniform from one seeded stream, biases zero.
EncoderModel make_encoder(const EncoderConfig& config, std::size_t vocab_size,
                          std::size_t surrogate_dim, std::uint64_t seed);

// L message-passing rounds followed by mean pooling over nodes; returns a
// differentiable 1 x d embedding. Expects the graph undirected (see
// undirect()); features must match the model's vocabulary size.
DiffValue encode(Tape& tape, EncoderModel& model, const ArchGraph& graph);

DiffValue decode_surrogate(Tape& tape, EncoderModel& model, DiffValue z);  // 1 x k
DiffValue predict_performance(Tape& tape, EncoderModel& model, DiffValue z);  // 1 x 1
DiffValue predict_proxy(Tape& tape, EncoderModel& model, DiffValue z);        // 1 x 1

// Inference conveniences running a throwaway tape.
std::vector<double> encode_embedding(EncoderModel& model, const ArchGraph& graph);
double performance_estimate(EncoderModel& model, const ArchGraph& graph);
double proxy_estimate(EncoderModel& model, const ArchGraph& graph);

// Parameter snapshots for early stopping.
std::vector<Matrix> snapshot_params(const std::vector<Parameter*>& params);
void restore_params(const std::vector<Parameter*>& params, const std::vector<Matrix>& snapshot);

// Checkpoint JSON: header with config and metadata, then a flat map
// name -> {rows, cols, row-major values}.
void save_checkpoint(const EncoderModel& model, const std::string& path,
                     const nlohmann::json& meta = nlohmann::json::object());
EncoderModel load_checkpoint(const std::string& path);
nlohmann::json checkpoint_meta(const std::string& path);

}  // namespace fgp
