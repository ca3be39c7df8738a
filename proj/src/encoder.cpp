#include "fgp/encoder.hpp"

#include <cmath>

#include "fgp/io.hpp"
#include "fgp/rng.hpp"

namespace fgp {

namespace {

LinearLayer make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (double& v : w.values) v = (2.0 * rng.uniform() - 1.0) * limit;
  LinearLayer layer;
  layer.weight = Parameter(name + ".w", std::move(w));
  layer.bias = Parameter(name + ".b", Matrix(1, out));
  return layer;
}

Mlp make_mlp(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
             std::size_t out, Rng& rng) {
  Mlp mlp;
  std::size_t prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    mlp.layers.push_back(make_linear(name + ".l" + std::to_string(i), prev, hidden[i], rng));
    prev = hidden[i];
  }
  mlp.layers.push_back(make_linear(name + ".l" + std::to_string(hidden.size()), prev, out, rng));
  return mlp;
}

DiffValue mlp_forward(Tape& tape, Mlp& mlp, DiffValue x) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    x = add_rowwise(matmul(x, tape.param(mlp.layers[i].weight)),
                    tape.param(mlp.layers[i].bias));
    if (i + 1 < mlp.layers.size()) x = relu(x);
  }
  return x;
}

void collect(Mlp& mlp, std::vector<Parameter*>& out) {
  for (auto& layer : mlp.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
}

}  // namespace

std::vector<Parameter*> EncoderModel::encoder_params() {
  std::vector<Parameter*> out;
  for (auto& layer : layers) {
    out.push_back(&layer.lin1.weight);
    out.push_back(&layer.lin1.bias);
    out.push_back(&layer.lin2.weight);
    out.push_back(&layer.lin2.bias);
    if (layer.epsilon_learnable) out.push_back(&layer.epsilon);
  }
  return out;
}

std::vector<Parameter*> EncoderModel::pretrain_params() {
  std::vector<Parameter*> out = encoder_params();
  collect(decoder, out);
  collect(proxy_head, out);
  return out;
}

std::vector<Parameter*> EncoderModel::finetune_params() {
  std::vector<Parameter*> out = encoder_params();
  collect(regressor, out);
  return out;
}

std::vector<Parameter*> EncoderModel::all_params() {
  std::vector<Parameter*> out = encoder_params();
  collect(decoder, out);
  collect(regressor, out);
  collect(proxy_head, out);
  return out;
}

EncoderModel make_encoder(const EncoderConfig& config, std::size_t vocab_size,
                          std::size_t surrogate_dim, std::uint64_t seed) {
  if (config.hidden_dim < 1 || config.num_layers < 1)
    throw Error("InvalidHyperparameter", "hidden_dim and num_layers must be >= 1");
  if (vocab_size < 1 || surrogate_dim < 1)
    throw Error("InvalidHyperparameter", "vocab_size and surrogate_dim must be >= 1");

  EncoderModel model;
  model.config = config;
  model.vocab_size = vocab_size;
  model.surrogate_dim = surrogate_dim;

  Rng rng(seed);
  const std::size_t d = config.hidden_dim;
  std::size_t in_dim = vocab_size;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    GinLayer layer;
    const std::string name = "enc.layer" + std::to_string(l);
    layer.lin1 = make_linear(name + ".lin1", in_dim, d, rng);
    layer.lin2 = make_linear(name + ".lin2", d, d, rng);
    layer.epsilon = Parameter(name + ".eps", Matrix(1, 1, config.epsilon));
    layer.epsilon_learnable = config.epsilon_learnable;
    layer.epsilon_value = config.epsilon;
    model.layers.push_back(std::move(layer));
    in_dim = d;
  }
  model.decoder = make_mlp("dec", d, config.decoder_dims, surrogate_dim, rng);
  model.regressor = make_mlp("reg", d, config.head_dims, 1, rng);
  model.proxy_head = make_mlp("proxy", d, config.head_dims, 1, rng);
  return model;
}

DiffValue encode(Tape& tape, EncoderModel& model, const ArchGraph& graph) {
  if (graph.features.cols != model.vocab_size) {
    throw Error("ShapeMismatch", "graph features have " + std::to_string(graph.features.cols) +
                                     " columns, model expects " +
                                     std::to_string(model.vocab_size));
  }
  const std::size_t n = graph.num_nodes();
  Matrix adjacency(n, n);
  for (const Edge& e : graph.edges) adjacency.at(e.dst, e.src) = 1.0;

  DiffValue h = tape.leaf(graph.features);
  DiffValue a = tape.leaf(std::move(adjacency));
  for (GinLayer& layer : model.layers) {
    DiffValue neighbors = matmul(a, h);
    DiffValue self_term;
    if (layer.epsilon_learnable) {
      DiffValue one_plus_eps = add(tape.constant(1.0), tape.param(layer.epsilon));
      self_term = scale(one_plus_eps, h);
    } else {
      self_term = scalar_mul(1.0 + layer.epsilon_value, h);
    }
    DiffValue s = add(self_term, neighbors);
    DiffValue hidden = relu(add_rowwise(matmul(s, tape.param(layer.lin1.weight)),
                                        tape.param(layer.lin1.bias)));
    h = add_rowwise(matmul(hidden, tape.param(layer.lin2.weight)),
                    tape.param(layer.lin2.bias));
  }
  return mean_rows(h);
}

DiffValue decode_surrogate(Tape& tape, EncoderModel& model, DiffValue z) {
  return mlp_forward(tape, model.decoder, z);
}

DiffValue predict_performance(Tape& tape, EncoderModel& model, DiffValue z) {
  return mlp_forward(tape, model.regressor, z);
}

DiffValue predict_proxy(Tape& tape, EncoderModel& model, DiffValue z) {
  return mlp_forward(tape, model.proxy_head, z);
}

std::vector<double> encode_embedding(EncoderModel& model, const ArchGraph& graph) {
  Tape tape;
  DiffValue z = encode(tape, model, graph);
  return z.data().values;
}

double performance_estimate(EncoderModel& model, const ArchGraph& graph) {
  Tape tape;
  DiffValue z = encode(tape, model, graph);
  return predict_performance(tape, model, z).scalar();
}

double proxy_estimate(EncoderModel& model, const ArchGraph& graph) {
  Tape tape;
  DiffValue z = encode(tape, model, graph);
  return predict_proxy(tape, model, z).scalar();
}

std::vector<Matrix> snapshot_params(const std::vector<Parameter*>& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore_params(const std::vector<Parameter*>& params, const std::vector<Matrix>& snapshot) {
  if (params.size() != snapshot.size())
    throw Error("ShapeMismatch", "snapshot size does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.values}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != m.size()) throw Error("SchemaError", "matrix values length mismatch");
  m.values = values;
  return m;
}

}  // namespace

void save_checkpoint(const EncoderModel& model, const std::string& path,
                     const nlohmann::json& meta) {
  nlohmann::json j;
  j["schema"] = "arch-encoder-checkpoint/v1";
  j["config"] = {{"hidden_dim", model.config.hidden_dim},
                 {"num_layers", model.config.num_layers},
                 {"epsilon_learnable", model.config.epsilon_learnable},
                 {"epsilon", model.config.epsilon},
                 {"decoder_dims", model.config.decoder_dims},
                 {"head_dims", model.config.head_dims}};
  j["vocab_size"] = model.vocab_size;
  j["surrogate_dim"] = model.surrogate_dim;
  j["meta"] = meta;
  nlohmann::json params = nlohmann::json::object();
  EncoderModel& mutable_model = const_cast<EncoderModel&>(model);
  for (const Parameter* p : mutable_model.all_params()) params[p->name] = matrix_to_json(p->value);
  j["params"] = std::move(params);
  atomic_write_file(path, j.dump(2) + "\n");
}

EncoderModel load_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("checkpoint: ") + e.what());
  }
  if (j.value("schema", "") != "arch-encoder-checkpoint/v1")
    throw Error("SchemaError", "unknown checkpoint schema");

  EncoderConfig config;
  const auto& c = j.at("config");
  config.hidden_dim = c.at("hidden_dim").get<std::size_t>();
  config.num_layers = c.at("num_layers").get<std::size_t>();
  config.epsilon_learnable = c.at("epsilon_learnable").get<bool>();
  config.epsilon = c.at("epsilon").get<double>();
  config.decoder_dims = c.at("decoder_dims").get<std::vector<std::size_t>>();
  config.head_dims = c.at("head_dims").get<std::vector<std::size_t>>();

  EncoderModel model = make_encoder(config, j.at("vocab_size").get<std::size_t>(),
                                    j.at("surrogate_dim").get<std::size_t>(), 0);
  const auto& params = j.at("params");
  for (Parameter* p : model.all_params()) {
    if (!params.contains(p->name)) throw Error("SchemaError", "missing parameter " + p->name);
    Matrix m = matrix_from_json(params.at(p->name));
    if (!m.same_shape(p->value))
      throw Error("SchemaError", "parameter " + p->name + " has the wrong shape");
    p->value = std::move(m);
  }
  return model;
}

nlohmann::json checkpoint_meta(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("ParseError", std::string("checkpoint: ") + e.what());
  }
  return j.value("meta", nlohmann::json::object());
}

}  // namespace fgp
