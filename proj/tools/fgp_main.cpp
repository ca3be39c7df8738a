// Command-line pipeline: generate, surrogate, pretrain, finetune, eval,
// nas, pca. Every command reads a JSON config plus flag overrides, writes
// its outputs atomically into a run directory, and drops a resolved-config
// snapshot beside them.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "fgp/benchdata.hpp"
#include "fgp/encoder.hpp"
#include "fgp/evalmetrics.hpp"
#include "fgp/io.hpp"
#include "fgp/nassearch.hpp"
#include "fgp/surrogate.hpp"
#include "fgp/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 97;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
  std::string out_dir;
  std::size_t jobs = 1;
  bool baseline = false;
  bool random_arm = false;
  std::string dataset;
  std::string pretrained;
  std::string checkpoint;
  std::string predictions;
};

void check_keys(const json& obj, const std::string& section,
                const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw fgp::Error("ConfigError", "section '" + section + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw fgp::Error("ConfigError", "unknown key '" + key + "' in section '" + section + "'");
  }
}

json section(const json& cfg, const std::string& name) {
  return cfg.contains(name) ? cfg.at(name) : json::object();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw fgp::Error("ConfigError", "config file '" + path + "' not found");
  json cfg;
  try {
    cfg = json::parse(fgp::read_file(path));
  } catch (const json::exception& e) {
    throw fgp::Error("ConfigError", "config parse: " + std::string(e.what()));
  }
  check_keys(cfg, "(top level)",
             {"seed", "out_dir", "space", "generate", "surrogate", "splits", "encoder",
              "pretrain", "finetune", "eval", "nas", "paths"});
  // every section is key-checked up front, including ones the current
  // command does not read
  check_keys(section(cfg, "space"), "space",
             {"family", "min_nodes", "max_nodes", "max_edges", "vocab", "input_op", "output_op"});
  check_keys(section(cfg, "generate"), "generate", {"count", "label", "oracle_seed", "oracle"});
  check_keys(section(section(cfg, "generate"), "oracle"), "generate.oracle",
             {"op_weights", "unknown_op_weight_span", "depth_width_coeff", "noise_std",
              "proxy_noise_std"});
  check_keys(section(cfg, "surrogate"), "surrogate", {"k", "sigma", "alpha", "aggregation"});
  check_keys(section(cfg, "splits"), "splits", {"train_frac", "val_count", "seed"});
  check_keys(section(cfg, "encoder"), "encoder",
             {"hidden_dim", "num_layers", "epsilon_learnable", "epsilon", "decoder_dims",
              "head_dims"});
  check_keys(section(cfg, "pretrain"), "pretrain",
             {"lambda1", "lambda2", "margin", "batch_size", "epochs", "lr", "weight_decay",
              "pool"});
  check_keys(section(cfg, "finetune"), "finetune",
             {"margin", "train_ratio", "max_epochs", "patience", "lr", "weight_decay"});
  check_keys(section(cfg, "eval"), "eval", {"percents"});
  check_keys(section(cfg, "nas"), "nas",
             {"budget", "initial_pool", "per_round", "mutants_per_arch", "finetune_epochs",
              "margin", "lr", "weight_decay", "oracle_seed", "reference_count"});
  check_keys(section(cfg, "paths"), "paths", {"dataset", "checkpoint", "pretrained", "predictions"});
  return cfg;
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw fgp::Error("ConfigError", "bad value for '" + key + "': " + e.what());
  }
}

std::uint64_t resolve_seed(const CliOptions& opt, const json& cfg) {
  if (opt.seed) return *opt.seed;
  return get_or<std::uint64_t>(cfg, "seed", kDefaultSeed);
}

std::string resolve_path(const std::string& flag_value, const json& paths,
                         const std::string& key) {
  if (!flag_value.empty()) return flag_value;
  return get_or<std::string>(paths, key, "");
}

std::string require_input(const std::string& path, const std::string& what) {
  if (path.empty())
    throw fgp::Error("ConfigError", "missing required " + what + " path");
  if (!fs::exists(path))
    throw fgp::Error("ConfigError", what + " '" + path + "' does not exist");
  return path;
}

fs::path make_run_dir(const CliOptions& opt, const json& cfg, std::uint64_t seed) {
  if (!opt.run_dir.empty()) {
    fs::create_directories(opt.run_dir);
    return opt.run_dir;
  }
  std::string base = opt.out_dir;
  if (base.empty()) base = get_or<std::string>(cfg, "out_dir", "");
  if (base.empty()) {
    if (const char* env = std::getenv("FGP_OUT_DIR")) base = env;
  }
  if (base.empty()) base = "runs";

  std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", std::localtime(&now));
  std::string name = std::string(stamp) + "-seed" + std::to_string(seed);
  fs::path dir = fs::path(base) / name;
  for (int suffix = 2; fs::exists(dir); ++suffix)
    dir = fs::path(base) / (name + "-" + std::to_string(suffix));
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  fgp::atomic_write_file(path.string(), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// config -> domain objects

fgp::SpaceSpec space_from_config(const json& cfg) {
  const json s = section(cfg, "space");
  check_keys(s, "space",
             {"family", "min_nodes", "max_nodes", "max_edges", "vocab", "input_op", "output_op"});
  const std::string family = get_or<std::string>(s, "family", "cell201-like");
  fgp::SpaceSpec spec = fgp::space_family_from_string(family) == fgp::SpaceFamily::Cell201Like
                            ? fgp::SpaceSpec::cell201_like()
                            : fgp::SpaceSpec::cell101_like();
  spec.min_nodes = get_or<std::size_t>(s, "min_nodes", spec.min_nodes);
  spec.max_nodes = get_or<std::size_t>(s, "max_nodes", spec.max_nodes);
  spec.max_edges = get_or<std::size_t>(s, "max_edges", spec.max_edges);
  if (s.contains("vocab"))
    spec.vocab = fgp::OpVocabulary(s.at("vocab").get<std::vector<std::string>>());
  spec.input_op = get_or<std::string>(s, "input_op", spec.input_op);
  spec.output_op = get_or<std::string>(s, "output_op", spec.output_op);
  fgp::validate_spec(spec);
  return spec;
}

json space_to_json(const fgp::SpaceSpec& spec) {
  return {{"family", fgp::to_string(spec.family)}, {"min_nodes", spec.min_nodes},
          {"max_nodes", spec.max_nodes},           {"max_edges", spec.max_edges},
          {"vocab", spec.vocab.names()},           {"input_op", spec.input_op},
          {"output_op", spec.output_op}};
}

fgp::OracleConfig oracle_from_config(const json& gen) {
  const json o = section(gen, "oracle");
  check_keys(o, "generate.oracle",
             {"op_weights", "unknown_op_weight_span", "depth_width_coeff", "noise_std",
              "proxy_noise_std"});
  fgp::OracleConfig cfg;
  if (o.contains("op_weights"))
    cfg.op_weights = o.at("op_weights").get<std::map<std::string, double>>();
  cfg.unknown_op_weight_span =
      get_or<double>(o, "unknown_op_weight_span", cfg.unknown_op_weight_span);
  cfg.depth_width_coeff = get_or<double>(o, "depth_width_coeff", cfg.depth_width_coeff);
  cfg.noise_std = get_or<double>(o, "noise_std", cfg.noise_std);
  cfg.proxy_noise_std = get_or<double>(o, "proxy_noise_std", cfg.proxy_noise_std);
  return cfg;
}

json oracle_to_json(const fgp::OracleConfig& cfg) {
  return {{"op_weights", cfg.op_weights},
          {"unknown_op_weight_span", cfg.unknown_op_weight_span},
          {"depth_width_coeff", cfg.depth_width_coeff},
          {"noise_std", cfg.noise_std},
          {"proxy_noise_std", cfg.proxy_noise_std}};
}

struct SurrogateSettings {
  std::size_t k = 8;
  double sigma = 0.1;
  double alpha = 0.5;
  std::string aggregation = "sum";
};

SurrogateSettings surrogate_from_config(const json& cfg) {
  const json s = section(cfg, "surrogate");
  check_keys(s, "surrogate", {"k", "sigma", "alpha", "aggregation"});
  SurrogateSettings out;
  out.k = get_or<std::size_t>(s, "k", out.k);
  out.sigma = get_or<double>(s, "sigma", out.sigma);
  out.alpha = get_or<double>(s, "alpha", out.alpha);
  out.aggregation = get_or<std::string>(s, "aggregation", out.aggregation);
  return out;
}

fgp::EncoderConfig encoder_from_config(const json& cfg) {
  const json e = section(cfg, "encoder");
  check_keys(e, "encoder",
             {"hidden_dim", "num_layers", "epsilon_learnable", "epsilon", "decoder_dims",
              "head_dims"});
  fgp::EncoderConfig out;
  out.hidden_dim = get_or<std::size_t>(e, "hidden_dim", out.hidden_dim);
  out.num_layers = get_or<std::size_t>(e, "num_layers", out.num_layers);
  out.epsilon_learnable = get_or<bool>(e, "epsilon_learnable", out.epsilon_learnable);
  out.epsilon = get_or<double>(e, "epsilon", out.epsilon);
  out.decoder_dims = get_or<std::vector<std::size_t>>(e, "decoder_dims", out.decoder_dims);
  out.head_dims = get_or<std::vector<std::size_t>>(e, "head_dims", out.head_dims);
  return out;
}

json encoder_to_json(const fgp::EncoderConfig& cfg) {
  return {{"hidden_dim", cfg.hidden_dim},
          {"num_layers", cfg.num_layers},
          {"epsilon_learnable", cfg.epsilon_learnable},
          {"epsilon", cfg.epsilon},
          {"decoder_dims", cfg.decoder_dims},
          {"head_dims", cfg.head_dims}};
}

struct SplitSettings {
  double train_frac = 0.5;
  std::size_t val_count = 40;
  std::uint64_t seed = 13;  // independent of the run seed: splits define the dataset
};

SplitSettings splits_from_config(const json& cfg) {
  const json s = section(cfg, "splits");
  check_keys(s, "splits", {"train_frac", "val_count", "seed"});
  SplitSettings out;
  out.train_frac = get_or<double>(s, "train_frac", out.train_frac);
  out.val_count = get_or<std::size_t>(s, "val_count", out.val_count);
  out.seed = get_or<std::uint64_t>(s, "seed", out.seed);
  return out;
}

fgp::PretrainConfig pretrain_from_config(const json& cfg, std::uint64_t seed) {
  const json p = section(cfg, "pretrain");
  check_keys(p, "pretrain",
             {"lambda1", "lambda2", "margin", "batch_size", "epochs", "lr", "weight_decay",
              "pool"});
  fgp::PretrainConfig out;
  out.lambda1 = get_or<double>(p, "lambda1", out.lambda1);
  out.lambda2 = get_or<double>(p, "lambda2", out.lambda2);
  out.margin = get_or<double>(p, "margin", out.margin);
  out.batch_size = get_or<std::size_t>(p, "batch_size", out.batch_size);
  out.epochs = get_or<std::size_t>(p, "epochs", out.epochs);
  out.lr = get_or<double>(p, "lr", out.lr);
  out.weight_decay = get_or<double>(p, "weight_decay", out.weight_decay);
  const std::string pool = get_or<std::string>(p, "pool", "all");
  if (pool != "all" && pool != "train")
    throw fgp::Error("ConfigError", "pretrain.pool must be 'all' or 'train'");
  out.train_only_pool = pool == "train";
  out.seed = seed;
  return out;
}

fgp::FinetuneConfig finetune_from_config(const json& cfg, std::uint64_t seed) {
  const json f = section(cfg, "finetune");
  check_keys(f, "finetune",
             {"margin", "train_ratio", "max_epochs", "patience", "lr", "weight_decay"});
  fgp::FinetuneConfig out;
  out.margin = get_or<double>(f, "margin", out.margin);
  out.train_ratio = get_or<double>(f, "train_ratio", out.train_ratio);
  out.max_epochs = get_or<std::size_t>(f, "max_epochs", out.max_epochs);
  out.patience = get_or<std::size_t>(f, "patience", out.patience);
  out.lr = get_or<double>(f, "lr", out.lr);
  out.weight_decay = get_or<double>(f, "weight_decay", out.weight_decay);
  out.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// commands

int cmd_generate(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const fgp::SpaceSpec spec = space_from_config(cfg);

  const json gen = section(cfg, "generate");
  check_keys(gen, "generate", {"count", "label", "oracle_seed", "oracle"});
  const auto count = get_or<std::size_t>(gen, "count", 2000);
  const bool label = get_or<bool>(gen, "label", true);
  const auto oracle_seed = get_or<std::uint64_t>(gen, "oracle_seed", 7);
  const fgp::OracleConfig oracle = oracle_from_config(gen);

  fgp::BenchDataset dataset = fgp::generate_space(spec, count, seed);
  if (label) fgp::apply_oracle(dataset, oracle, oracle_seed);

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  fgp::save_jsonl(dataset, (run_dir / "dataset.jsonl").string());

  json resolved = {{"command", "generate"},        {"seed", seed},
                   {"space", space_to_json(spec)}, {"count", count},
                   {"label", label},               {"oracle_seed", oracle_seed},
                   {"oracle", oracle_to_json(oracle)}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "dataset.jsonl").string() << "\n";
  return 0;
}

int cmd_surrogate(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const json paths = section(cfg, "paths");
  check_keys(paths, "paths", {"dataset", "checkpoint", "pretrained", "predictions"});
  const std::string dataset_path =
      require_input(resolve_path(opt.dataset, paths, "dataset"), "dataset");
  const SurrogateSettings s = surrogate_from_config(cfg);

  fgp::BenchDataset dataset = fgp::load_jsonl(dataset_path);
  fgp::SurrogateParams params = fgp::init_params(dataset.vocab, s.k, s.sigma, s.alpha, seed);
  params.aggregation = fgp::aggregation_from_string(s.aggregation);

  std::vector<fgp::ArchGraph> graphs;
  graphs.reserve(dataset.size());
  for (const auto& rec : dataset.records) graphs.push_back(rec.graph);
  const auto surrogates = fgp::batch_surrogates(graphs, params, opt.jobs);
  for (std::size_t i = 0; i < dataset.size(); ++i) dataset.records[i].surrogate = surrogates[i];
  dataset.surrogate_dim = s.k;

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  fgp::save_jsonl(dataset, (run_dir / "dataset.jsonl").string());
  std::vector<std::string> ids;
  for (const auto& rec : dataset.records) ids.push_back(rec.id);
  fgp::save_surrogates_csv((run_dir / "surrogates.csv").string(), ids, surrogates, seed);

  json resolved = {{"command", "surrogate"},
                   {"seed", seed},
                   {"dataset", dataset_path},
                   {"surrogate",
                    {{"k", s.k},
                     {"sigma", s.sigma},
                     {"alpha", s.alpha},
                     {"aggregation", s.aggregation}}},
                   {"jobs", opt.jobs}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "dataset.jsonl").string() << "\n";
  return 0;
}

int cmd_pretrain(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const json paths = section(cfg, "paths");
  check_keys(paths, "paths", {"dataset", "checkpoint", "pretrained", "predictions"});
  const std::string dataset_path =
      require_input(resolve_path(opt.dataset, paths, "dataset"), "dataset");

  fgp::BenchDataset dataset = fgp::load_jsonl(dataset_path);
  if (!dataset.surrogate_dim)
    throw fgp::Error("MissingSurrogates",
                     "dataset has no cached surrogates; run the surrogate command first");

  const SplitSettings split = splits_from_config(cfg);
  fgp::PretrainConfig pre = pretrain_from_config(cfg, seed);
  if (pre.train_only_pool)
    fgp::make_splits(dataset, split.train_frac, split.val_count, split.seed);

  const fgp::EncoderConfig enc_cfg = encoder_from_config(cfg);
  fgp::EncoderModel model =
      fgp::make_encoder(enc_cfg, dataset.vocab.size(), *dataset.surrogate_dim, seed);

  const fgp::PretrainResult result = fgp::pretrain(model, dataset, pre);

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  json meta = {{"phase", "pretrained"},
               {"seed", seed},
               {"lambda1", pre.lambda1},
               {"lambda2", pre.lambda2},
               {"surrogate_target_mean", result.target_mean},
               {"surrogate_target_std", result.target_std}};
  fgp::save_checkpoint(model, (run_dir / "checkpoint.json").string(), meta);
  fgp::save_loss_csv((run_dir / "loss.csv").string(), result.trace, seed);

  json resolved = {{"command", "pretrain"},
                   {"seed", seed},
                   {"dataset", dataset_path},
                   {"encoder", encoder_to_json(enc_cfg)},
                   {"pretrain",
                    {{"lambda1", pre.lambda1},
                     {"lambda2", pre.lambda2},
                     {"margin", pre.margin},
                     {"batch_size", pre.batch_size},
                     {"epochs", pre.epochs},
                     {"lr", pre.lr},
                     {"weight_decay", pre.weight_decay},
                     {"pool", pre.train_only_pool ? "train" : "all"}}}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_finetune(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const json paths = section(cfg, "paths");
  check_keys(paths, "paths", {"dataset", "checkpoint", "pretrained", "predictions"});
  const std::string dataset_path =
      require_input(resolve_path(opt.dataset, paths, "dataset"), "dataset");

  std::string pretrained_path;
  if (!opt.baseline)
    pretrained_path =
        require_input(resolve_path(opt.pretrained, paths, "pretrained"), "pretrained checkpoint");

  fgp::BenchDataset dataset = fgp::load_jsonl(dataset_path);
  const SplitSettings split = splits_from_config(cfg);
  fgp::make_splits(dataset, split.train_frac, split.val_count, split.seed);

  fgp::EncoderModel model = [&] {
    if (!opt.baseline) return fgp::load_checkpoint(pretrained_path);
    const std::size_t k = dataset.surrogate_dim.value_or(surrogate_from_config(cfg).k);
    return fgp::make_encoder(encoder_from_config(cfg), dataset.vocab.size(), k, seed);
  }();

  const fgp::FinetuneConfig fin = finetune_from_config(cfg, seed);
  const fgp::FinetuneResult result = fgp::finetune(model, dataset, fin);

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  json meta = {{"phase", "finetuned"},
               {"seed", seed},
               {"baseline", opt.baseline},
               {"pretrained", opt.baseline ? json() : json(pretrained_path)},
               {"labeled_count", result.labeled_count},
               {"epochs_run", result.epochs_run},
               {"best_val_tau", result.best_val_tau}};
  fgp::save_checkpoint(model, (run_dir / "checkpoint.json").string(), meta);

  json resolved = {{"command", "finetune"},
                   {"seed", seed},
                   {"dataset", dataset_path},
                   {"baseline", opt.baseline},
                   {"splits",
                    {{"train_frac", split.train_frac},
                     {"val_count", split.val_count},
                     {"seed", split.seed}}},
                   {"finetune",
                    {{"margin", fin.margin},
                     {"train_ratio", fin.train_ratio},
                     {"max_epochs", fin.max_epochs},
                     {"patience", fin.patience},
                     {"lr", fin.lr},
                     {"weight_decay", fin.weight_decay}}}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "checkpoint.json").string() << "\n";
  return 0;
}

std::map<std::string, double> load_predictions_csv(const std::string& path) {
  std::istringstream in(fgp::read_file(path));
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw fgp::Error("ParseError",
                       "predictions line " + std::to_string(line_no) + ": expected 'id,value'");
    const std::string id = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    if (id == "id") continue;  // header row
    try {
      out[id] = std::stod(value);
    } catch (const std::exception&) {
      throw fgp::Error("ParseError",
                       "predictions line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

int cmd_eval(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const json paths = section(cfg, "paths");
  check_keys(paths, "paths", {"dataset", "checkpoint", "pretrained", "predictions"});
  const std::string dataset_path =
      require_input(resolve_path(opt.dataset, paths, "dataset"), "dataset");

  const json eval_cfg = section(cfg, "eval");
  check_keys(eval_cfg, "eval", {"percents"});
  const auto percents = get_or<std::vector<double>>(eval_cfg, "percents", {1.0, 5.0});

  fgp::BenchDataset dataset = fgp::load_jsonl(dataset_path);
  const SplitSettings split = splits_from_config(cfg);
  fgp::make_splits(dataset, split.train_frac, split.val_count, split.seed);

  const std::string predictions_path = resolve_path(opt.predictions, paths, "predictions");
  std::vector<double> truth, pred;
  if (!predictions_path.empty()) {
    require_input(predictions_path, "predictions");
    const auto by_id = load_predictions_csv(predictions_path);
    for (std::size_t idx : dataset.splits.test) {
      const auto it = by_id.find(dataset.records[idx].id);
      if (it == by_id.end())
        throw fgp::Error("SchemaError", "predictions file lacks id " + dataset.records[idx].id);
      truth.push_back(dataset.performance(idx));
      pred.push_back(it->second);
    }
  } else {
    const std::string checkpoint_path =
        require_input(resolve_path(opt.checkpoint, paths, "checkpoint"), "checkpoint");
    fgp::EncoderModel model = fgp::load_checkpoint(checkpoint_path);
    for (std::size_t idx : dataset.splits.test) {
      fgp::ArchGraph u = fgp::undirect(dataset.records[idx].graph);
      truth.push_back(dataset.performance(idx));
      pred.push_back(fgp::performance_estimate(model, u));
    }
  }

  const fgp::EvalReport report = fgp::evaluate_ranking(truth, pred, percents);
  json out = report.to_json();
  out["schema"] = "eval-report/v1";
  out["seed"] = seed;

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  write_json(run_dir / "eval.json", out);

  json resolved = {{"command", "eval"},
                   {"seed", seed},
                   {"dataset", dataset_path},
                   {"percents", percents},
                   {"splits",
                    {{"train_frac", split.train_frac},
                     {"val_count", split.val_count},
                     {"seed", split.seed}}}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "eval.json").string() << "\n";
  return 0;
}

int cmd_nas(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const fgp::SpaceSpec spec = space_from_config(cfg);
  const json paths = section(cfg, "paths");
  check_keys(paths, "paths", {"dataset", "checkpoint", "pretrained", "predictions"});

  const json nas = section(cfg, "nas");
  check_keys(nas, "nas",
             {"budget", "initial_pool", "per_round", "mutants_per_arch", "finetune_epochs",
              "margin", "lr", "weight_decay", "oracle_seed", "reference_count"});
  fgp::SearchConfig search;
  search.budget = get_or<std::size_t>(nas, "budget", search.budget);
  search.initial_pool = get_or<std::size_t>(nas, "initial_pool", search.initial_pool);
  search.per_round = get_or<std::size_t>(nas, "per_round", search.per_round);
  search.mutants_per_arch = get_or<std::size_t>(nas, "mutants_per_arch", search.mutants_per_arch);
  search.finetune_epochs = get_or<std::size_t>(nas, "finetune_epochs", search.finetune_epochs);
  search.margin = get_or<double>(nas, "margin", search.margin);
  search.lr = get_or<double>(nas, "lr", search.lr);
  search.weight_decay = get_or<double>(nas, "weight_decay", search.weight_decay);
  const auto oracle_seed = get_or<std::uint64_t>(nas, "oracle_seed", 7);
  const auto reference_count = get_or<std::size_t>(nas, "reference_count", 1000);

  const fgp::OracleConfig oracle = oracle_from_config(section(cfg, "generate"));
  fgp::EvalFn evaluate = [&spec, oracle, oracle_seed](const fgp::ArchGraph& g) {
    return fgp::synthetic_oracle(g, spec.vocab, oracle, oracle_seed).performance;
  };

  // Regret is measured against the best oracle score over a fixed reference
  // sample: the provided dataset when given, else a fresh one.
  double reference_max = -1e300;
  const std::string dataset_path = resolve_path(opt.dataset, paths, "dataset");
  if (!dataset_path.empty()) {
    require_input(dataset_path, "dataset");
    const fgp::BenchDataset dataset = fgp::load_jsonl(dataset_path);
    for (std::size_t i = 0; i < dataset.size(); ++i)
      reference_max = std::max(reference_max, dataset.performance(i));
  } else {
    fgp::BenchDataset reference = fgp::generate_space(spec, reference_count, 1);
    for (const auto& rec : reference.records)
      reference_max = std::max(reference_max, evaluate(rec.graph));
  }

  fgp::SearchState state;
  if (opt.random_arm) {
    state = fgp::random_search(spec, search.budget, evaluate, seed, reference_max);
  } else {
    fgp::EncoderModel predictor = [&] {
      if (!opt.baseline) {
        const std::string pretrained_path = require_input(
            resolve_path(opt.pretrained, paths, "pretrained"), "pretrained checkpoint");
        return fgp::load_checkpoint(pretrained_path);
      }
      const std::size_t k = surrogate_from_config(cfg).k;
      return fgp::make_encoder(encoder_from_config(cfg), spec.vocab.size(), k, seed);
    }();
    state = fgp::npenas_search(predictor, spec, search, evaluate, seed, reference_max);
  }

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  fgp::save_search_trace_csv((run_dir / "trace.csv").string(), state);

  json resolved = {{"command", "nas"},
                   {"seed", seed},
                   {"space", space_to_json(spec)},
                   {"mode", opt.random_arm
                                ? "random"
                                : (opt.baseline ? "npenas-scratch" : "npenas-pretrained")},
                   {"budget", search.budget},
                   {"initial_pool", search.initial_pool},
                   {"per_round", search.per_round},
                   {"mutants_per_arch", search.mutants_per_arch},
                   {"finetune_epochs", search.finetune_epochs},
                   {"oracle_seed", oracle_seed},
                   {"reference_max", reference_max}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "trace.csv").string() << "\n";
  return 0;
}

int cmd_pca(const CliOptions& opt) {
  const json cfg = load_config(opt.config_path);
  const std::uint64_t seed = resolve_seed(opt, cfg);
  const json paths = section(cfg, "paths");
  check_keys(paths, "paths", {"dataset", "checkpoint", "pretrained", "predictions"});
  const std::string dataset_path =
      require_input(resolve_path(opt.dataset, paths, "dataset"), "dataset");

  const fgp::BenchDataset dataset = fgp::load_jsonl(dataset_path);
  std::vector<std::vector<double>> vectors;
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.records[i].surrogate) {
      vectors.push_back(dataset.records[i].surrogate->values);
      indices.push_back(i);
    }
  }
  if (vectors.empty())
    throw fgp::Error("MissingSurrogates", "dataset has no cached surrogates to project");

  const fgp::PcaResult pca = fgp::pca_project(vectors, 2);

  std::ostringstream csv;
  csv << "# seed=" << seed
      << " explained_variance_ratio=" << fgp::format_double(pca.explained_variance_ratio[0])
      << "," << fgp::format_double(pca.explained_variance_ratio[1]) << "\n";
  csv << "id,x,y,performance\n";
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const auto& rec = dataset.records[indices[row]];
    csv << rec.id << "," << fgp::format_double(pca.points[row][0]) << ","
        << fgp::format_double(pca.points[row][1]) << ",";
    if (rec.performance) csv << fgp::format_double(*rec.performance);
    csv << "\n";
  }

  const fs::path run_dir = make_run_dir(opt, cfg, seed);
  fgp::atomic_write_file((run_dir / "pca.csv").string(), csv.str());

  json resolved = {{"command", "pca"}, {"seed", seed}, {"dataset", dataset_path}};
  write_json(run_dir / "resolved_config.json", resolved);
  std::cout << (run_dir / "pca.csv").string() << "\n";
  return 0;
}

void add_common(CLI::App* sub, CliOptions& opt) {
  sub->add_option("--config", opt.config_path, "JSON config file");
  sub->add_option("--seed", opt.seed, "seed override (flag > config > 97)");
  sub->add_option("--run-dir", opt.run_dir, "exact output directory (skips timestamp naming)");
  sub->add_option("--out-dir", opt.out_dir,
                  "base output directory (default $FGP_OUT_DIR or ./runs)");
  sub->add_option("--dataset", opt.dataset, "dataset JSONL path override");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flow-surrogate pre-training pipeline for architecture encoders"};
  app.require_subcommand(1);

  CliOptions opt;

  CLI::App* generate = app.add_subcommand("generate", "sample a labeled synthetic search space");
  add_common(generate, opt);

  CLI::App* surrogate =
      app.add_subcommand("surrogate", "compute and cache flow surrogates for a dataset");
  add_common(surrogate, opt);
  surrogate->add_option("--jobs", opt.jobs, "worker threads for the surrogate batch");

  CLI::App* pretrain =
      app.add_subcommand("pretrain", "pre-train an encoder to reconstruct surrogates");
  add_common(pretrain, opt);

  CLI::App* finetune =
      app.add_subcommand("finetune", "fine-tune a checkpoint as a performance predictor");
  add_common(finetune, opt);
  finetune->add_option("--pretrained", opt.pretrained, "pre-trained checkpoint path");
  finetune->add_flag("--baseline", opt.baseline,
                     "train from scratch instead of loading a pre-trained checkpoint");

  CLI::App* eval = app.add_subcommand("eval", "rank the test split and report metrics");
  add_common(eval, opt);
  eval->add_option("--checkpoint", opt.checkpoint, "fine-tuned checkpoint path");
  eval->add_option("--predictions", opt.predictions, "CSV of id,prediction instead of a model");

  CLI::App* nas = app.add_subcommand("nas", "predictor-guided evolutionary search");
  add_common(nas, opt);
  nas->add_option("--pretrained", opt.pretrained, "pre-trained predictor checkpoint");
  nas->add_flag("--baseline", opt.baseline, "use a scratch-initialized predictor");
  nas->add_flag("--random", opt.random_arm, "run the random-search control arm instead");

  CLI::App* pca = app.add_subcommand("pca", "project cached surrogates to 2D for plotting");
  add_common(pca, opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(opt);
    if (surrogate->parsed()) return cmd_surrogate(opt);
    if (pretrain->parsed()) return cmd_pretrain(opt);
    if (finetune->parsed()) return cmd_finetune(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (nas->parsed()) return cmd_nas(opt);
    if (pca->parsed()) return cmd_pca(opt);
  } catch (const fgp::Error& e) {
    std::cerr << "error [" << e.kind() << "] " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error " << e.what() << "\n";
    return 1;
  }
  return 0;
}
