#pragma once

#include "grafair/graph.hpp"
#include "grafair/metrics.hpp"
#include "grafair/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace grafair {

/// Every tunable of a training run. Defaults are the reference hyperparameters.
struct TrainConfig {
  double beta = 1000.0;
  double lr = 0.01;
  int epochs = 200;
  Index hidden_dim = 20;
  int encoder_layers = 1;
  int classifier_layers = 1;
  Variant variant = Variant::Full;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  /// gcn, mean, sum, or sample (uniform neighbor sampling with sum aggregation).
  std::string aggregation = "gcn";
  Index sample_k = 10;
  bool final_layer_only = false;

  EvalMode eval_mode = EvalMode::WithS;
  double noise_std = 1.0;
  int rs_trials = 5;
  std::uint64_t rs_seed = 0;

  std::uint64_t split_seed = 0;
  double train_fraction = 0.5;
  double val_fraction = 0.25;

  /// 0 means one worker per hardware thread.
  int threads = 0;

  // Data source: a preset name (german, credit, bail), "synth", or "custom".
  std::string dataset = "synth";
  std::string data_dir = "data";
  std::string features_path;
  std::string edges_path;
  std::string masks_path;
  std::string label_column;
  std::string sensitive_column;
  std::vector<std::string> drop_columns;
  bool scale_features = true;

  // Synthetic generator parameters, used when dataset = synth.
  Index synth_nodes = 500;
  double synth_homophily = 0.9;
  double synth_bias = 0.8;
  std::uint64_t synth_seed = 0;
};

/// All keys accepted by set_config_value, in serialization order.
const std::vector<std::string>& config_keys();

/// Assigns one key from its text form. Throws InvalidParameter for unknown keys
/// or malformed values.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& config, std::string_view key);

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});

/// One `key = value` line per key, in config_keys() order.
std::string serialize_config(const TrainConfig& config);

/// Validates ranges; throws InvalidParameter or InvalidBeta.
void validate_config(const TrainConfig& config);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view text);

ModelDims model_dims(const TrainConfig& config, Index in_features);

}  // namespace grafair
