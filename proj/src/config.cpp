#include "grafair/config.hpp"

#include "grafair/errors.hpp"
#include "grafair/loss.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace grafair {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::InvalidParameter,
              "bad value '" + std::string(value) + "' for '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, value);
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += xs[i];
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(std::string key, T TrainConfig::*member) {
  return {key,
          [key, member](TrainConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field string_field(std::string key, std::string TrainConfig::*member) {
  return {key, [member](TrainConfig& c, std::string_view v) { c.*member = trim(v); },
          [member](const TrainConfig& c) { return c.*member; }};
}

Field bool_field(std::string key, bool TrainConfig::*member) {
  return {key, [key, member](TrainConfig& c, std::string_view v) { c.*member = parse_bool(key, v); },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      number_field("beta", &TrainConfig::beta),
      number_field("lr", &TrainConfig::lr),
      number_field("epochs", &TrainConfig::epochs),
      number_field("hidden_dim", &TrainConfig::hidden_dim),
      number_field("encoder_layers", &TrainConfig::encoder_layers),
      number_field("classifier_layers", &TrainConfig::classifier_layers),
      {"variant", [](TrainConfig& c, std::string_view v) { c.variant = parse_variant(trim(v)); },
       [](const TrainConfig& c) { return std::string(to_string(c.variant)); }},
      {"seeds",
       [](TrainConfig& c, std::string_view v) {
         c.seeds.clear();
         for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>("seeds", s));
       },
       [](const TrainConfig& c) { return join(c.seeds); }},
      string_field("aggregation", &TrainConfig::aggregation),
      number_field("sample_k", &TrainConfig::sample_k),
      bool_field("final_layer_only", &TrainConfig::final_layer_only),
      {"eval_mode", [](TrainConfig& c, std::string_view v) { c.eval_mode = parse_eval_mode(trim(v)); },
       [](const TrainConfig& c) { return std::string(to_string(c.eval_mode)); }},
      number_field("noise_std", &TrainConfig::noise_std),
      number_field("rs_trials", &TrainConfig::rs_trials),
      number_field("rs_seed", &TrainConfig::rs_seed),
      number_field("split_seed", &TrainConfig::split_seed),
      number_field("train_fraction", &TrainConfig::train_fraction),
      number_field("val_fraction", &TrainConfig::val_fraction),
      number_field("threads", &TrainConfig::threads),
      string_field("dataset", &TrainConfig::dataset),
      string_field("data_dir", &TrainConfig::data_dir),
      string_field("features", &TrainConfig::features_path),
      string_field("edges", &TrainConfig::edges_path),
      string_field("masks", &TrainConfig::masks_path),
      string_field("label_column", &TrainConfig::label_column),
      string_field("sensitive_column", &TrainConfig::sensitive_column),
      {"drop_columns", [](TrainConfig& c, std::string_view v) { c.drop_columns = split_list(v); },
       [](const TrainConfig& c) { return join(c.drop_columns); }},
      bool_field("scale_features", &TrainConfig::scale_features),
      number_field("synth_nodes", &TrainConfig::synth_nodes),
      number_field("synth_homophily", &TrainConfig::synth_homophily),
      number_field("synth_bias", &TrainConfig::synth_bias),
      number_field("synth_seed", &TrainConfig::synth_seed),
  };
  return table;
}

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw Error(ErrorCode::InvalidParameter, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  find_field(key).set(config, value);
}

std::string get_config_value(const TrainConfig& config, std::string_view key) {
  return find_field(key).get(config);
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    try {
      set_config_value(base, key, std::string_view(body).substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void validate_config(const TrainConfig& config) {
  validate_beta(config.beta);
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidParameter, what);
  };
  require(config.lr > 0.0 && std::isfinite(config.lr), "lr must be positive");
  require(config.epochs >= 0, "epochs must be >= 0");
  require(!config.seeds.empty(), "at least one seed is required");
  require(config.aggregation == "sample" || config.aggregation == "gcn" ||
              config.aggregation == "mean" || config.aggregation == "sum" ||
              config.aggregation == "symmetric-gcn" || config.aggregation == "row-mean",
          "aggregation must be gcn, mean, sum or sample");
  require(config.sample_k >= 1, "sample_k must be >= 1");
  require(config.noise_std >= 0.0, "noise_std must be >= 0");
  require(config.rs_trials >= 1, "rs_trials must be >= 1");
  require(config.train_fraction > 0.0 && config.val_fraction >= 0.0 &&
              config.train_fraction + config.val_fraction < 1.0,
          "split fractions must leave room for a test set");
  require(config.threads >= 0, "threads must be >= 0");
  validate_dims(model_dims(config, 1));
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ModelDims model_dims(const TrainConfig& config, Index in_features) {
  ModelDims d;
  d.in_features = in_features;
  d.hidden_dim = config.hidden_dim;
  d.encoder_layers = config.encoder_layers;
  d.classifier_layers = config.classifier_layers;
  return d;
}

}  // namespace grafair
