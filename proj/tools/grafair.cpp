// grafair: train and evaluate fair node classifiers from the command line.

#include "grafair/config.hpp"
#include "grafair/datasets.hpp"
#include "grafair/errors.hpp"
#include "grafair/report.hpp"
#include "grafair/trainer.hpp"
#include "grafair/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace grafair;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter:
    case ErrorCode::InvalidBeta:
    case ErrorCode::UnknownVariant:
      return kExitUsage;
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonFiniteInput:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

/// --config plus one flag per config key.
struct ConfigFlags {
  std::string config_path;
  std::string out_dir = "runs";
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--out", out_dir, "output root directory")->capture_default_str();
    const TrainConfig defaults;
    for (const auto& key : config_keys()) {
      options[key] = app->add_option("--" + dashed(key), values[key], "config key " + key)
                         ->default_str(get_config_value(defaults, key));
    }
  }

  TrainConfig resolve() const {
    TrainConfig c = config_path.empty() ? TrainConfig{} : load_config(config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) set_config_value(c, key, values.at(key));
    }
    validate_config(c);
    return c;
  }
};

std::string run_dir(const std::string& root, const std::string& command, const TrainConfig& c) {
  return (std::filesystem::path(root) / (command + "-" + fnv1a_hex(command + "\n" + serialize_config(c))))
      .string();
}

AttributedGraph load_graph(const TrainConfig& c) {
  LoadedDataset data = load_dataset(c);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  return data.graph;
}

std::string summary_line(const std::string& label, const AggregateMetrics& a) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "%s F1 %.2f +- %.2f | SP %.2f +- %.2f | EO %.2f +- %.2f | CF %.2f +- %.2f | "
                "RS %.2f +- %.2f",
                label.c_str(), a.mean.f1, a.stddev.f1, a.mean.delta_sp, a.stddev.delta_sp,
                a.mean.delta_eo, a.stddev.delta_eo, a.mean.delta_cf, a.stddev.delta_cf,
                a.mean.delta_rs, a.stddev.delta_rs);
  return buf;
}

int cmd_train(const ConfigFlags& flags) {
  const TrainConfig c = flags.resolve();
  const AttributedGraph g = load_graph(c);
  const ExperimentResult result = run_experiment(g, c);
  const std::string dir = run_dir(flags.out_dir, "train", c);
  write_text(dir + "/config.cfg", serialize_config(c));
  write_text(dir + "/report.json", experiment_json(c, g, result).dump(2) + "\n");
  write_text(dir + "/timings.json", timings_json(result).dump(2) + "\n");
  for (const auto& run : result.runs) {
    save_checkpoint(dir + "/seed-" + std::to_string(run.seed) + ".ckpt", run.model,
                    {{"dataset", c.dataset}, {"seed", std::to_string(run.seed)}});
  }
  std::cout << summary_line(std::string(to_string(c.variant)), result.summary) << "\n" << dir << "\n";
  return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::vector<double>& betas) {
  const TrainConfig c = flags.resolve();
  const AttributedGraph g = load_graph(c);
  const auto rows = sweep_beta(g, c, betas);
  std::string tag = serialize_config(c);
  for (double b : betas) tag += std::to_string(b) + ",";
  const std::string dir =
      (std::filesystem::path(flags.out_dir) / ("sweep-beta-" + fnv1a_hex("sweep-beta\n" + tag))).string();
  Json doc = {{"graph", graph_summary_json(g)}, {"rows", Json::array()}};
  for (const auto& r : rows) {
    doc["rows"].push_back(experiment_json(c, g, r.result));
    doc["rows"].back()["beta"] = r.beta;
    std::cout << summary_line("beta=" + std::to_string(r.beta), r.result.summary) << "\n";
  }
  write_text(dir + "/sweep.csv", sweep_csv(rows));
  write_text(dir + "/sweep.json", doc.dump(2) + "\n");
  std::cout << dir << "\n";
  return 0;
}

int cmd_ablate(const ConfigFlags& flags) {
  const TrainConfig c = flags.resolve();
  const AttributedGraph g = load_graph(c);
  const auto rows = ablation_matrix(g, c);
  const std::string dir = run_dir(flags.out_dir, "ablate", c);
  Json doc = {{"graph", graph_summary_json(g)}, {"rows", Json::array()}};
  for (const auto& r : rows) {
    TrainConfig rc = c;
    rc.variant = r.variant;
    doc["rows"].push_back(experiment_json(rc, g, r.result));
    std::cout << summary_line(std::string(to_string(r.variant)), r.result.summary) << "\n";
  }
  write_text(dir + "/ablation.csv", ablation_csv(rows));
  write_text(dir + "/ablation.json", doc.dump(2) + "\n");
  std::cout << dir << "\n";
  return 0;
}

int cmd_metrics(const ConfigFlags& flags, const std::string& checkpoint) {
  const TrainConfig c = flags.resolve();
  const AttributedGraph g = load_graph(c);
  const GrafairModel model = load_checkpoint(checkpoint, nullptr);
  const MetricsReport m = evaluate_model(model, g, c);
  std::cout << metrics_json(m).dump(2) << "\n";
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::vector<std::string>& checkpoints) {
  const TrainConfig c = flags.resolve();
  const AttributedGraph g = load_graph(c);
  std::vector<GrafairModel> models;
  for (const auto& path : checkpoints) models.push_back(load_checkpoint(path, nullptr));
  Json doc = Json::object();
  for (EvalMode mode : {EvalMode::WithS, EvalMode::MarginalS, EvalMode::RetrainNoS}) {
    TrainConfig mc = c;
    mc.eval_mode = mode;
    std::vector<MetricsReport> reports;
    for (const auto& model : models) reports.push_back(evaluate_model(model, g, mc));
    const AggregateMetrics a = aggregate(reports);
    doc[std::string(to_string(mode))] = {{"mean", metrics_json(a.mean)}, {"std", metrics_json(a.stddev)}};
    std::cout << summary_line(std::string(to_string(mode)), a) << "\n";
  }
  std::string tag = serialize_config(c);
  for (const auto& p : checkpoints) tag += p + "\n";
  const std::string dir =
      (std::filesystem::path(flags.out_dir) / ("eval-" + fnv1a_hex("eval\n" + tag))).string();
  write_text(dir + "/eval.json", doc.dump(2) + "\n");
  std::cout << dir << "\n";
  return 0;
}

struct SynthFlags {
  Index nodes = 500;
  double homophily = 0.9;
  double bias = 0.8;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string out_dir = "synth-data";
};

int cmd_synth(const SynthFlags& f) {
  SplitSpec split;
  split.seed = f.split_seed;
  const AttributedGraph g = synth_biased_graph(f.nodes, f.homophily, f.bias, f.seed, split);
  std::ostringstream features;
  features.precision(17);
  features << "sensitive";
  for (Index j = 1; j < g.num_features(); ++j) features << ",x" << j;
  features << ",label\n";
  for (Index i = 0; i < g.num_nodes(); ++i) {
    for (Index j = 0; j < g.num_features(); ++j) features << (j ? "," : "") << g.features()(i, j);
    features << "," << int(g.labels()[static_cast<std::size_t>(i)]) << "\n";
  }
  std::string edges;
  for (const auto& [a, b] : g.edge_list()) edges += std::to_string(a) + " " + std::to_string(b) + "\n";
  std::string masks = "node_id,split\n";
  for (Index i = 0; i < g.num_nodes(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const char* s = g.masks().train[k] ? "train" : g.masks().val[k] ? "val" : g.masks().test[k] ? "test" : nullptr;
    if (s) masks += std::to_string(i) + "," + s + "\n";
  }
  const std::filesystem::path dir(f.out_dir);
  write_text((dir / "features.csv").string(), features.str());
  write_text((dir / "edges.txt").string(), edges);
  write_text((dir / "masks.csv").string(), masks);
  write_text((dir / "dataset.cfg").string(),
             "dataset = custom\nfeatures = " + (dir / "features.csv").string() +
                 "\nedges = " + (dir / "edges.txt").string() + "\nmasks = " + (dir / "masks.csv").string() +
                 "\nlabel_column = label\nsensitive_column = sensitive\nscale_features = false\n");
  std::cout << g.num_nodes() << " nodes, " << g.num_edges() << " edges -> " << dir.string() << "\n";
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  bool all = true;
  for (const auto& check : run_self_checks(seed)) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << "\n";
    all = all && check.passed;
  }
  return all ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair node classification with conditional fairness bottleneck training"};
  app.require_subcommand(1);

  ConfigFlags train_flags, sweep_flags, ablate_flags, eval_flags, metrics_flags;
  auto* train = app.add_subcommand("train", "train one model per seed and write a report");
  train_flags.attach(train);

  auto* sweep = app.add_subcommand("sweep-beta", "run the experiment for each beta");
  sweep_flags.attach(sweep);
  std::vector<double> betas = {1, 5, 10, 50, 100, 500, 1000, 5000, 10000, 50000};
  sweep->add_option("--betas", betas, "beta values")->delimiter(',')->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "run the experiment for every variant");
  ablate_flags.attach(ablate);

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints under every evaluation mode");
  eval_flags.attach(eval);
  std::vector<std::string> eval_checkpoints;
  eval->add_option("--checkpoint", eval_checkpoints, "checkpoint file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);

  auto* metrics = app.add_subcommand("metrics", "recompute the metrics report of one checkpoint");
  metrics_flags.attach(metrics);
  std::string metrics_checkpoint;
  metrics->add_option("--checkpoint", metrics_checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "write a synthetic biased graph as CSV files");
  synth->add_option("--nodes", synth_flags.nodes, "node count")->capture_default_str();
  synth->add_option("--homophily", synth_flags.homophily, "share of edges inside groups")->capture_default_str();
  synth->add_option("--bias", synth_flags.bias, "probability that a label copies S")->capture_default_str();
  synth->add_option("--seed", synth_flags.seed, "generator seed")->capture_default_str();
  synth->add_option("--split-seed", synth_flags.split_seed, "split seed")->capture_default_str();
  synth->add_option("--out", synth_flags.out_dir, "output directory")->capture_default_str();

  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "gradient, KL and bound self-checks");
  verify->add_option("--seed", verify_seed, "seed for the random instances")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags, betas);
    if (*ablate) return cmd_ablate(ablate_flags);
    if (*eval) return cmd_eval(eval_flags, eval_checkpoints);
    if (*metrics) return cmd_metrics(metrics_flags, metrics_checkpoint);
    if (*synth) return cmd_synth(synth_flags);
    if (*verify) return cmd_verify(verify_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
