#pragma once

#include "grafair/config.hpp"
#include "grafair/loss.hpp"
#include "grafair/metrics.hpp"
#include "grafair/model.hpp"

#include <cstdint>
#include <vector>

namespace grafair {

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<LossBreakdown> trace;  // one entry per epoch, before that epoch's update
  MetricsReport metrics;
  std::vector<double> epoch_seconds;
  GrafairModel model;
};

/// Adjacency used for training and evaluation. With aggregation = sample the
/// returned matrix is one neighbor sample drawn from `seed`.
NormalizedAdjacency build_adjacency(const AttributedGraph& g, const TrainConfig& config,
                                    std::uint64_t seed);

/// Trains one model from `seed` and evaluates it on the test mask with
/// sampling off. Throws NonFiniteLossError naming the epoch (1-based).
RunResult train(const AttributedGraph& g, const TrainConfig& config, std::uint64_t seed);

/// Evaluates a trained model with the config's evaluation settings.
MetricsReport evaluate_model(const GrafairModel& model, const AttributedGraph& g,
                             const TrainConfig& config);

struct ExperimentResult {
  std::vector<RunResult> runs;  // sorted by seed
  AggregateMetrics summary;
};

/// One run per config seed, in parallel over `config.threads` workers.
ExperimentResult run_experiment(const AttributedGraph& g, const TrainConfig& config);

struct SweepRow {
  double beta = 0.0;
  ExperimentResult result;
};

std::vector<SweepRow> sweep_beta(const AttributedGraph& g, const TrainConfig& config,
                                 const std::vector<double>& betas);

struct AblationRow {
  Variant variant = Variant::Full;
  ExperimentResult result;
};

/// One row per variant, in all_variants() order.
std::vector<AblationRow> ablation_matrix(const AttributedGraph& g, const TrainConfig& config);

}  // namespace grafair
