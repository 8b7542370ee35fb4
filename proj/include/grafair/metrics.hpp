#pragma once

#include "grafair/graph.hpp"
#include "grafair/model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace grafair {

/// How a trained model is turned into predictions for evaluation.
enum class EvalMode {
  WithS,       // trained decoder fed the node's own S
  MarginalS,   // trained decoder averaged over S with its train-set frequency
  RetrainNoS,  // fresh softmax decoder fitted on frozen train-node means, no S
};

std::string_view to_string(EvalMode mode);
EvalMode parse_eval_mode(std::string_view text);

/// A frozen model plus whatever the evaluation mode needs. Inference never
/// samples: z = mu.
struct Predictor {
  GrafairModel model;
  EvalMode mode = EvalMode::WithS;
  double p_sensitive = 0.5;
  std::optional<Matrix> probe_weight;
  std::optional<Matrix> probe_bias;
};

/// Fits the mode-specific pieces on the train mask of `g`.
Predictor make_predictor(const GrafairModel& model, const AttributedGraph& g,
                         const NormalizedAdjacency& adj, EvalMode mode);

Matrix predict_proba(const Predictor& predictor, const AttributedGraph& g,
                     const NormalizedAdjacency& adj);
BinaryVector predict(const Predictor& predictor, const AttributedGraph& g,
                     const NormalizedAdjacency& adj);

/// counts[yhat][y][s] over the masked nodes.
struct GroupCounts {
  std::array<std::array<std::array<std::int64_t, 2>, 2>, 2> counts{};

  std::int64_t at(int yhat, int y, int s) const { return counts[yhat][y][s]; }
  std::int64_t total() const;
};

GroupCounts contingency(const BinaryVector& pred, const BinaryVector& labels,
                        const BinaryVector& sensitive, const BinaryVector& mask);

/// Positive-class F1 in percent; 0 when precision + recall is 0.
double f1_score(const BinaryVector& pred, const BinaryVector& labels, const BinaryVector& mask);
/// 100 |P(yhat=1 | s=1) - P(yhat=1 | s=0)|.
double statistical_parity(const BinaryVector& pred, const BinaryVector& sensitive,
                          const BinaryVector& mask);
/// 100 |TPR(s=1) - TPR(s=0)|.
double equal_opportunity(const BinaryVector& pred, const BinaryVector& labels,
                         const BinaryVector& sensitive, const BinaryVector& mask);
double accuracy(const BinaryVector& pred, const BinaryVector& labels, const BinaryVector& mask);

struct CounterfactualResult {
  double delta_cf = 0.0;   // 100 |acc(S<-1) - acc(S<-0)|
  double flip_rate = 0.0;  // percent of nodes whose prediction differs between the interventions
};

CounterfactualResult counterfactual_fairness(const Predictor& predictor, const AttributedGraph& g,
                                             const NormalizedAdjacency& adj,
                                             const BinaryVector& mask);

struct RobustnessResult {
  double delta_rs = 0.0;     // mean over trials of 100 |acc(clean) - acc(noisy)|
  double change_rate = 0.0;  // mean percent of predictions that changed
};

/// Noise goes on test-mask rows (see perturb_features); trial t uses seed + t.
RobustnessResult robustness_score(const Predictor& predictor, const AttributedGraph& g,
                                  const NormalizedAdjacency& adj, const BinaryVector& mask,
                                  double noise_std, int n_trials, std::uint64_t seed);

struct MetricsReport {
  double f1 = 0.0;
  double delta_sp = 0.0;
  double delta_eo = 0.0;
  double delta_cf = 0.0;
  double delta_rs = 0.0;
  double accuracy = 0.0;
  double cf_flip_rate = 0.0;
  double rs_change_rate = 0.0;
  GroupCounts group_counts;
};

struct EvalSettings {
  double noise_std = 1.0;
  int rs_trials = 5;
  std::uint64_t rs_seed = 0;
};

/// All metrics on the test mask.
MetricsReport evaluate(const Predictor& predictor, const AttributedGraph& g,
                       const NormalizedAdjacency& adj, const EvalSettings& settings);

/// Mean and population standard deviation of every scalar metric.
struct AggregateMetrics {
  MetricsReport mean;
  MetricsReport stddev;
};

AggregateMetrics aggregate(std::span<const MetricsReport> reports);

}  // namespace grafair
