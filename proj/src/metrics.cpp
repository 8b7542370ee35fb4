#include "grafair/metrics.hpp"

#include "grafair/errors.hpp"
#include "grafair/loss.hpp"
#include "grafair/optimizer.hpp"

#include <cmath>
#include <string>

namespace grafair {
namespace {

constexpr int kProbeEpochs = 500;
constexpr double kProbeLearningRate = 0.01;

void check_lengths(std::size_t n, std::initializer_list<const BinaryVector*> vs) {
  for (const auto* v : vs) {
    if (v->size() != n) throw Error(ErrorCode::ShapeMismatch, "per-node vectors differ in length");
  }
}

double rate(std::int64_t num, std::int64_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

Matrix probe_proba(const Matrix& features, const Matrix& weight, const Matrix& bias) {
  Matrix logits = (features * weight).rowwise() + bias.row(0);
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp().matrix();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

}  // namespace

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::WithS: return "with-s";
    case EvalMode::MarginalS: return "marginal-s";
    case EvalMode::RetrainNoS: return "retrain-no-s";
  }
  return "with-s";
}

EvalMode parse_eval_mode(std::string_view text) {
  if (text == "with-s") return EvalMode::WithS;
  if (text == "marginal-s") return EvalMode::MarginalS;
  if (text == "retrain-no-s") return EvalMode::RetrainNoS;
  throw Error(ErrorCode::InvalidParameter, "unknown eval mode '" + std::string(text) + "'");
}

Predictor make_predictor(const GrafairModel& model, const AttributedGraph& g,
                         const NormalizedAdjacency& adj, EvalMode mode) {
  Predictor p;
  p.model = model;
  p.mode = mode;
  const auto train = mask_indices(g.masks().train);
  if (train.empty()) throw Error(ErrorCode::EmptyTrainMask, "predictor needs training nodes");
  std::int64_t positives = 0;
  for (Index i : train) positives += g.sensitive()[static_cast<std::size_t>(i)];
  p.p_sensitive = rate(positives, static_cast<std::int64_t>(train.size()));

  if (mode == EvalMode::RetrainNoS && concatenates_sensitive(model.variant)) {
    const Matrix mu = encode(model, g, adj, false, 0).mu;
    Matrix weight = Matrix::Zero(mu.cols(), model.dims.classes);
    Matrix bias = Matrix::Zero(1, model.dims.classes);
    AdamState state;
    for (int epoch = 0; epoch < kProbeEpochs; ++epoch) {
      ad::Tape tape;
      ad::Value w = tape.parameter(weight);
      ad::Value b = tape.parameter(bias);
      ad::Value prob = ad::softmax_rows(ad::add(ad::matmul(tape.constant(mu), w), b));
      ad::Value loss = conditional_nll_on_tape(tape, prob, g.labels(), g.masks().train);
      tape.backward(loss);
      Matrix* params[] = {&weight, &bias};
      const Matrix grads[] = {w.grad(), b.grad()};
      adam_step(params, grads, state, {.lr = kProbeLearningRate});
    }
    p.probe_weight = std::move(weight);
    p.probe_bias = std::move(bias);
  }
  return p;
}

Matrix predict_proba(const Predictor& predictor, const AttributedGraph& g,
                     const NormalizedAdjacency& adj) {
  const EncodedPosterior post = encode(predictor.model, g, adj, false, 0);
  if (!concatenates_sensitive(predictor.model.variant)) {
    return decode(predictor.model, post, g.sensitive());
  }
  switch (predictor.mode) {
    case EvalMode::WithS: return decode(predictor.model, post, g.sensitive());
    case EvalMode::MarginalS: return decode_marginal(predictor.model, post, predictor.p_sensitive);
    case EvalMode::RetrainNoS:
      if (!predictor.probe_weight || !predictor.probe_bias) {
        throw Error(ErrorCode::InvalidParameter, "retrain-no-s predictor has no fitted decoder");
      }
      return probe_proba(post.mu, *predictor.probe_weight, *predictor.probe_bias);
  }
  return decode(predictor.model, post, g.sensitive());
}

BinaryVector predict(const Predictor& predictor, const AttributedGraph& g,
                     const NormalizedAdjacency& adj) {
  return predict_labels(predict_proba(predictor, g, adj));
}

std::int64_t GroupCounts::total() const {
  std::int64_t t = 0;
  for (const auto& a : counts)
    for (const auto& b : a)
      for (auto c : b) t += c;
  return t;
}

GroupCounts contingency(const BinaryVector& pred, const BinaryVector& labels,
                        const BinaryVector& sensitive, const BinaryVector& mask) {
  check_lengths(mask.size(), {&pred, &labels, &sensitive});
  GroupCounts g;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) ++g.counts[pred[i]][labels[i]][sensitive[i]];
  }
  return g;
}

double f1_score(const BinaryVector& pred, const BinaryVector& labels, const BinaryVector& mask) {
  const BinaryVector zeros(mask.size(), 0);
  const GroupCounts c = contingency(pred, labels, zeros, mask);
  if (c.total() == 0) throw Error(ErrorCode::EmptyMask, "f1 over an empty mask");
  const auto tp = c.at(1, 1, 0);
  const auto fp = c.at(1, 0, 0);
  const auto fn = c.at(0, 1, 0);
  const double precision = tp + fp > 0 ? rate(tp, tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? rate(tp, tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double statistical_parity(const BinaryVector& pred, const BinaryVector& sensitive,
                          const BinaryVector& mask) {
  const BinaryVector zeros(mask.size(), 0);
  const GroupCounts c = contingency(pred, zeros, sensitive, mask);
  double rates[2];
  for (int s = 0; s < 2; ++s) {
    const auto group = c.at(0, 0, s) + c.at(1, 0, s);
    if (group == 0) {
      throw Error(ErrorCode::DegenerateGroup, "no nodes with s=" + std::to_string(s) + " in mask");
    }
    rates[s] = rate(c.at(1, 0, s), group);
  }
  return 100.0 * std::abs(rates[1] - rates[0]);
}

double equal_opportunity(const BinaryVector& pred, const BinaryVector& labels,
                         const BinaryVector& sensitive, const BinaryVector& mask) {
  const GroupCounts c = contingency(pred, labels, sensitive, mask);
  double tpr[2];
  for (int s = 0; s < 2; ++s) {
    const auto positives = c.at(0, 1, s) + c.at(1, 1, s);
    if (positives == 0) {
      throw Error(ErrorCode::DegenerateGroup,
                  "no positive-label nodes with s=" + std::to_string(s) + " in mask");
    }
    tpr[s] = rate(c.at(1, 1, s), positives);
  }
  return 100.0 * std::abs(tpr[1] - tpr[0]);
}

double accuracy(const BinaryVector& pred, const BinaryVector& labels, const BinaryVector& mask) {
  check_lengths(mask.size(), {&pred, &labels});
  std::int64_t hit = 0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    hit += pred[i] == labels[i];
  }
  if (total == 0) throw Error(ErrorCode::EmptyMask, "accuracy over an empty mask");
  return rate(hit, total);
}

namespace {

double change_percent(const BinaryVector& a, const BinaryVector& b, const BinaryVector& mask) {
  std::int64_t changed = 0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    changed += a[i] != b[i];
  }
  if (total == 0) throw Error(ErrorCode::EmptyMask, "empty evaluation mask");
  return 100.0 * rate(changed, total);
}

}  // namespace

CounterfactualResult counterfactual_fairness(const Predictor& predictor, const AttributedGraph& g,
                                             const NormalizedAdjacency& adj,
                                             const BinaryVector& mask) {
  const BinaryVector pred1 = predict(predictor, flip_sensitive(g, 1), adj);
  const BinaryVector pred0 = predict(predictor, flip_sensitive(g, 0), adj);
  CounterfactualResult r;
  r.delta_cf = 100.0 * std::abs(accuracy(pred1, g.labels(), mask) - accuracy(pred0, g.labels(), mask));
  r.flip_rate = change_percent(pred1, pred0, mask);
  return r;
}

RobustnessResult robustness_score(const Predictor& predictor, const AttributedGraph& g,
                                  const NormalizedAdjacency& adj, const BinaryVector& mask,
                                  double noise_std, int n_trials, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw Error(ErrorCode::NegativeStd, "noise std " + std::to_string(noise_std));
  if (n_trials < 1) throw Error(ErrorCode::InvalidParameter, "robustness needs at least one trial");
  const BinaryVector clean = predict(predictor, g, adj);
  const double clean_acc = accuracy(clean, g.labels(), mask);
  RobustnessResult r;
  for (int t = 0; t < n_trials; ++t) {
    const auto noisy_graph = perturb_features(g, noise_std, seed + static_cast<std::uint64_t>(t));
    const BinaryVector noisy = predict(predictor, noisy_graph, adj);
    r.delta_rs += 100.0 * std::abs(clean_acc - accuracy(noisy, g.labels(), mask));
    r.change_rate += change_percent(clean, noisy, mask);
  }
  r.delta_rs /= n_trials;
  r.change_rate /= n_trials;
  return r;
}

MetricsReport evaluate(const Predictor& predictor, const AttributedGraph& g,
                       const NormalizedAdjacency& adj, const EvalSettings& settings) {
  const auto& mask = g.masks().test;
  const BinaryVector pred = predict(predictor, g, adj);
  MetricsReport m;
  m.f1 = f1_score(pred, g.labels(), mask);
  m.delta_sp = statistical_parity(pred, g.sensitive(), mask);
  m.delta_eo = equal_opportunity(pred, g.labels(), g.sensitive(), mask);
  m.accuracy = 100.0 * accuracy(pred, g.labels(), mask);
  const auto cf = counterfactual_fairness(predictor, g, adj, mask);
  m.delta_cf = cf.delta_cf;
  m.cf_flip_rate = cf.flip_rate;
  const auto rs = robustness_score(predictor, g, adj, mask, settings.noise_std, settings.rs_trials,
                                   settings.rs_seed);
  m.delta_rs = rs.delta_rs;
  m.rs_change_rate = rs.change_rate;
  m.group_counts = contingency(pred, g.labels(), g.sensitive(), mask);
  return m;
}

AggregateMetrics aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::InvalidParameter, "nothing to aggregate");
  constexpr double MetricsReport::*fields[] = {
      &MetricsReport::f1,       &MetricsReport::delta_sp,     &MetricsReport::delta_eo,
      &MetricsReport::delta_cf, &MetricsReport::delta_rs,     &MetricsReport::accuracy,
      &MetricsReport::cf_flip_rate, &MetricsReport::rs_change_rate};
  AggregateMetrics out;
  const double n = static_cast<double>(reports.size());
  for (auto field : fields) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.*field;
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : reports) sq += (r.*field - mean) * (r.*field - mean);
    out.mean.*field = mean;
    out.stddev.*field = std::sqrt(sq / n);
  }
  for (const auto& r : reports) {
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) out.mean.group_counts.counts[a][b][c] += r.group_counts.counts[a][b][c];
  }
  return out;
}

}  // namespace grafair
