#include "grafair/trainer.hpp"

#include "grafair/errors.hpp"
#include "grafair/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

namespace grafair {
namespace {

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kSampleStream = 0xc2b2ae3d27d4eb4fULL;

bool sampled_aggregation(const TrainConfig& config) { return config.aggregation == "sample"; }

int worker_count(const TrainConfig& config, std::size_t jobs) {
  int n = config.threads;
  if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::max(1, std::min(n, static_cast<int>(jobs)));
}

}  // namespace

NormalizedAdjacency build_adjacency(const AttributedGraph& g, const TrainConfig& config,
                                    std::uint64_t seed) {
  if (sampled_aggregation(config)) {
    std::mt19937_64 rng(seed ^ kSampleStream);
    return sample_adjacency(g, config.sample_k, rng);
  }
  return normalize_adjacency(g, parse_aggregation_mode(config.aggregation));
}

MetricsReport evaluate_model(const GrafairModel& model, const AttributedGraph& g,
                             const TrainConfig& config) {
  const NormalizedAdjacency adj = build_adjacency(g, config, 0);
  const Predictor predictor = make_predictor(model, g, adj, config.eval_mode);
  EvalSettings settings;
  settings.noise_std = config.noise_std;
  settings.rs_trials = config.rs_trials;
  settings.rs_seed = config.rs_seed;
  return evaluate(predictor, g, adj, settings);
}

RunResult train(const AttributedGraph& g, const TrainConfig& config, std::uint64_t seed) {
  validate_config(config);
  RunResult result;
  result.seed = seed;
  result.model = init_weights(model_dims(config, g.num_features()), config.variant, seed);
  GrafairModel& model = result.model;

  const Matrix input = encoder_input(model, g);
  NormalizedAdjacency adj = build_adjacency(g, config, 0);
  std::mt19937_64 noise_rng(seed ^ kNoiseStream);
  std::mt19937_64 sample_rng(seed ^ kSampleStream);
  AdamState state;
  AdamOptions adam;
  adam.lr = config.lr;
  EncodeOptions options;
  options.sample = true;
  options.final_layer_only = config.final_layer_only;

  result.trace.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (sampled_aggregation(config)) adj = sample_adjacency(g, config.sample_k, sample_rng);

    ad::Tape tape;
    const ParameterValues params = bind_parameters(tape, model, true);
    const PosteriorValues post = encode_on_tape(tape, model, params, input, adj, options, noise_rng);
    const ad::Value prob = decode_on_tape(tape, model, params, post.z, g.sensitive());
    const LossValues loss = cfb_loss_on_tape(tape, post, prob, g.labels(), g.masks().train,
                                             config.beta, config.variant);
    const double total = loss.total.scalar();
    if (!std::isfinite(total)) throw NonFiniteLossError(epoch, total);
    tape.backward(loss.total);

    std::vector<Matrix> grads;
    for (const auto& v : params.flat()) grads.push_back(v.grad());
    const std::vector<Matrix*> targets = model.parameters();
    adam_step(targets, grads, state, adam);

    result.trace.push_back(loss.breakdown);
    result.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }

  result.metrics = evaluate_model(model, g, config);
  return result;
}

ExperimentResult run_experiment(const AttributedGraph& g, const TrainConfig& config) {
  validate_config(config);
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());

  std::vector<RunResult> runs(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < seeds.size(); k = next++) {
      try {
        runs[k] = train(g, config, seeds[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int workers = worker_count(config, seeds.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult out;
  out.runs = std::move(runs);
  std::vector<MetricsReport> reports;
  for (const auto& r : out.runs) reports.push_back(r.metrics);
  out.summary = aggregate(reports);
  return out;
}

std::vector<SweepRow> sweep_beta(const AttributedGraph& g, const TrainConfig& config,
                                 const std::vector<double>& betas) {
  if (betas.empty()) throw Error(ErrorCode::InvalidParameter, "beta sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    TrainConfig c = config;
    c.beta = beta;
    rows.push_back({beta, run_experiment(g, c)});
  }
  return rows;
}

std::vector<AblationRow> ablation_matrix(const AttributedGraph& g, const TrainConfig& config) {
  std::vector<AblationRow> rows;
  for (Variant v : all_variants()) {
    TrainConfig c = config;
    c.variant = v;
    rows.push_back({v, run_experiment(g, c)});
  }
  return rows;
}

}  // namespace grafair
