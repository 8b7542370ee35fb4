#include "grafair/verify.hpp"

#include "grafair/loss.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace grafair {

AttributedGraph random_check_graph(Index nodes, Index features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution edge(0.3);
  Matrix x(nodes, features);
  BinaryVector labels(static_cast<std::size_t>(nodes));
  for (Index i = 0; i < nodes; ++i) {
    x(i, 0) = coin(rng) ? 1.0 : 0.0;
    for (Index j = 1; j < features; ++j) x(i, j) = normal(rng);
    labels[static_cast<std::size_t>(i)] = coin(rng) ? 1 : 0;
  }
  std::vector<Edge> edges;
  for (Index i = 0; i < nodes; ++i)
    for (Index j = i + 1; j < nodes; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  SplitSpec split;
  split.seed = seed;
  return build_graph(std::move(x), edges, 0, labels, split);
}

double loss_gradient_error(Variant variant, const GradientCheckSpec& spec) {
  const AttributedGraph g = random_check_graph(spec.nodes, spec.features, spec.seed);
  ModelDims dims;
  dims.in_features = spec.features;
  dims.hidden_dim = spec.hidden_dim;
  dims.encoder_layers = spec.encoder_layers;
  dims.classifier_layers = spec.classifier_layers;
  GrafairModel model = init_weights(dims, variant, spec.seed);
  for (std::size_t k = 0; k < model.decoder_biases.size(); ++k) {
    model.decoder_biases[k].setConstant(0.1 * static_cast<double>(k + 1));
  }
  const NormalizedAdjacency adj = normalize_adjacency(g, AggregationMode::SymmetricGcn);
  const Matrix input = encoder_input(model, g);

  std::vector<Matrix> params;
  for (const Matrix* p : std::as_const(model).parameters()) params.push_back(*p);

  auto objective = [&](ad::Tape& tape, std::span<const ad::Value> leaves) {
    const ParameterValues bound = unflatten_parameters(model, leaves);
    std::mt19937_64 rng(spec.seed + 1);
    const PosteriorValues post = encode_on_tape(tape, model, bound, input, adj, {true, false}, rng);
    const ad::Value prob = decode_on_tape(tape, model, bound, post.z, g.sensitive());
    return cfb_loss_on_tape(tape, post, prob, g.labels(), g.masks().train, spec.beta, variant).total;
  };
  return ad::finite_diff_check(objective, params, spec.eps);
}

double kl_by_quadrature(double mu, double log_var, int points) {
  const double sd = std::exp(0.5 * log_var);
  const double lo = mu - 12.0 * sd;
  const double hi = mu + 12.0 * sd;
  const double h = (hi - lo) / (points - 1);
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  double sum = 0.0;
  for (int k = 0; k < points; ++k) {
    const double z = lo + h * k;
    const double u = (z - mu) / sd;
    const double log_p = -0.5 * u * u - std::log(sd) - log_norm;
    const double log_q = -0.5 * z * z - log_norm;
    const double term = std::exp(log_p) * (log_p - log_q);
    sum += (k == 0 || k == points - 1) ? 0.5 * term : term;
  }
  return sum * h;
}

std::vector<CheckOutcome> run_self_checks(std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  {
    double worst = 0.0;
    std::string worst_variant;
    for (Variant v : all_variants()) {
      GradientCheckSpec spec;
      spec.seed = seed;
      const double e = loss_gradient_error(v, spec);
      if (e >= worst) {
        worst = e;
        worst_variant = std::string(to_string(v));
      }
    }
    std::ostringstream d;
    d << "max relative error " << worst << " (" << worst_variant << ")";
    out.push_back({"gradient", worst < 1e-4, d.str()});
  }
  {
    double worst = 0.0;
    for (int a = 0; a < 9; ++a) {
      for (int b = 0; b < 9; ++b) {
        const double mu = -3.0 + 0.75 * a;
        const double log_var = -2.0 + 0.5 * b;
        const double closed = gaussian_kl(Matrix::Constant(1, 1, mu), Matrix::Constant(1, 1, log_var));
        worst = std::max(worst, std::abs(closed - kl_by_quadrature(mu, log_var)));
      }
    }
    std::ostringstream d;
    d << "max abs error " << worst << " over 81 points";
    out.push_back({"kl-quadrature", worst < 1e-6, d.str()});
  }
  {
    const BoundCheck sep = verify_bounds_toy(seed, 1000000, BoundToy::separated());
    const BoundCheck deg = verify_bounds_toy(seed, 1000000, BoundToy::degenerate());
    const bool ok = sep.ub_gap > 3.0 * sep.ub_se && sep.lb_gap > 3.0 * sep.lb_se &&
                    std::abs(deg.ub_gap) <= 3.0 * deg.ub_se && std::abs(deg.lb_gap) <= 3.0 * deg.lb_se;
    std::ostringstream d;
    d << "ub_gap " << sep.ub_gap << " (se " << sep.ub_se << "), lb_gap " << sep.lb_gap << " (se "
      << sep.lb_se << "); degenerate ub_gap " << deg.ub_gap << ", lb_gap " << deg.lb_gap;
    out.push_back({"bounds", ok, d.str()});
  }
  return out;
}

}  // namespace grafair
