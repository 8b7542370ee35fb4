#include "grafair/datasets.hpp"

#include "grafair/errors.hpp"

#include <random>

namespace grafair {

namespace {

constexpr double kMeanDegree = 10.0;
constexpr Index kSignalColumns = 8;
constexpr double kSignal = 0.5;

}  // namespace

AttributedGraph synth_biased_graph(Index n, double homophily, double bias_strength,
                                   std::uint64_t seed, const SplitSpec& split) {
  if (n < 10) throw Error(ErrorCode::InvalidParameter, "synthetic graph needs n >= 10");
  if (!(homophily >= 0.0 && homophily <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "homophily must lie in [0, 1]");
  }
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) {
    throw Error(ErrorCode::InvalidParameter, "bias_strength must lie in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution copy_sensitive(bias_strength);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  BinaryVector sensitive(static_cast<std::size_t>(n));
  BinaryVector labels(static_cast<std::size_t>(n));
  Index group1 = 0;
  for (Index i = 0; i < n; ++i) {
    sensitive[i] = coin(rng) ? 1 : 0;
    group1 += sensitive[i];
  }
  for (Index i = 0; i < n; ++i) {
    labels[i] = copy_sensitive(rng) ? sensitive[i] : (coin(rng) ? 1 : 0);
  }

  Matrix features(n, 1 + kSignalColumns);
  for (Index i = 0; i < n; ++i) {
    features(i, 0) = sensitive[i];
    const double sign = labels[i] ? 1.0 : -1.0;
    for (Index j = 1; j <= kSignalColumns; ++j) features(i, j) = kSignal * sign + noise(rng);
  }

  const Index group0 = n - group1;
  const double intra_pairs = 0.5 * static_cast<double>(group0 * (group0 - 1) + group1 * (group1 - 1));
  const double inter_pairs = static_cast<double>(group0 * group1);
  const double target_edges = 0.5 * kMeanDegree * static_cast<double>(n);
  const double p_intra = intra_pairs > 0 ? std::min(1.0, homophily * target_edges / intra_pairs) : 0.0;
  const double p_inter =
      inter_pairs > 0 ? std::min(1.0, (1.0 - homophily) * target_edges / inter_pairs) : 0.0;

  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double p = sensitive[i] == sensitive[j] ? p_intra : p_inter;
      if (unit(rng) < p) edges.emplace_back(i, j);
    }
  }
  return build_graph(std::move(features), edges, 0, labels, split);
}

}  // namespace grafair
