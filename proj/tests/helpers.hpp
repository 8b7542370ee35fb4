#pragma once

#include "grafair/graph.hpp"

#include <random>
#include <vector>

namespace grafair::testing {

/// Features with the sensitive attribute in column 0 and standard normal noise elsewhere.
inline Matrix features_with_sensitive(const BinaryVector& s, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(static_cast<Index>(s.size()), cols);
  for (Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = s[static_cast<std::size_t>(i)];
    for (Index j = 1; j < cols; ++j) x(i, j) = normal(rng);
  }
  return x;
}

inline AttributedGraph small_graph(Index n, std::uint64_t seed, double edge_p = 0.3, Index cols = 4) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution edge(edge_p);
  BinaryVector s(static_cast<std::size_t>(n));
  BinaryVector y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    s[i] = coin(rng);
    y[i] = coin(rng);
  }
  std::vector<Edge> edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  SplitSpec split;
  split.seed = seed;
  return build_graph(features_with_sensitive(s, cols, seed + 17), edges, 0, y, split);
}

inline Matrix dense(const SparseMatrix& m) { return Matrix(m); }

}  // namespace grafair::testing
