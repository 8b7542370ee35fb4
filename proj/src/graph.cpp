#include "grafair/graph.hpp"

#include "grafair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace grafair {
namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

BinaryVector read_sensitive(const Matrix& features, Index col) {
  BinaryVector s(static_cast<std::size_t>(features.rows()));
  for (Index i = 0; i < features.rows(); ++i) {
    const double v = features(i, col);
    if (!is_binary(v)) {
      throw Error(ErrorCode::NonBinaryColumn, "sensitive column " + std::to_string(col) +
                                                  " has value " + std::to_string(v) +
                                                  " at row " + std::to_string(i));
    }
    s[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  return s;
}

void validate_masks(const SplitMasks& m, Index n) {
  const auto sz = static_cast<std::size_t>(n);
  if (m.train.size() != sz || m.val.size() != sz || m.test.size() != sz) {
    throw Error(ErrorCode::ShapeMismatch, "split masks must have one entry per node");
  }
  for (std::size_t i = 0; i < sz; ++i) {
    if (m.train[i] + m.val[i] + m.test[i] > 1) {
      throw Error(ErrorCode::InvalidParameter,
                  "node " + std::to_string(i) + " belongs to more than one split");
    }
  }
}

std::shared_ptr<const Topology> make_topology(Index n, std::span<const Edge> edges) {
  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw Error(ErrorCode::IndexOutOfRange, "edge (" + std::to_string(a) + ", " +
                                                  std::to_string(b) + ") with " +
                                                  std::to_string(n) + " nodes");
    }
    if (a == b) continue;
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  auto topo = std::make_shared<Topology>();
  topo->offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  topo->neighbors.reserve(directed.size());
  for (const auto& [a, b] : directed) {
    ++topo->offsets[static_cast<std::size_t>(a) + 1];
    topo->neighbors.push_back(b);
  }
  std::partial_sum(topo->offsets.begin(), topo->offsets.end(), topo->offsets.begin());
  return topo;
}

}  // namespace

AttributedGraph::AttributedGraph(std::shared_ptr<const Topology> topology,
                                 std::shared_ptr<const Matrix> features,
                                 std::shared_ptr<const BinaryVector> sensitive,
                                 std::shared_ptr<const BinaryVector> labels, Index sensitive_col,
                                 std::shared_ptr<const SplitMasks> masks)
    : topology_(std::move(topology)),
      features_(std::move(features)),
      sensitive_(std::move(sensitive)),
      labels_(std::move(labels)),
      sensitive_col_(sensitive_col),
      masks_(std::move(masks)) {}

AttributedGraph AttributedGraph::with_features(Matrix features) const {
  if (features.rows() != features_->rows() || features.cols() != features_->cols()) {
    throw Error(ErrorCode::ShapeMismatch, "replacement features must keep the original shape");
  }
  auto s = std::make_shared<const BinaryVector>(read_sensitive(features, sensitive_col_));
  return AttributedGraph(topology_, std::make_shared<const Matrix>(std::move(features)),
                         std::move(s), labels_, sensitive_col_, masks_);
}

AttributedGraph AttributedGraph::with_masks(SplitMasks masks) const {
  validate_masks(masks, num_nodes());
  return AttributedGraph(topology_, features_, sensitive_, labels_, sensitive_col_,
                         std::make_shared<const SplitMasks>(std::move(masks)));
}

std::vector<Edge> AttributedGraph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(num_edges()));
  for (Index i = 0; i < num_nodes(); ++i) {
    for (Index j : topology_->row(i)) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

bool operator==(const AttributedGraph& a, const AttributedGraph& b) {
  const auto& ma = a.masks();
  const auto& mb = b.masks();
  return a.sensitive_col_ == b.sensitive_col_ && a.features() == b.features() &&
         a.sensitive() == b.sensitive() && a.labels() == b.labels() &&
         a.topology().offsets == b.topology().offsets &&
         a.topology().neighbors == b.topology().neighbors && ma.train == mb.train &&
         ma.val == mb.val && ma.test == mb.test;
}

std::string_view to_string(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::SymmetricGcn: return "gcn";
    case AggregationMode::RowMean: return "mean";
    case AggregationMode::Sum: return "sum";
  }
  return "gcn";
}

AggregationMode parse_aggregation_mode(std::string_view text) {
  if (text == "gcn" || text == "symmetric-gcn") return AggregationMode::SymmetricGcn;
  if (text == "mean" || text == "row-mean") return AggregationMode::RowMean;
  if (text == "sum") return AggregationMode::Sum;
  throw Error(ErrorCode::InvalidParameter, "unknown aggregation mode '" + std::string(text) + "'");
}

AttributedGraph build_graph(Matrix features, std::span<const Edge> edges, Index sensitive_col,
                            std::span<const std::uint8_t> labels, const SplitSpec& split) {
  const Index n = features.rows();
  if (n == 0) throw Error(ErrorCode::EmptyGraph, "graph has no nodes");
  if (static_cast<Index>(labels.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "labels have length " + std::to_string(labels.size()) +
                                              " but there are " + std::to_string(n) + " nodes");
  }
  if (sensitive_col < 0 || sensitive_col >= features.cols()) {
    throw Error(ErrorCode::IndexOutOfRange, "sensitive column " + std::to_string(sensitive_col) +
                                                " outside " + std::to_string(features.cols()) +
                                                " feature columns");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) {
      throw Error(ErrorCode::NonBinaryColumn, "label " + std::to_string(labels[i]) +
                                                  " at node " + std::to_string(i));
    }
  }
  auto sensitive = std::make_shared<const BinaryVector>(read_sensitive(features, sensitive_col));
  auto topology = make_topology(n, edges);
  auto label_vec = std::make_shared<const BinaryVector>(labels.begin(), labels.end());

  SplitMasks masks = split.explicit_masks
                         ? *split.explicit_masks
                         : stratified_split(*label_vec, split.train_fraction, split.val_fraction,
                                            split.seed);
  validate_masks(masks, n);

  return AttributedGraph(std::move(topology), std::make_shared<const Matrix>(std::move(features)),
                         std::move(sensitive), std::move(label_vec), sensitive_col,
                         std::make_shared<const SplitMasks>(std::move(masks)));
}

AttributedGraph build_graph(Matrix features, std::span<const Edge> edges, Index sensitive_col,
                            std::span<const double> labels, const SplitSpec& split) {
  BinaryVector y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_binary(labels[i])) {
      throw Error(ErrorCode::NonBinaryColumn, "label " + std::to_string(labels[i]) +
                                                  " at node " + std::to_string(i));
    }
    y[i] = static_cast<std::uint8_t>(labels[i]);
  }
  return build_graph(std::move(features), edges, sensitive_col, std::span<const std::uint8_t>(y),
                     split);
}

SplitMasks stratified_split(std::span<const std::uint8_t> labels, double train_fraction,
                            double val_fraction, std::uint64_t seed) {
  if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0) {
    throw Error(ErrorCode::InvalidParameter, "split fractions must be non-negative and sum to <= 1");
  }
  const std::size_t n = labels.size();
  SplitMasks m{BinaryVector(n, 0), BinaryVector(n, 0), BinaryVector(n, 0)};
  std::mt19937_64 rng(seed);
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto count = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * count));
    const auto n_val = std::min(members.size() - n_train,
                                static_cast<std::size_t>(std::llround(val_fraction * count)));
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& target = k < n_train ? m.train : (k < n_train + n_val ? m.val : m.test);
      target[members[k]] = 1;
    }
  }
  return m;
}

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g, AggregationMode mode) {
  const auto& topo = g.topology();
  const Index n = g.num_nodes();
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    inv_sqrt_deg[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(static_cast<double>(topo.degree(i) + 1));
  }

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(topo.neighbors.size() + static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double deg = static_cast<double>(topo.degree(i) + 1);
    auto weight = [&](Index j) {
      switch (mode) {
        case AggregationMode::SymmetricGcn:
          return inv_sqrt_deg[static_cast<std::size_t>(i)] * inv_sqrt_deg[static_cast<std::size_t>(j)];
        case AggregationMode::RowMean: return 1.0 / deg;
        case AggregationMode::Sum: return 1.0;
      }
      return 1.0;
    };
    bool self_done = false;
    for (Index j : topo.row(i)) {
      if (!self_done && j > i) {
        entries.emplace_back(i, i, weight(i));
        self_done = true;
      }
      entries.emplace_back(i, j, weight(j));
    }
    if (!self_done) entries.emplace_back(i, i, weight(i));
  }

  NormalizedAdjacency adj;
  adj.mode = mode;
  adj.matrix.resize(n, n);
  adj.matrix.setFromTriplets(entries.begin(), entries.end());
  adj.matrix.makeCompressed();
  return adj;
}

NormalizedAdjacency sample_adjacency(const AttributedGraph& g, Index k, std::mt19937_64& rng) {
  if (k < 0) throw Error(ErrorCode::InvalidParameter, "neighbor sample size must be >= 0");
  const auto& topo = g.topology();
  const Index n = g.num_nodes();
  std::vector<Eigen::Triplet<double>> entries;
  std::vector<Index> pool;
  for (Index i = 0; i < n; ++i) {
    auto row = topo.row(i);
    pool.assign(row.begin(), row.end());
    const auto take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(k));
    // Partial Fisher-Yates: the first `take` slots end up a uniform sample.
    for (std::size_t a = 0; a < take; ++a) {
      std::uniform_int_distribution<std::size_t> pick(a, pool.size() - 1);
      std::swap(pool[a], pool[pick(rng)]);
    }
    pool.resize(take);
    pool.push_back(i);
    std::sort(pool.begin(), pool.end());
    for (Index j : pool) entries.emplace_back(i, j, 1.0);
  }
  NormalizedAdjacency adj;
  adj.mode = AggregationMode::Sum;
  adj.matrix.resize(n, n);
  adj.matrix.setFromTriplets(entries.begin(), entries.end());
  adj.matrix.makeCompressed();
  return adj;
}

AttributedGraph flip_sensitive(const AttributedGraph& g, std::uint8_t target) {
  if (target > 1) throw Error(ErrorCode::NonBinaryColumn, "intervention value must be 0 or 1");
  Matrix x = g.features();
  x.col(g.sensitive_col()).setConstant(static_cast<double>(target));
  return g.with_features(std::move(x));
}

AttributedGraph perturb_features(const AttributedGraph& g, double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) {
    throw Error(ErrorCode::NegativeStd, "noise std " + std::to_string(noise_std));
  }
  if (noise_std == 0.0) return g;
  Matrix x = g.features();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_std);
  const auto& test = g.masks().test;
  for (Index i = 0; i < x.rows(); ++i) {
    if (!test[static_cast<std::size_t>(i)]) continue;
    for (Index c = 0; c < x.cols(); ++c) {
      if (c == g.sensitive_col()) continue;
      x(i, c) += noise(rng);
    }
  }
  return g.with_features(std::move(x));
}

std::vector<Index> mask_indices(const BinaryVector& mask) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

}  // namespace grafair
