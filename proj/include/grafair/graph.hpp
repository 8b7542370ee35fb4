#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace grafair {

/// Node-major dense matrix: row i belongs to node i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Index = std::int64_t;
using Edge = std::pair<Index, Index>;

/// Binary per-node column (labels, sensitive attribute, split membership).
using BinaryVector = std::vector<std::uint8_t>;

struct SplitMasks {
  BinaryVector train;
  BinaryVector val;
  BinaryVector test;
};

/// Seeded stratified split on labels, or an explicit set of masks.
struct SplitSpec {
  double train_fraction = 0.5;
  double val_fraction = 0.25;
  std::uint64_t seed = 0;
  std::optional<SplitMasks> explicit_masks;
};

/// Undirected, unweighted adjacency in CSR form without self-loops.
struct Topology {
  std::vector<Index> offsets;    // n + 1
  std::vector<Index> neighbors;  // sorted within each row

  Index num_nodes() const { return static_cast<Index>(offsets.size()) - 1; }
  Index degree(Index i) const { return offsets[i + 1] - offsets[i]; }
  std::span<const Index> row(Index i) const {
    return {neighbors.data() + offsets[i], static_cast<std::size_t>(degree(i))};
  }
};

/// Immutable attributed graph. Copies produced by flip_sensitive and
/// perturb_features share the topology and labels with their source.
class AttributedGraph {
 public:
  AttributedGraph(std::shared_ptr<const Topology> topology, std::shared_ptr<const Matrix> features,
                  std::shared_ptr<const BinaryVector> sensitive,
                  std::shared_ptr<const BinaryVector> labels, Index sensitive_col,
                  std::shared_ptr<const SplitMasks> masks);

  Index num_nodes() const { return topology_->num_nodes(); }
  Index num_features() const { return features_->cols(); }
  /// Undirected edge count (each pair counted once).
  Index num_edges() const { return static_cast<Index>(topology_->neighbors.size()) / 2; }

  const Topology& topology() const { return *topology_; }
  const Matrix& features() const { return *features_; }
  const BinaryVector& sensitive() const { return *sensitive_; }
  const BinaryVector& labels() const { return *labels_; }
  Index sensitive_col() const { return sensitive_col_; }
  const SplitMasks& masks() const { return *masks_; }

  std::shared_ptr<const Topology> topology_ptr() const { return topology_; }
  std::shared_ptr<const BinaryVector> labels_ptr() const { return labels_; }
  std::shared_ptr<const SplitMasks> masks_ptr() const { return masks_; }

  /// Same graph with a different feature matrix; the sensitive vector is re-read
  /// from the sensitive column.
  AttributedGraph with_features(Matrix features) const;
  AttributedGraph with_masks(SplitMasks masks) const;

  /// Sorted list of undirected edges (i < j).
  std::vector<Edge> edge_list() const;

  friend bool operator==(const AttributedGraph& a, const AttributedGraph& b);

 private:
  std::shared_ptr<const Topology> topology_;
  std::shared_ptr<const Matrix> features_;
  std::shared_ptr<const BinaryVector> sensitive_;
  std::shared_ptr<const BinaryVector> labels_;
  Index sensitive_col_;
  std::shared_ptr<const SplitMasks> masks_;
};

enum class AggregationMode {
  SymmetricGcn,  // D^-1/2 (A+I) D^-1/2
  RowMean,       // D^-1 (A+I)
  Sum,           // A+I
};

std::string_view to_string(AggregationMode mode);
AggregationMode parse_aggregation_mode(std::string_view text);

struct NormalizedAdjacency {
  SparseMatrix matrix;
  AggregationMode mode = AggregationMode::SymmetricGcn;
};

/// Builds and validates a graph. Duplicate and reversed pairs collapse to one
/// undirected edge; self-loops are dropped.
AttributedGraph build_graph(Matrix features, std::span<const Edge> edges, Index sensitive_col,
                            std::span<const std::uint8_t> labels, const SplitSpec& split);

/// Overload for integer label columns read from files; values outside {0,1} are rejected.
AttributedGraph build_graph(Matrix features, std::span<const Edge> edges, Index sensitive_col,
                            std::span<const double> labels, const SplitSpec& split);

/// Seeded split stratified on labels. Each class is shuffled separately and cut
/// into train/val/test by the requested fractions.
SplitMasks stratified_split(std::span<const std::uint8_t> labels, double train_fraction,
                            double val_fraction, std::uint64_t seed);

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g, AggregationMode mode);

/// Neighbor sampler: each node keeps itself plus up to `k` neighbors drawn
/// uniformly without replacement; entries are 1 (sum aggregation).
NormalizedAdjacency sample_adjacency(const AttributedGraph& g, Index k, std::mt19937_64& rng);

/// Intervention S <- target on every node (sensitive vector and feature column).
AttributedGraph flip_sensitive(const AttributedGraph& g, std::uint8_t target);

/// Adds N(0, noise_std^2) noise to every non-sensitive feature of test-mask nodes.
AttributedGraph perturb_features(const AttributedGraph& g, double noise_std, std::uint64_t seed);

/// Row indices where the mask is set, in increasing order.
std::vector<Index> mask_indices(const BinaryVector& mask);

}  // namespace grafair
