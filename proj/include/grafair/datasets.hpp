#pragma once

#include "grafair/config.hpp"
#include "grafair/graph.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace grafair {

/// File layout and reference statistics of a public fairness benchmark.
struct DatasetPreset {
  std::string name;
  std::string features_file;
  std::string edges_file;
  std::string label_column;
  std::string sensitive_column;
  std::vector<std::string> drop_columns;
  /// Text values allowed in the sensitive column and their codes.
  std::map<std::string, double> sensitive_codes;
  /// Applied to raw label values before the binary check.
  std::map<double, double> label_codes;
  Index nodes = 0;
  Index features = 0;
  Index edges = 0;
};

const std::vector<DatasetPreset>& dataset_presets();
const DatasetPreset* find_preset(std::string_view name);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // source line of each row
};

/// Comma-separated with a header row; double-quoted fields may contain commas.
/// Throws MissingFile, or ParseError naming the line when a row has the wrong
/// number of fields.
CsvTable read_csv(const std::string& path);

/// Two integer node ids per line separated by whitespace or a comma.
std::vector<Edge> read_edge_file(const std::string& path);

/// CSV with columns node_id, split (train, val or test).
SplitMasks read_mask_file(const std::string& path, Index num_nodes);

struct TableSpec {
  std::string label_column;
  std::string sensitive_column;
  std::vector<std::string> drop_columns;
  std::map<std::string, double> sensitive_codes;
  std::map<double, double> label_codes;
  bool scale_features = true;
};

struct LoadedDataset {
  AttributedGraph graph;
  std::vector<std::string> feature_names;
  std::vector<std::string> warnings;
};

/// Builds a graph from a node table and an edge list. Every kept column other
/// than the label becomes a feature; with scale_features, non-sensitive columns
/// are min-max scaled to [-1, 1].
LoadedDataset assemble_dataset(const CsvTable& table, std::span<const Edge> edges,
                               const TableSpec& spec, const SplitSpec& split,
                               const std::string& source);

/// Loads the dataset named by the config: a preset (files under data_dir),
/// "custom" (explicit paths), or "synth". Preset statistics mismatches are
/// returned as warnings.
LoadedDataset load_dataset(const TrainConfig& config);

/// Checks node, feature and edge counts against the preset table.
std::vector<std::string> check_statistics(const AttributedGraph& g, const DatasetPreset& preset);

/// Two planted sensitive groups of Bernoulli(1/2) membership. A fraction
/// `homophily` of the expected edges (average degree 10) falls inside groups.
/// With probability bias_strength a node's label copies its sensitive value,
/// otherwise it is a fair coin. Column 0 is the sensitive attribute; the other
/// eight columns are (2y - 1) / 2 plus unit Gaussian noise.
AttributedGraph synth_biased_graph(Index n, double homophily, double bias_strength,
                                   std::uint64_t seed, const SplitSpec& split = {});

}  // namespace grafair
