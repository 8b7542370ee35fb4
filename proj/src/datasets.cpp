#include "grafair/datasets.hpp"

#include "grafair/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace grafair {
namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open '" + path + "'");
  return in;
}

std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(strip(cur));
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

[[noreturn]] void parse_error(const std::string& source, int line, const std::string& what) {
  throw Error(ErrorCode::ParseError, source + " line " + std::to_string(line) + ": " + what);
}

}  // namespace

const std::vector<DatasetPreset>& dataset_presets() {
  static const std::vector<DatasetPreset> presets = {
      {"german", "german.csv", "german_edges.txt", "GoodCustomer", "Gender",
       {"OtherLoansAtStore", "PurposeOfLoan"}, {{"Female", 1.0}, {"Male", 0.0}}, {{-1.0, 0.0}},
       1000, 27, 22242},
      {"credit", "credit.csv", "credit_edges.txt", "NoDefaultNextMonth", "Age", {"Single"}, {}, {},
       30000, 13, 1436858},
      {"bail", "bail.csv", "bail_edges.txt", "RECID", "WHITE", {}, {}, {}, 18876, 18, 321308},
  };
  return presets;
}

const DatasetPreset* find_preset(std::string_view name) {
  for (const auto& p : dataset_presets()) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

CsvTable read_csv(const std::string& path) {
  auto in = open_input(path);
  CsvTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      parse_error(path, line_no, "expected " + std::to_string(table.header.size()) +
                                     " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) parse_error(path, line_no, "missing header row");
  return table;
}

std::vector<Edge> read_edge_file(const std::string& path) {
  auto in = open_input(path);
  std::vector<Edge> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    const std::string body = strip(line);
    if (body.empty()) continue;
    const auto space = body.find(' ');
    if (space == std::string::npos) parse_error(path, line_no, "expected two node ids");
    const auto a = to_double(strip(body.substr(0, space)));
    const auto b = to_double(strip(body.substr(space + 1)));
    if (!a || !b || *a != std::floor(*a) || *b != std::floor(*b) || *a < 0 || *b < 0) {
      parse_error(path, line_no, "node ids must be non-negative integers");
    }
    edges.emplace_back(static_cast<Index>(*a), static_cast<Index>(*b));
  }
  return edges;
}

SplitMasks read_mask_file(const std::string& path, Index num_nodes) {
  const CsvTable table = read_csv(path);
  if (table.header.size() != 2 || table.header[0] != "node_id" || table.header[1] != "split") {
    parse_error(path, 1, "header must be node_id,split");
  }
  const auto n = static_cast<std::size_t>(num_nodes);
  SplitMasks m{BinaryVector(n, 0), BinaryVector(n, 0), BinaryVector(n, 0)};
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int line = table.line_numbers[r];
    const auto id = to_double(table.rows[r][0]);
    if (!id || *id != std::floor(*id) || *id < 0 || *id >= static_cast<double>(num_nodes)) {
      parse_error(path, line, "node_id '" + table.rows[r][0] + "' is not a valid node");
    }
    const auto i = static_cast<std::size_t>(*id);
    if (m.train[i] || m.val[i] || m.test[i]) parse_error(path, line, "node listed twice");
    const auto& split = table.rows[r][1];
    if (split == "train") {
      m.train[i] = 1;
    } else if (split == "val") {
      m.val[i] = 1;
    } else if (split == "test") {
      m.test[i] = 1;
    } else {
      parse_error(path, line, "split must be train, val or test");
    }
  }
  return m;
}

LoadedDataset assemble_dataset(const CsvTable& table, std::span<const Edge> edges,
                               const TableSpec& spec, const SplitSpec& split,
                               const std::string& source) {
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) parse_error(source, 1, "no column named '" + name + "'");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t label_col = column(spec.label_column);
  const std::size_t sens_col = column(spec.sensitive_column);
  std::set<std::size_t> dropped{label_col};
  for (const auto& d : spec.drop_columns) {
    if (d == spec.sensitive_column) parse_error(source, 1, "cannot drop the sensitive column");
    dropped.insert(column(d));
  }

  std::vector<std::size_t> kept;
  std::vector<std::string> names;
  Index sensitive_feature = -1;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (dropped.count(c)) continue;
    if (c == sens_col) sensitive_feature = static_cast<Index>(kept.size());
    kept.push_back(c);
    names.push_back(table.header[c]);
  }

  const auto n = static_cast<Index>(table.rows.size());
  if (n == 0) throw Error(ErrorCode::EmptyGraph, source + " has no rows");
  Matrix features(n, static_cast<Index>(kept.size()));
  std::vector<double> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const int line = table.line_numbers[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const std::string& cell = row[kept[k]];
      std::optional<double> v = to_double(cell);
      if (!v && kept[k] == sens_col) {
        const auto it = spec.sensitive_codes.find(cell);
        if (it != spec.sensitive_codes.end()) v = it->second;
      }
      if (!v) parse_error(source, line, "non-numeric value '" + cell + "' in column " + table.header[kept[k]]);
      features(i, static_cast<Index>(k)) = *v;
    }
    auto y = to_double(row[label_col]);
    if (!y) parse_error(source, line, "non-numeric label '" + row[label_col] + "'");
    const auto it = spec.label_codes.find(*y);
    labels[static_cast<std::size_t>(i)] = it == spec.label_codes.end() ? *y : it->second;
  }

  if (spec.scale_features) {
    for (Index c = 0; c < features.cols(); ++c) {
      if (c == sensitive_feature) continue;
      const double lo = features.col(c).minCoeff();
      const double hi = features.col(c).maxCoeff();
      if (hi > lo) {
        features.col(c) = ((features.col(c).array() - lo) * (2.0 / (hi - lo)) - 1.0).matrix();
      } else {
        features.col(c).setZero();
      }
    }
  }

  return {build_graph(std::move(features), edges, sensitive_feature, labels, split),
          std::move(names), {}};
}

std::vector<std::string> check_statistics(const AttributedGraph& g, const DatasetPreset& preset) {
  std::vector<std::string> warnings;
  auto check = [&](const char* what, Index got, Index expected) {
    if (got != expected) {
      warnings.push_back(preset.name + ": " + what + " " + std::to_string(got) + ", expected " +
                         std::to_string(expected));
    }
  };
  check("nodes", g.num_nodes(), preset.nodes);
  check("features", g.num_features(), preset.features);
  check("edges", g.num_edges(), preset.edges);
  return warnings;
}

LoadedDataset load_dataset(const TrainConfig& config) {
  SplitSpec split;
  split.train_fraction = config.train_fraction;
  split.val_fraction = config.val_fraction;
  split.seed = config.split_seed;

  if (config.dataset == "synth") {
    LoadedDataset out{synth_biased_graph(config.synth_nodes, config.synth_homophily,
                                         config.synth_bias, config.synth_seed, split),
                      {},
                      {}};
    out.feature_names.push_back("sensitive");
    for (Index j = 1; j < out.graph.num_features(); ++j) out.feature_names.push_back("x" + std::to_string(j));
    if (!config.masks_path.empty()) {
      out.graph = out.graph.with_masks(read_mask_file(config.masks_path, out.graph.num_nodes()));
    }
    return out;
  }

  TableSpec spec;
  spec.scale_features = config.scale_features;
  std::string features_path = config.features_path;
  std::string edges_path = config.edges_path;
  const DatasetPreset* preset = find_preset(config.dataset);
  if (preset) {
    const std::filesystem::path dir(config.data_dir);
    if (features_path.empty()) features_path = (dir / preset->features_file).string();
    if (edges_path.empty()) edges_path = (dir / preset->edges_file).string();
    spec.label_column = preset->label_column;
    spec.sensitive_column = preset->sensitive_column;
    spec.drop_columns = preset->drop_columns;
    spec.sensitive_codes = preset->sensitive_codes;
    spec.label_codes = preset->label_codes;
  } else if (config.dataset != "custom") {
    throw Error(ErrorCode::InvalidParameter,
                "unknown dataset '" + config.dataset + "' (german, credit, bail, custom, synth)");
  }
  if (!config.label_column.empty()) spec.label_column = config.label_column;
  if (!config.sensitive_column.empty()) spec.sensitive_column = config.sensitive_column;
  if (!config.drop_columns.empty()) spec.drop_columns = config.drop_columns;
  if (features_path.empty() || edges_path.empty() || spec.label_column.empty() ||
      spec.sensitive_column.empty()) {
    throw Error(ErrorCode::InvalidParameter,
                "custom datasets need features, edges, label_column and sensitive_column");
  }

  const CsvTable table = read_csv(features_path);
  const auto edges = read_edge_file(edges_path);
  if (!config.masks_path.empty()) {
    split.explicit_masks = read_mask_file(config.masks_path, static_cast<Index>(table.rows.size()));
  }
  LoadedDataset out = assemble_dataset(table, edges, spec, split, features_path);
  if (preset) out.warnings = check_statistics(out.graph, *preset);
  return out;
}

}  // namespace grafair
