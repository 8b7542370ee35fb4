#include "grafair/report.hpp"

#include "grafair/errors.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace grafair {
namespace {

std::int64_t count(const BinaryVector& v) { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); }

std::string csv_number(double x) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << x;
  return out.str();
}

const char* kCsvMetrics = "f1_mean,f1_std,sp_mean,sp_std,eo_mean,eo_std,cf_mean,cf_std,rs_mean,rs_std";

std::string csv_metrics(const AggregateMetrics& a) {
  const auto& m = a.mean;
  const auto& s = a.stddev;
  std::string out;
  for (auto [x, y] : {std::pair{m.f1, s.f1}, {m.delta_sp, s.delta_sp}, {m.delta_eo, s.delta_eo},
                      {m.delta_cf, s.delta_cf}, {m.delta_rs, s.delta_rs}}) {
    out += "," + csv_number(x) + "," + csv_number(y);
  }
  return out;
}

}  // namespace

Json metrics_json(const MetricsReport& m) {
  Json counts = Json::array();
  for (int yhat = 0; yhat < 2; ++yhat)
    for (int y = 0; y < 2; ++y)
      for (int s = 0; s < 2; ++s) {
        counts.push_back({{"yhat", yhat}, {"y", y}, {"s", s}, {"count", m.group_counts.at(yhat, y, s)}});
      }
  return {{"f1", m.f1},
          {"delta_sp", m.delta_sp},
          {"delta_eo", m.delta_eo},
          {"delta_cf", m.delta_cf},
          {"delta_rs", m.delta_rs},
          {"accuracy", m.accuracy},
          {"cf_flip_rate", m.cf_flip_rate},
          {"rs_change_rate", m.rs_change_rate},
          {"group_counts", counts}};
}

Json graph_summary_json(const AttributedGraph& g) {
  return {{"nodes", g.num_nodes()},
          {"features", g.num_features()},
          {"edges", g.num_edges()},
          {"sensitive_col", g.sensitive_col()},
          {"positive_labels", count(g.labels())},
          {"sensitive_ones", count(g.sensitive())},
          {"train", count(g.masks().train)},
          {"val", count(g.masks().val)},
          {"test", count(g.masks().test)}};
}

Json run_json(const RunResult& run) {
  Json trace = Json::array();
  for (const auto& t : run.trace) trace.push_back({t.kl_term, t.nll_term, t.total});
  return {{"seed", run.seed}, {"metrics", metrics_json(run.metrics)}, {"trace_columns", {"kl", "nll", "total"}},
          {"trace", trace}};
}

Json experiment_json(const TrainConfig& config, const AttributedGraph& g,
                     const ExperimentResult& result) {
  Json cfg = Json::object();
  for (const auto& key : config_keys()) cfg[key] = get_config_value(config, key);
  Json runs = Json::array();
  for (const auto& r : result.runs) runs.push_back(run_json(r));
  Json summary = metrics_json(result.summary.mean);
  return {{"config", cfg},
          {"graph", graph_summary_json(g)},
          {"runs", runs},
          {"mean", summary},
          {"std", metrics_json(result.summary.stddev)}};
}

Json timings_json(const ExperimentResult& result) {
  Json runs = Json::array();
  for (const auto& r : result.runs) {
    const double total = std::accumulate(r.epoch_seconds.begin(), r.epoch_seconds.end(), 0.0);
    const double mean = r.epoch_seconds.empty() ? 0.0 : total / static_cast<double>(r.epoch_seconds.size());
    runs.push_back({{"seed", r.seed}, {"mean_epoch_seconds", mean}, {"epoch_seconds", r.epoch_seconds}});
  }
  return {{"runs", runs}};
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string("beta,") + kCsvMetrics + "\n";
  for (const auto& r : rows) out += csv_number(r.beta) + csv_metrics(r.result.summary) + "\n";
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = std::string("variant,") + kCsvMetrics + "\n";
  for (const auto& r : rows) out += std::string(to_string(r.variant)) + csv_metrics(r.result.summary) + "\n";
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write '" + path + "'");
  out << text;
}

}  // namespace grafair
