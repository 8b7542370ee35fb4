#pragma once

#include "grafair/config.hpp"
#include "grafair/trainer.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace grafair {

using Json = nlohmann::ordered_json;

Json metrics_json(const MetricsReport& m);
Json graph_summary_json(const AttributedGraph& g);

/// Seed, loss trace and metrics. Wall-clock timings are left out so that the
/// document depends only on config and seed.
Json run_json(const RunResult& run);

/// Config echo, graph and split summary, per-seed runs, mean and population std.
Json experiment_json(const TrainConfig& config, const AttributedGraph& g,
                     const ExperimentResult& result);

/// Per-seed epoch times with their mean.
Json timings_json(const ExperimentResult& result);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::string& path, const std::string& text);

}  // namespace grafair
