#pragma once

#include "tmm/metrics.hpp"
#include "tmm/protamine.hpp"
#include "tmm/scenario.hpp"
#include "tmm/simulator.hpp"
#include "tmm/tool_delivery.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace tmm {

enum class Mode { posthoc, execution_time, both };

Mode parse_mode(const std::string &text);
std::string to_string(Mode m);

struct ExperimentConfig {
  std::string scenario = "protamine";
  std::size_t count = 300;
  std::uint64_t seed = 7;
  Mode mode = Mode::both;
  std::size_t episode_cap = 200;
  protamine::Params protamine;
  tool_delivery::Layout layout;
  tool_delivery::Params tool_delivery;
  std::optional<PriorSpec> prior; // scenario default when unset
  std::filesystem::path output_dir;
  std::string format = "json"; // per-sequence results: json or csv
  Execution execution = Execution::parallel;

  /// Throws std::invalid_argument on invalid fields.
  void check() const;
};

/// Parse a config document. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json &j);
ExperimentConfig load_config(const std::filesystem::path &path);
nlohmann::json to_json(const ExperimentConfig &cfg);

Scenario make_scenario(const ExperimentConfig &cfg);
SimConfig sim_config(const ExperimentConfig &cfg, const Scenario &sc);

struct DatasetStats {
  std::size_t sequences = 0;
  std::size_t misaligned = 0;
  std::size_t capped = 0;
  std::size_t with_request = 0;
  double mean_length = 0.0;
  std::optional<std::size_t> bolus_episodes;   // protamine only
  std::optional<std::size_t> near_misses;      // protamine only
  std::optional<double> posthoc_bolus_accuracy; // protamine only
};

struct ExperimentResult {
  std::vector<Trajectory> dataset;
  DatasetStats stats;
  std::optional<MetricsReport> posthoc;
  std::optional<MetricsReport> execution_time;
  double generation_seconds = 0.0;
};

/// Inference over full trajectories (post-hoc) or their truncated views.
MetricsReport evaluate(const Scenario &sc, const PriorSpec &prior, std::span<const Trajectory> data,
                       bool truncated, Execution exec);

/// Generate the dataset, evaluate the selected modes, and write artifacts when
/// cfg.output_dir is set. Throws ModelInconsistencyError when any sequence is
/// impossible under every profile.
ExperimentResult run_experiment(const ExperimentConfig &cfg);

nlohmann::json metrics_json(const ExperimentConfig &cfg, const Scenario &sc, const ExperimentResult &res);
std::string metrics_table(const ExperimentConfig &cfg, const ExperimentResult &res);
std::string results_csv(const Scenario &sc, const ExperimentResult &res);

/// dataset.jsonl, metrics.json, metrics.txt, results.{json,csv}, timing.json
void write_artifacts(const ExperimentConfig &cfg, const Scenario &sc, const ExperimentResult &res,
                     const std::filesystem::path &dir);

} // namespace tmm
