#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dflmesh/data.hpp"
#include "dflmesh/engine.hpp"
#include "dflmesh/error.hpp"
#include "dflmesh/graph.hpp"
#include "dflmesh/mixing.hpp"
#include "dflmesh/models.hpp"
#include "dflmesh/spectral.hpp"

namespace dflmesh {

struct TopologySpec {
  std::string kind = "ring";  ///< ring | complete | erdos_renyi | expander | cubic | file
  std::size_t n = 10;
  std::size_t d = 4;
  double p = 0.0;  ///< erdos_renyi; 0 means ln(n)/n
  std::uint64_t seed = 0;
  std::string path;   ///< kind == file: edge list or JSON graph
  std::string label;  ///< defaults to the kind (plus degree for expanders)

  std::string display_name() const;
};

struct ModelSpec {
  std::string kind = "least_squares";  ///< least_squares | logistic | mlp
  std::size_t hidden = 32;
  double l2 = 1e-4;
};

struct DataSpec {
  std::string kind = "synthetic_classification";  ///< synthetic_classification | synthetic_regression | idx
  std::size_t samples = 1000;
  std::size_t test_samples = 500;
  std::size_t dims = 10;
  int classes = 10;
  double separation = 4.0;
  int groups = 4;
  double group_shift = 1.0;
  double weight_spread = 0.5;
  double noise = 0.1;
  std::uint64_t seed = 0;
  std::string partition = "iid";  ///< iid | label
  std::optional<std::size_t> shards;  ///< must equal the node count when given
  std::string train_images, train_labels, test_images, test_labels;
};

struct BoundsSpec {
  bool enabled = false;
  std::size_t t_max = 10000;
};

struct CompareSpec {
  std::vector<TopologySpec> topologies;
  std::optional<double> target_loss;  ///< threshold for non-convex models
  std::vector<double> fractions;      ///< failure sweep
};

/// Declarative description of one experiment; validated before any work.
struct ExperimentConfig {
  std::string name = "experiment";
  TopologySpec topology;
  MixingSpec mixing;
  ModelSpec model;
  TrainConfig train;
  DataSpec data;
  FailurePlan failures;
  BoundsSpec bounds;
  CompareSpec compare;
  std::string output;  ///< default output directory
};

/// Parses and validates a config. Unknown keys and type errors raise Config
/// errors naming the key path; malformed JSON reports line and column.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

Graph build_topology(const TopologySpec& spec);
std::unique_ptr<Objective> build_objective(const ModelSpec& spec, const Dataset& train);

struct ExperimentData {
  Dataset train;
  Dataset test;
  Partition partition;
};

ExperimentData build_data(const DataSpec& spec, std::size_t nodes);

/// Reference loss for rounds-to-threshold: the global least-squares
/// optimum, a centralized full-batch optimum for logistic regression, and
/// nothing for the MLP.
std::optional<double> reference_optimum(const Objective& obj, const ExperimentData& data);

struct ExperimentOutcome {
  Graph graph;
  SpectralSummary spectral;
  double theta = 0.0;
  RunResult run;
};

/// Runs one experiment; optionally overrides the topology.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                 const TopologySpec& topology);

/// Writes metrics.csv, topology.json, spectral.json and (when enabled)
/// bounds.json into `out_dir`. Every file is written atomically.
ExperimentOutcome run_from_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

std::string metrics_csv(const std::vector<MetricsRecord>& records);
/// Parses a metrics CSV, checking the header and column count.
std::vector<MetricsRecord> parse_metrics_csv(const std::string& text);

/// Writes `content` to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

struct ComparisonRow {
  std::string topology;
  double lambda = 0.0;
  std::optional<std::size_t> rounds_to_threshold;
  double final_accuracy = 0.0;  ///< NaN for regression
  double final_train_loss = 0.0;
  double total_cost = 0.0;
};

/// Runs the shared experiment once per topology. With `out_dir` set, writes
/// metrics_<topology>.csv per row and comparison.csv.
std::vector<ComparisonRow> compare_topologies(const ExperimentConfig& cfg, const std::vector<TopologySpec>& topologies,
                                              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct FailureRow {
  std::string topology;
  double fraction = 0.0;
  double final_train_loss = 0.0;
  double final_accuracy = 0.0;
  double loss_increase = 0.0;   ///< versus the fraction-0 run of the same topology
  double accuracy_drop = 0.0;
  std::size_t partitioned_rounds = 0;
  std::size_t rounds = 0;
};

/// Reruns every topology per failure fraction with the config's failure mode
/// and seed. With `out_dir` set, writes failures.csv.
std::vector<FailureRow> failure_sweep(const ExperimentConfig& cfg, const std::vector<TopologySpec>& topologies,
                                      const std::vector<double>& fractions,
                                      const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// CLI exit status: 0 ok, 2 configuration or input error, 3 numeric failure.
int exit_code_for(ErrorKind kind);

}  // namespace dflmesh
