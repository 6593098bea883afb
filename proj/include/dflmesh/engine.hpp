#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dflmesh/data.hpp"
#include "dflmesh/error.hpp"
#include "dflmesh/graph.hpp"
#include "dflmesh/mixing.hpp"
#include "dflmesh/models.hpp"

namespace dflmesh {

enum class StepSchedule { Constant, InverseTime };

/// Hyper-parameters of DFedAvgM. `beta` is the heavy-ball momentum, not the
/// theta of laplacian_mixing.
struct TrainConfig {
  StepSchedule schedule = StepSchedule::Constant;
  double eta = 0.01;  ///< constant step size
  double c = 0.0;     ///< eta_t = c / t when schedule == InverseTime
  double beta = 0.0;
  std::size_t K = 1;
  std::size_t T = 1;
  std::size_t batch_size = 1;  ///< 0: full local shard, deterministic gradient
  std::uint64_t seed = 0;
  std::size_t eval_stride = 1;
  std::size_t threads = 1;
  std::optional<double> smoothness_hint;  ///< enables the eta <= 1/(8LK) warning
  bool track_gradients = false;

  /// Throws InvalidArgument when eta/c <= 0, beta outside [0,1), K < 1.
  void validate() const;
  /// Step size of round t (1-based).
  double step_size(std::size_t t) const;
  /// True when a smoothness hint is set and eta > 1/(8 L K).
  bool stepsize_guard_exceeded() const;
};

struct NodeState {
  std::size_t id = 0;
  Vector params;
  Vector prev_params;
};

/// Same initial parameters for every node, prev_params = params.
std::vector<NodeState> init_nodes(std::size_t n, const Vector& w0);

/// K heavy-ball steps w <- w - eta_t g(w; xi) + beta (w - w_prev) on the
/// node's shard, batches drawn with replacement from the node's private
/// stream child_seed(seed, node, t). Throws NonFinite with (t, k, node).
void local_round(NodeState& node, const TrainConfig& cfg, const Objective& obj, const Dataset& data,
                 const Shard& shard, std::size_t t);

/// Gossip weights with failed nodes removed: each alive row keeps its alive
/// entries and moves the mass of failed neighbours onto its diagonal; failed
/// rows become identity rows.
Eigen::MatrixXd alive_mixing_weights(const MixingMatrix& m, const std::vector<bool>& alive);

/// One mixing step. Alive nodes average over alive neighbours, failed nodes
/// keep their stale state; every node's prev_params is reset to params.
void communication_round(std::vector<NodeState>& states, const MixingMatrix& m, const std::vector<bool>& alive);

/// Frobenius distance of the stacked parameters to their column mean,
/// optionally restricted to alive nodes.
double consensus_distance(std::span<const NodeState> states);
double consensus_distance(std::span<const NodeState> states, const std::vector<bool>& alive);

enum class FailureMode { Transient, Permanent };

struct FailurePlan {
  double fraction = 0.0;
  FailureMode mode = FailureMode::Transient;
  std::uint64_t seed = 0;

  /// round(fraction * n) nodes fail, resampled every round in transient mode
  /// and fixed for the whole run in permanent mode.
  std::vector<bool> alive_mask(std::size_t n, std::size_t round) const;
};

struct MetricsRecord {
  std::size_t round = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;  ///< NaN for non-classifiers
  double consensus_dist = 0.0;
  double cum_comm_cost = 0.0;
};

struct RunResult {
  std::vector<MetricsRecord> records;
  /// |grad f(w_bar^t)|^2 after every round, when track_gradients is set.
  std::vector<double> avg_grad_norm_sq;
  /// w_bar^t after every round, when track_gradients is set.
  std::vector<Vector> avg_iterates;
  /// Rounds whose alive subgraph was disconnected.
  std::size_t partitioned_rounds = 0;
  std::vector<NodeState> final_states;
  std::vector<bool> final_alive;
};

/// Thrown by run_experiment on a numeric failure; carries the metrics
/// recorded before the abort.
class ExperimentAborted : public Error {
 public:
  ExperimentAborted(const Error& cause, RunResult partial)
      : Error(cause.kind(), cause.detail()), partial_(std::move(partial)) {}
  const RunResult& partial() const { return partial_; }

 private:
  RunResult partial_;
};

struct ExperimentInputs {
  const Graph& graph;
  const MixingMatrix& mixing;
  const Objective& objective;
  const Dataset& train;
  const Partition& partition;
  const Dataset& eval;
  FailurePlan failures{};
  std::optional<Vector> initial_params;  ///< default: objective.initial_params(seed)
};

/// Runs T rounds of local training, mixing and evaluation. Metrics average
/// over the nodes alive in that round; train loss is the global objective at
/// each node's parameters.
RunResult run_experiment(const TrainConfig& cfg, const ExperimentInputs& in);

}  // namespace dflmesh
