#include "dflmesh/engine.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <thread>

#include "dflmesh/rng.hpp"

namespace dflmesh {

void TrainConfig::validate() const {
  if (schedule == StepSchedule::Constant && !(eta > 0.0)) throw Error(ErrorKind::InvalidArgument, "eta must be > 0");
  if (schedule == StepSchedule::InverseTime && !(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be > 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw Error(ErrorKind::InvalidArgument, "beta must lie in [0,1)");
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "K must be >= 1");
  if (eval_stride < 1) throw Error(ErrorKind::InvalidArgument, "eval_stride must be >= 1");
  if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
}

double TrainConfig::step_size(std::size_t t) const {
  return schedule == StepSchedule::Constant ? eta : c / static_cast<double>(std::max<std::size_t>(t, 1));
}

bool TrainConfig::stepsize_guard_exceeded() const {
  if (!smoothness_hint) return false;
  return step_size(1) > 1.0 / (8.0 * *smoothness_hint * static_cast<double>(K));
}

std::vector<NodeState> init_nodes(std::size_t n, const Vector& w0) {
  std::vector<NodeState> states(n);
  for (std::size_t i = 0; i < n; ++i) states[i] = NodeState{i, w0, w0};
  return states;
}

void local_round(NodeState& node, const TrainConfig& cfg, const Objective& obj, const Dataset& data,
                 const Shard& shard, std::size_t t) {
  if (shard.empty()) throw Error(ErrorKind::InvalidArgument, "node " + std::to_string(node.id) + " has no data");
  Rng rng(child_seed(cfg.seed, node.id, t));
  const double eta = cfg.step_size(t);
  std::vector<std::size_t> batch(cfg.batch_size);
  Vector grad;
  node.prev_params = node.params;
  for (std::size_t k = 0; k < cfg.K; ++k) {
    if (cfg.batch_size == 0) {
      obj.gradient_into(node.params, data, shard, grad);
    } else {
      for (auto& r : batch) r = shard[static_cast<std::size_t>(rng.below(shard.size()))];
      obj.gradient_into(node.params, data, batch, grad);
    }
    Vector next = node.params - eta * grad + cfg.beta * (node.params - node.prev_params);
    if (!next.allFinite()) {
      throw Error(ErrorKind::NonFinite, "round " + std::to_string(t) + ", local step " + std::to_string(k) +
                                            ", node " + std::to_string(node.id));
    }
    node.prev_params = std::move(node.params);
    node.params = std::move(next);
  }
}

Eigen::MatrixXd alive_mixing_weights(const MixingMatrix& m, const std::vector<bool>& alive) {
  const auto n = static_cast<Eigen::Index>(m.size());
  if (alive.size() != m.size()) throw Error(ErrorKind::DimensionMismatch, "alive mask size differs from N");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!alive[static_cast<std::size_t>(i)]) {
      w(i, i) = 1.0;
      continue;
    }
    double lost = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (alive[static_cast<std::size_t>(j)]) {
        w(i, j) = m.matrix()(i, j);
      } else {
        lost += m.matrix()(i, j);
      }
    }
    w(i, i) += lost;
  }
  return w;
}

void communication_round(std::vector<NodeState>& states, const MixingMatrix& m, const std::vector<bool>& alive) {
  if (states.size() != m.size()) throw Error(ErrorKind::DimensionMismatch, "state count differs from mixing size");
  if (alive.size() != states.size()) throw Error(ErrorKind::DimensionMismatch, "alive mask size differs from N");
  bool any = false;
  bool all = true;
  for (bool a : alive) {
    any = any || a;
    all = all && a;
  }
  if (!any) throw Error(ErrorKind::AllNodesFailed, "no node alive for the communication round");

  const auto n = static_cast<Eigen::Index>(states.size());
  const auto p = states.front().params.size();
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (states[static_cast<std::size_t>(i)].params.size() != p) {
      throw Error(ErrorKind::DimensionMismatch, "nodes disagree on parameter count");
    }
    x.row(i) = states[static_cast<std::size_t>(i)].params.transpose();
  }
  const Eigen::MatrixXd mixed =
      all ? mix_step(m, x) : Eigen::MatrixXd(alive_mixing_weights(m, alive) * x);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& s = states[static_cast<std::size_t>(i)];
    s.params = mixed.row(i).transpose();
    s.prev_params = s.params;
  }
}

double consensus_distance(std::span<const NodeState> states, const std::vector<bool>& alive) {
  Vector mean;
  std::size_t count = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!alive.empty() && !alive[i]) continue;
    if (count == 0) mean = Vector::Zero(states[i].params.size());
    mean += states[i].params;
    ++count;
  }
  if (count == 0) return 0.0;
  mean /= static_cast<double>(count);
  double s = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!alive.empty() && !alive[i]) continue;
    s += (states[i].params - mean).squaredNorm();
  }
  return std::sqrt(s);
}

double consensus_distance(std::span<const NodeState> states) { return consensus_distance(states, {}); }

std::vector<bool> FailurePlan::alive_mask(std::size_t n, std::size_t round) const {
  std::vector<bool> alive(n, true);
  if (fraction <= 0.0) return alive;
  if (fraction >= 1.0) throw Error(ErrorKind::InvalidArgument, "failure fraction must be < 1");
  const auto failed = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (failed >= n) throw Error(ErrorKind::AllNodesFailed, "failure fraction removes every node");
  Rng rng(child_seed(seed, mode == FailureMode::Transient ? round : 0));
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  rng.shuffle(std::span<std::size_t>(ids));
  for (std::size_t k = 0; k < failed; ++k) alive[ids[k]] = false;
  return alive;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double alive_edge_count(const Graph& g, const std::vector<bool>& alive) {
  double edges = 0.0;
  for (const auto& [i, j] : g.edges()) edges += alive[i] && alive[j] ? 1.0 : 0.0;
  return edges;
}

}  // namespace

RunResult run_experiment(const TrainConfig& cfg, const ExperimentInputs& in) {
  cfg.validate();
  const std::size_t n = in.graph.node_count();
  if (in.mixing.size() != n || in.partition.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "graph, mixing matrix and partition disagree on N");
  }
  if (cfg.stepsize_guard_exceeded()) {
    std::cerr << "warning: eta exceeds 1/(8LK) for the supplied smoothness constant\n";
  }
  const Vector w0 = in.initial_params ? *in.initial_params : in.objective.initial_params(cfg.seed);
  if (static_cast<std::size_t>(w0.size()) != in.objective.param_count()) {
    throw Error(ErrorKind::DimensionMismatch, "initial parameters have the wrong size");
  }
  const auto eval_rows = all_rows(in.eval);
  const double params = static_cast<double>(in.objective.param_count());

  RunResult result;
  result.final_states = init_nodes(n, w0);
  auto& states = result.final_states;
  double cum_cost = 0.0;

  try {
    for (std::size_t t = 1; t <= cfg.T; ++t) {
      const auto alive = in.failures.alive_mask(n, t);
      std::vector<std::size_t> active;
      for (std::size_t i = 0; i < n; ++i) {
        if (alive[i]) active.push_back(i);
      }
      parallel_for(active.size(), cfg.threads, [&](std::size_t k) {
        const std::size_t i = active[k];
        local_round(states[i], cfg, in.objective, in.train, in.partition.shards[i], t);
      });
      communication_round(states, in.mixing, alive);
      cum_cost += 2.0 * alive_edge_count(in.graph, alive) * params;
      if (active.size() < n && !is_connected(in.graph.induced(alive))) ++result.partitioned_rounds;
      result.final_alive = alive;

      if (cfg.track_gradients) {
        Vector mean = Vector::Zero(w0.size());
        for (const auto& s : states) mean += s.params;
        mean /= static_cast<double>(n);
        result.avg_grad_norm_sq.push_back(
            global_gradient(in.objective, mean, in.train, in.partition).squaredNorm());
        result.avg_iterates.push_back(std::move(mean));
      }

      if (t % cfg.eval_stride != 0 && t != cfg.T) continue;
      MetricsRecord rec;
      rec.round = t;
      std::vector<double> train(active.size());
      std::vector<double> test(active.size());
      std::vector<double> acc(active.size(), std::numeric_limits<double>::quiet_NaN());
      parallel_for(active.size(), cfg.threads, [&](std::size_t k) {
        const auto& w = states[active[k]].params;
        train[k] = global_loss(in.objective, w, in.train, in.partition);
        test[k] = in.objective.loss(w, in.eval, eval_rows);
        if (in.objective.is_classifier()) acc[k] = accuracy(in.objective, w, in.eval, eval_rows);
      });
      const double inv = 1.0 / static_cast<double>(active.size());
      for (std::size_t k = 0; k < active.size(); ++k) {
        rec.train_loss += train[k] * inv;
        rec.test_loss += test[k] * inv;
        rec.test_acc = k == 0 ? acc[k] * inv : rec.test_acc + acc[k] * inv;
      }
      rec.consensus_dist = consensus_distance(states, alive);
      rec.cum_comm_cost = cum_cost;
      result.records.push_back(rec);
    }
  } catch (const Error& e) {
    throw ExperimentAborted(e, std::move(result));
  }
  return result;
}

}  // namespace dflmesh
