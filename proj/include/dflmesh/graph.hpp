#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dflmesh {

class Rng;

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected simple graph on nodes [0, n). Immutable once built.
///
/// Edges are stored normalized (first < second) and sorted; adjacency lists
/// are sorted as well, so two graphs with the same edge set compare equal.
class Graph {
 public:
  Graph() = default;

  /// Throws InvalidArgument on self-loops, duplicate edges or out-of-range
  /// endpoints.
  Graph(std::size_t n, std::vector<Edge> edges);

  std::size_t node_count() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adj_.at(i); }
  std::size_t degree(std::size_t i) const { return adj_.at(i).size(); }
  std::size_t max_degree() const;
  std::size_t min_degree() const;
  bool has_edge(std::size_t i, std::size_t j) const;

  /// 0/1 adjacency matrix A.
  Eigen::MatrixXd adjacency() const;
  /// L = D - A.
  Eigen::MatrixXd laplacian() const;

  /// Subgraph induced by the nodes with keep[i] == true, relabelled densely
  /// in increasing index order.
  Graph induced(const std::vector<bool>& keep) const;

  friend bool operator==(const Graph& a, const Graph& b) { return a.n_ == b.n_ && a.edges_ == b.edges_; }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
};

inline constexpr int kDefaultResampleBudget = 16;

Graph make_ring(std::size_t n);
Graph make_complete(std::size_t n);

/// G(n, p). May be disconnected; see sample_connected.
Graph make_erdos_renyi(std::size_t n, double p, std::uint64_t seed);

/// Union of d/2 random virtual rings with duplicate adjacencies rewired.
/// Resamples (with derived seeds) up to `budget` times until connected and
/// throws Disconnected afterwards.
Graph make_regular_expander(std::size_t n, std::size_t d, std::uint64_t seed,
                            int budget = kDefaultResampleBudget);

/// One draw of the virtual-ring construction, without the connectivity check.
Graph sample_virtual_ring_graph(std::size_t n, std::size_t rings, std::uint64_t seed);

/// Ring plus a random perfect matching of non-adjacent pairs ("an extra edge
/// on top of the ring"): 3-regular, requires even n >= 6.
Graph make_cubic_expander(std::size_t n, std::uint64_t seed, int budget = kDefaultResampleBudget);

/// Calls `generate(attempt_seed)` with seeds derived from `seed` until the
/// result is connected; throws Disconnected after `budget` attempts.
Graph sample_connected(const std::function<Graph(std::uint64_t)>& generate, std::uint64_t seed,
                       int budget = kDefaultResampleBudget);

bool is_connected(const Graph& g);

/// Number of connected components (isolated nodes count as components).
std::size_t component_count(const Graph& g);

/// Parameter transmissions: each undirected edge carries one model in each
/// direction per round.
double communication_cost(const Graph& g, std::size_t model_params, std::size_t rounds);

/// Re-pairs the pooled endpoints of lost adjacency slots. Pool entries are
/// shuffled with `rng`, then paired greedily skipping self-loops and pairs for
/// which `adjacent` already holds (including pairs added earlier in this
/// call). Unpairable leftovers are dropped.
std::vector<Edge> pair_pool(std::vector<std::size_t> pool,
                            const std::function<bool(std::size_t, std::size_t)>& adjacent, Rng& rng);

// Serialization: "n <count>" header, then one "i j" line per edge.
void write_edge_list(std::ostream& os, const Graph& g);
Graph read_edge_list(std::istream& is);
std::string to_json(const Graph& g);
Graph graph_from_json(const std::string& text);

}  // namespace dflmesh
