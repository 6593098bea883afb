#include "dflmesh/graph.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dflmesh/error.hpp"
#include "dflmesh/rng.hpp"

namespace dflmesh {

namespace {

Edge normalized(std::size_t i, std::size_t j) { return i < j ? Edge{i, j} : Edge{j, i}; }

}  // namespace

Graph::Graph(std::size_t n, std::vector<Edge> edges) : n_(n), adj_(n) {
  for (auto& e : edges) {
    if (e.first >= n || e.second >= n) {
      throw Error(ErrorKind::InvalidArgument,
                  "edge (" + std::to_string(e.first) + "," + std::to_string(e.second) + ") out of range for n=" +
                      std::to_string(n));
    }
    if (e.first == e.second) {
      throw Error(ErrorKind::InvalidArgument, "self-loop at node " + std::to_string(e.first));
    }
    e = normalized(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
    throw Error(ErrorKind::InvalidArgument,
                "duplicate edge (" + std::to_string(dup->first) + "," + std::to_string(dup->second) + ")");
  }
  edges_ = std::move(edges);
  for (const auto& [i, j] : edges_) {
    adj_[i].push_back(j);
    adj_[j].push_back(i);
  }
  for (auto& a : adj_) std::sort(a.begin(), a.end());
}

std::size_t Graph::max_degree() const {
  std::size_t d = 0;
  for (const auto& a : adj_) d = std::max(d, a.size());
  return d;
}

std::size_t Graph::min_degree() const {
  if (adj_.empty()) return 0;
  std::size_t d = adj_.front().size();
  for (const auto& a : adj_) d = std::min(d, a.size());
  return d;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) return false;
  return std::binary_search(adj_[i].begin(), adj_[i].end(), j);
}

Eigen::MatrixXd Graph::adjacency() const {
  const auto n = static_cast<Eigen::Index>(n_);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : edges_) {
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return a;
}

Eigen::MatrixXd Graph::laplacian() const {
  Eigen::MatrixXd l = -adjacency();
  for (std::size_t i = 0; i < n_; ++i) {
    l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = static_cast<double>(adj_[i].size());
  }
  return l;
}

Graph Graph::induced(const std::vector<bool>& keep) const {
  if (keep.size() != n_) throw Error(ErrorKind::DimensionMismatch, "mask size differs from node count");
  std::vector<std::size_t> relabel(n_, n_);
  std::size_t m = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    if (keep[i]) relabel[i] = m++;
  }
  std::vector<Edge> edges;
  for (const auto& [i, j] : edges_) {
    if (keep[i] && keep[j]) edges.emplace_back(relabel[i], relabel[j]);
  }
  return Graph(m, std::move(edges));
}

Graph make_ring(std::size_t n) {
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "ring needs n >= 3, got " + std::to_string(n));
  std::vector<Edge> edges;
  edges.reserve(n);
  for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return Graph(n, std::move(edges));
}

Graph make_complete(std::size_t n) {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "complete graph needs n >= 2, got " + std::to_string(n));
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  }
  return Graph(n, std::move(edges));
}

Graph make_erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidArgument, "edge probability must lie in (0,1)");
  Rng rng(seed);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  return Graph(n, std::move(edges));
}

std::vector<Edge> pair_pool(std::vector<std::size_t> pool,
                            const std::function<bool(std::size_t, std::size_t)>& adjacent, Rng& rng) {
  rng.shuffle(std::span<std::size_t>(pool));
  std::vector<bool> used(pool.size(), false);
  std::set<Edge> added;
  std::vector<Edge> out;
  for (std::size_t a = 0; a < pool.size(); ++a) {
    if (used[a]) continue;
    for (std::size_t b = a + 1; b < pool.size(); ++b) {
      if (used[b]) continue;
      const std::size_t u = pool[a];
      const std::size_t v = pool[b];
      if (u == v) continue;
      const Edge e = normalized(u, v);
      if (added.contains(e) || adjacent(u, v)) continue;
      used[a] = used[b] = true;
      added.insert(e);
      out.push_back(e);
      break;
    }
  }
  return out;
}

Graph sample_virtual_ring_graph(std::size_t n, std::size_t rings, std::uint64_t seed) {
  Rng rng(seed);
  std::map<Edge, int> multiplicity;
  std::vector<std::size_t> order(n);
  std::vector<double> x(n);
  for (std::size_t ring = 0; ring < rings; ++ring) {
    for (auto& xi : x) xi = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return x[a] != x[b] ? x[a] < x[b] : a < b; });
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t u = order[k];
      const std::size_t v = order[(k + 1) % n];
      if (u != v) ++multiplicity[normalized(u, v)];
    }
  }
  std::set<Edge> edges;
  std::vector<std::size_t> pool;
  for (const auto& [e, count] : multiplicity) {
    edges.insert(e);
    for (int extra = 1; extra < count; ++extra) {
      pool.push_back(e.first);
      pool.push_back(e.second);
    }
  }
  const auto rewired =
      pair_pool(std::move(pool), [&](std::size_t u, std::size_t v) { return edges.contains(normalized(u, v)); }, rng);
  edges.insert(rewired.begin(), rewired.end());
  return Graph(n, std::vector<Edge>(edges.begin(), edges.end()));
}

Graph sample_connected(const std::function<Graph(std::uint64_t)>& generate, std::uint64_t seed, int budget) {
  for (int attempt = 0; attempt < budget; ++attempt) {
    Graph g = generate(child_seed(seed, attempt));
    if (is_connected(g)) return g;
  }
  throw Error(ErrorKind::Disconnected, "no connected sample within " + std::to_string(budget) + " attempts");
}

Graph make_regular_expander(std::size_t n, std::size_t d, std::uint64_t seed, int budget) {
  if (d < 2 || d % 2 != 0) throw Error(ErrorKind::InvalidArgument, "expander degree must be even and >= 2");
  if (d >= n) throw Error(ErrorKind::InvalidArgument, "expander degree must be smaller than n");
  return sample_connected([&](std::uint64_t s) { return sample_virtual_ring_graph(n, d / 2, s); }, seed, budget);
}

Graph make_cubic_expander(std::size_t n, std::uint64_t seed, int budget) {
  if (n < 6 || n % 2 != 0) throw Error(ErrorKind::InvalidArgument, "cubic expander needs even n >= 6");
  const Graph ring = make_ring(n);
  for (int attempt = 0; attempt < budget; ++attempt) {
    Rng rng(child_seed(seed, attempt));
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    auto chords = pair_pool(std::move(pool), [&](std::size_t u, std::size_t v) { return ring.has_edge(u, v); }, rng);
    if (chords.size() * 2 != n) continue;
    std::vector<Edge> edges = ring.edges();
    edges.insert(edges.end(), chords.begin(), chords.end());
    return Graph(n, std::move(edges));
  }
  throw Error(ErrorKind::InvalidArgument, "no perfect chord matching within " + std::to_string(budget) + " attempts");
}

std::size_t component_count(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<bool> seen(n, false);
  std::size_t components = 0;
  std::queue<std::size_t> frontier;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++components;
    seen[s] = true;
    frontier.push(s);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t v : g.neighbors(u)) {
        if (!seen[v]) {
          seen[v] = true;
          frontier.push(v);
        }
      }
    }
  }
  return components;
}

bool is_connected(const Graph& g) { return g.node_count() <= 1 || component_count(g) == 1; }

double communication_cost(const Graph& g, std::size_t model_params, std::size_t rounds) {
  return 2.0 * static_cast<double>(g.edge_count()) * static_cast<double>(model_params) * static_cast<double>(rounds);
}

void write_edge_list(std::ostream& os, const Graph& g) {
  os << "n " << g.node_count() << '\n';
  for (const auto& [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

Graph read_edge_list(std::istream& is) {
  std::string tag;
  std::size_t n = 0;
  if (!(is >> tag >> n) || tag != "n") throw Error(ErrorKind::InvalidArgument, "edge list must start with 'n <count>'");
  std::vector<Edge> edges;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t i = 0;
    std::size_t j = 0;
    if (!(ls >> i >> j)) throw Error(ErrorKind::InvalidArgument, "malformed edge line: " + line);
    edges.emplace_back(i, j);
  }
  return Graph(n, std::move(edges));
}

std::string to_json(const Graph& g) {
  nlohmann::json j;
  j["n"] = g.node_count();
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) j["edges"].push_back({a, b});
  return j.dump();
}

Graph graph_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    return Graph(j.at("n").get<std::size_t>(), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("graph json: ") + e.what());
  }
}

}  // namespace dflmesh
