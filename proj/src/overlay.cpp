#include "dflmesh/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dflmesh/error.hpp"
#include "dflmesh/rng.hpp"

namespace dflmesh {

namespace {

Edge normalized(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

constexpr NodeId kProbeId = std::numeric_limits<NodeId>::max();

}  // namespace

std::string to_string(OverlayEventKind kind) {
  switch (kind) {
    case OverlayEventKind::Join: return "join";
    case OverlayEventKind::Fail: return "fail";
    case OverlayEventKind::Recover: return "recover";
    case OverlayEventKind::Lookup: return "lookup";
    case OverlayEventKind::Rewire: return "rewire";
    case OverlayEventKind::Check: return "check";
  }
  return "unknown";
}

OverlayNetwork::OverlayNetwork(std::size_t rings, std::uint64_t seed) : rings_(rings), seed_(seed) {
  if (rings == 0) throw Error(ErrorKind::InvalidArgument, "overlay needs at least one ring");
}

const OverlayNode& OverlayNetwork::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::UnknownId, "unknown node " + std::to_string(id));
  return it->second;
}

bool OverlayNetwork::key_less(std::size_t, NodeId a, double xa, NodeId b, double xb) const {
  return xa != xb ? xa < xb : a < b;
}

std::pair<NodeId, std::size_t> OverlayNetwork::route(NodeId source, std::size_t ring, double target,
                                                     NodeId target_id) const {
  auto x = [&](NodeId id) { return nodes_.at(id).coords[ring]; };
  auto less_t = [&](NodeId a) { return key_less(ring, a, x(a), target_id, target); };  // a < T
  auto t_less = [&](NodeId b) { return key_less(ring, target_id, target, b, x(b)); };  // T < b
  // T strictly inside the clockwise arc (a, b).
  auto inside = [&](NodeId a, NodeId b) {
    if (a != b && key_less(ring, a, x(a), b, x(b))) return less_t(a) && t_less(b);
    return less_t(a) || t_less(b);
  };
  NodeId cur = source;
  std::size_t hops = 0;
  const std::size_t limit = nodes_.size() + 1;
  while (true) {
    const auto& nb = nodes_.at(cur).ring_neighbors[ring];
    if (inside(cur, nb.second)) return {cur, hops};
    if (inside(nb.first, cur)) return {nb.first, hops + 1};
    const double clockwise = std::fmod(target - x(cur) + 1.0, 1.0);
    cur = clockwise <= 0.5 ? nb.second : nb.first;
    if (++hops > limit) throw Error(ErrorKind::InvalidArgument, "greedy routing did not terminate");
  }
}

void OverlayNetwork::log(OverlayEventKind kind, NodeId node, std::optional<std::size_t> ring, std::size_t hops,
                         std::string detail) {
  log_.push_back(OverlayEvent{kind, node, ring, hops, std::move(detail)});
}

void OverlayNetwork::refresh_two_hop(std::size_t ring, const std::vector<NodeId>& around) {
  for (NodeId id : around) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) continue;
    const auto [p, s] = it->second.ring_neighbors[ring];
    it->second.two_hop[ring] = {nodes_.at(p).ring_neighbors[ring].first, nodes_.at(s).ring_neighbors[ring].second};
  }
}

void OverlayNetwork::join(NodeId id, std::vector<double> coords) {
  if (nodes_.contains(id)) throw Error(ErrorKind::DuplicateId, "node " + std::to_string(id) + " already joined");
  if (id == kProbeId) throw Error(ErrorKind::InvalidArgument, "reserved node id");
  if (coords.size() != rings_) throw Error(ErrorKind::InvalidArgument, "need one coordinate per ring");
  for (double c : coords) {
    if (!(c >= 0.0 && c < 1.0)) throw Error(ErrorKind::InvalidArgument, "coordinates must lie in [0,1)");
  }
  ++events_;
  const bool first = nodes_.empty();
  const NodeId entry = first ? id : nodes_.begin()->first;
  OverlayNode fresh{id, std::move(coords), std::vector<RingPair>(rings_, {id, id}),
                    std::vector<RingPair>(rings_, {id, id})};
  if (first) {
    nodes_.emplace(id, std::move(fresh));
    log(OverlayEventKind::Join, id, std::nullopt, 0);
    return;
  }
  std::vector<std::pair<NodeId, std::size_t>> found(rings_);
  for (std::size_t r = 0; r < rings_; ++r) found[r] = route(entry, r, fresh.coords[r], id);
  nodes_.emplace(id, std::move(fresh));
  std::size_t total_hops = 0;
  for (std::size_t r = 0; r < rings_; ++r) {
    const NodeId p = found[r].first;
    const NodeId s = nodes_.at(p).ring_neighbors[r].second;
    nodes_.at(id).ring_neighbors[r] = {p, s};
    nodes_.at(p).ring_neighbors[r].second = id;
    nodes_.at(s).ring_neighbors[r].first = id;
    log(OverlayEventKind::Lookup, id, r, found[r].second);
    total_hops += found[r].second;
    refresh_two_hop(r, {id, p, nodes_.at(p).ring_neighbors[r].first, s, nodes_.at(s).ring_neighbors[r].second});
  }
  log(OverlayEventKind::Join, id, std::nullopt, total_hops);
  rewire_duplicates();
}

void OverlayNetwork::join(NodeId id) {
  Rng rng(child_seed(seed_, 0x6A01, id));
  std::vector<double> coords(rings_);
  for (auto& c : coords) c = rng.uniform();
  join(id, std::move(coords));
}

void OverlayNetwork::fail_node(NodeId id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorKind::UnknownId, "unknown node " + std::to_string(id));
  ++events_;
  const OverlayNode gone = std::move(it->second);
  nodes_.erase(it);
  log(OverlayEventKind::Fail, id, std::nullopt, 0);
  if (nodes_.empty()) {
    extra_.clear();
    return;
  }
  for (std::size_t r = 0; r < rings_; ++r) {
    const auto [p, s] = gone.ring_neighbors[r];
    // Both survivors relink from their own stored two-hop entries.
    const NodeId p_next = nodes_.at(p).two_hop[r].second;
    const NodeId s_prev = nodes_.at(s).two_hop[r].first;
    nodes_.at(p).ring_neighbors[r].second = p_next;
    nodes_.at(s).ring_neighbors[r].first = s_prev;
    log(OverlayEventKind::Recover, id, r, 0, "two-hop");
    refresh_two_hop(r, {p, nodes_.at(p).ring_neighbors[r].first, s, nodes_.at(s).ring_neighbors[r].second});
  }
  rewire_duplicates();
}

void OverlayNetwork::fail_nodes(const std::vector<NodeId>& ids) {
  if (ids.size() == 1) {
    fail_node(ids.front());
    return;
  }
  std::set<NodeId> dead;
  for (NodeId id : ids) {
    if (!nodes_.contains(id)) throw Error(ErrorKind::UnknownId, "unknown node " + std::to_string(id));
    if (!dead.insert(id).second) throw Error(ErrorKind::DuplicateId, "node listed twice: " + std::to_string(id));
  }
  if (dead.empty()) return;
  ++events_;
  for (NodeId id : dead) {
    nodes_.erase(id);
    log(OverlayEventKind::Fail, id, std::nullopt, 0);
  }
  if (nodes_.empty()) {
    extra_.clear();
    return;
  }
  for (std::size_t r = 0; r < rings_; ++r) {
    std::vector<NodeId> stranded;
    for (const auto& [id, n] : nodes_) {
      if (dead.contains(n.ring_neighbors[r].second)) stranded.push_back(id);
    }
    if (stranded.empty()) continue;
    const auto order = ring_order(*this, r);
    std::map<NodeId, std::size_t> rank;
    for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
    for (NodeId p : stranded) {
      NodeId next = nodes_.at(p).two_hop[r].second;
      if (!dead.contains(next)) {
        log(OverlayEventKind::Recover, p, r, 0, "two-hop");
      } else {
        // The membership directory stands in for a fresh coordinate lookup.
        next = order[(rank.at(p) + 1) % order.size()];
        log(OverlayEventKind::Recover, p, r, 0, "unrecoverable with two-hop state; repaired by fresh lookup");
      }
      nodes_.at(p).ring_neighbors[r].second = next;
      nodes_.at(next).ring_neighbors[r].first = p;
    }
    refresh_two_hop(r, live_ids());
  }
  rewire_duplicates();
}

void OverlayNetwork::rewire_duplicates() {
  std::map<Edge, int> multiplicity;
  for (const auto& [id, n] : nodes_) {
    for (std::size_t r = 0; r < rings_; ++r) {
      const NodeId s = n.ring_neighbors[r].second;
      if (s != id) ++multiplicity[normalized(id, s)];
    }
  }
  std::set<Edge> base;
  std::map<NodeId, int> slots;
  for (const auto& [e, m] : multiplicity) {
    base.insert(e);
    slots[e.first] += m - 1;
    slots[e.second] += m - 1;
  }
  std::set<Edge> kept;
  for (const auto& e : extra_) {
    auto a = slots.find(e.first);
    auto b = slots.find(e.second);
    if (a == slots.end() || b == slots.end() || a->second == 0 || b->second == 0 || base.contains(e)) continue;
    --a->second;
    --b->second;
    kept.insert(e);
  }
  std::vector<std::size_t> pool;
  for (const auto& [id, count] : slots) pool.insert(pool.end(), static_cast<std::size_t>(count), id);
  Rng rng(child_seed(seed_, 0x7E, events_));
  const auto added = pair_pool(
      std::move(pool),
      [&](std::size_t u, std::size_t v) {
        const Edge e = normalized(u, v);
        return base.contains(e) || kept.contains(e);
      },
      rng);
  const std::size_t dropped = extra_.size() - kept.size();
  kept.insert(added.begin(), added.end());
  extra_.assign(kept.begin(), kept.end());
  if (!added.empty() || dropped > 0) {
    log(OverlayEventKind::Rewire, 0, std::nullopt, 0,
        "+" + std::to_string(added.size()) + " -" + std::to_string(dropped) + " links");
  }
}

std::vector<NodeId> OverlayNetwork::live_ids() const {
  std::vector<NodeId> ids;
  ids.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) ids.push_back(id);
  return ids;
}

Graph OverlayNetwork::equivalent_graph() const {
  const auto ids = live_ids();
  std::map<NodeId, std::size_t> index;
  for (std::size_t k = 0; k < ids.size(); ++k) index[ids[k]] = k;
  std::set<Edge> edges;
  for (const auto& [id, n] : nodes_) {
    for (std::size_t r = 0; r < rings_; ++r) {
      const NodeId s = n.ring_neighbors[r].second;
      if (s != id) edges.insert(normalized(index.at(id), index.at(s)));
    }
  }
  for (const auto& [u, v] : extra_) edges.insert(normalized(index.at(u), index.at(v)));
  return Graph(ids.size(), std::vector<Edge>(edges.begin(), edges.end()));
}

std::vector<NodeId> ring_order(const OverlayNetwork& net, std::size_t ring) {
  auto ids = net.live_ids();
  std::sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) {
    const double xa = net.node(a).coords[ring];
    const double xb = net.node(b).coords[ring];
    return xa != xb ? xa < xb : a < b;
  });
  return ids;
}

OverlayCheck OverlayNetwork::check() const {
  OverlayCheck out;
  for (std::size_t r = 0; r < rings_; ++r) {
    const auto order = ring_order(*this, r);
    const std::size_t n = order.size();
    for (std::size_t k = 0; k < n; ++k) {
      const auto& nb = nodes_.at(order[k]).ring_neighbors[r];
      const NodeId want_p = order[(k + n - 1) % n];
      const NodeId want_s = order[(k + 1) % n];
      if (nb.first != want_p || nb.second != want_s) {
        out.rings_ok = false;
        out.problems.push_back("ring " + std::to_string(r) + ": node " + std::to_string(order[k]) +
                               " has wrong neighbours");
      }
      const auto& th = nodes_.at(order[k]).two_hop[r];
      if (th.first != order[(k + 2 * n - 2) % n] || th.second != order[(k + 2) % n]) {
        out.two_hop_ok = false;
        out.problems.push_back("ring " + std::to_string(r) + ": node " + std::to_string(order[k]) +
                               " has a stale two-hop entry");
      }
    }
  }
  return out;
}

OverlayCheck OverlayNetwork::logged_check() {
  auto result = check();
  log(OverlayEventKind::Check, 0, std::nullopt, 0,
      result.ok() ? "ok" : std::to_string(result.problems.size()) + " problems");
  return result;
}

HopStats lookup_cost(const OverlayNetwork& net, std::size_t samples, std::uint64_t seed) {
  if (net.size() < 2) throw Error(ErrorKind::InvalidArgument, "lookup cost needs at least two live nodes");
  const auto ids = net.live_ids();
  Rng rng(seed);
  HopStats stats;
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const NodeId source = ids[static_cast<std::size_t>(rng.below(ids.size()))];
    const auto ring = static_cast<std::size_t>(rng.below(net.rings()));
    const auto hops = net.route(source, ring, rng.uniform(), kProbeId).second;
    total += static_cast<double>(hops);
    stats.max = std::max(stats.max, hops);
  }
  stats.samples = samples;
  stats.mean = samples ? total / static_cast<double>(samples) : 0.0;
  return stats;
}

std::vector<ChurnCommand> parse_churn_script(std::istream& in) {
  std::vector<ChurnCommand> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    ChurnCommand cmd;
    auto where = [&] { return "churn script line " + std::to_string(lineno) + ": "; };
    if (word == "join") {
      cmd.kind = ChurnCommand::Kind::Join;
    } else if (word == "fail") {
      cmd.kind = ChurnCommand::Kind::Fail;
    } else if (word == "check") {
      cmd.kind = ChurnCommand::Kind::Check;
    } else {
      throw Error(ErrorKind::Config, where() + "unknown command '" + word + "'");
    }
    std::string tok;
    while (ls >> tok) {
      std::size_t pos = 0;
      unsigned long long v = 0;
      try {
        v = std::stoull(tok, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != tok.size() || tok.front() == '-') throw Error(ErrorKind::Config, where() + "bad node id '" + tok + "'");
      cmd.ids.push_back(static_cast<NodeId>(v));
    }
    if (cmd.kind == ChurnCommand::Kind::Check && !cmd.ids.empty()) {
      throw Error(ErrorKind::Config, where() + "check takes no arguments");
    }
    if (cmd.kind == ChurnCommand::Kind::Join && cmd.ids.size() != 1) {
      throw Error(ErrorKind::Config, where() + "join takes exactly one id");
    }
    if (cmd.kind == ChurnCommand::Kind::Fail && cmd.ids.empty()) {
      throw Error(ErrorKind::Config, where() + "fail needs at least one id");
    }
    out.push_back(std::move(cmd));
  }
  return out;
}

ChurnOutcome apply_churn(OverlayNetwork& net, const std::vector<ChurnCommand>& script) {
  ChurnOutcome outcome;
  for (const auto& cmd : script) {
    switch (cmd.kind) {
      case ChurnCommand::Kind::Join: net.join(cmd.ids.front()); break;
      case ChurnCommand::Kind::Fail: net.fail_nodes(cmd.ids); break;
      case ChurnCommand::Kind::Check:
        ++outcome.checks;
        if (!net.logged_check().ok()) ++outcome.failed_checks;
        break;
    }
  }
  return outcome;
}

std::string event_log_json(const OverlayNetwork& net) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : net.event_log()) {
    nlohmann::json j{{"event", to_string(e.kind)}, {"node", e.node}, {"hops", e.hops}};
    if (e.ring) j["ring"] = *e.ring;
    if (!e.detail.empty()) j["detail"] = e.detail;
    events.push_back(std::move(j));
  }
  return events.dump(2);
}

}  // namespace dflmesh
