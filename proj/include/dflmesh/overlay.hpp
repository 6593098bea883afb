#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dflmesh/graph.hpp"

namespace dflmesh {

using NodeId = std::size_t;

/// Per-ring (predecessor, successor) pair, or two-hop (pred of pred, succ of succ).
using RingPair = std::pair<NodeId, NodeId>;

struct OverlayNode {
  NodeId id = 0;
  std::vector<double> coords;           ///< one coordinate in [0,1) per ring
  std::vector<RingPair> ring_neighbors;  ///< per ring: (pred, succ)
  std::vector<RingPair> two_hop;         ///< per ring: (pred of pred, succ of succ)
};

enum class OverlayEventKind { Join, Fail, Recover, Lookup, Rewire, Check };

struct OverlayEvent {
  OverlayEventKind kind = OverlayEventKind::Join;
  NodeId node = 0;
  std::optional<std::size_t> ring;
  std::size_t hops = 0;
  std::string detail;
};

std::string to_string(OverlayEventKind kind);

struct HopStats {
  double mean = 0.0;
  std::size_t max = 0;
  std::size_t samples = 0;
};

struct OverlayCheck {
  bool rings_ok = true;
  bool two_hop_ok = true;
  std::vector<std::string> problems;
  bool ok() const { return rings_ok && two_hop_ok; }
};

/// Simulated overlay of L virtual rings. Events are processed synchronously;
/// the outcome is a pure function of (event sequence, seed).
class OverlayNetwork {
 public:
  OverlayNetwork(std::size_t rings, std::uint64_t seed);

  std::size_t rings() const { return rings_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const { return nodes_.contains(id); }
  const OverlayNode& node(NodeId id) const;
  const std::map<NodeId, OverlayNode>& nodes() const { return nodes_; }
  const std::vector<OverlayEvent>& event_log() const { return log_; }
  /// Links added by duplicate-adjacency rewiring, as (smaller id, larger id).
  const std::vector<Edge>& extra_links() const { return extra_; }

  /// Splices a node into every ring after a greedy lookup from the smallest
  /// live id. Throws DuplicateId, InvalidArgument on bad coordinates.
  void join(NodeId id, std::vector<double> coords);
  /// Join with coordinates drawn from the network's seeded stream for `id`.
  void join(NodeId id);
  /// Single failure repaired from the neighbours' two-hop entries, followed
  /// by one gossip round that refreshes the affected two-hop tables.
  void fail_node(NodeId id);
  /// Nodes failing before any repair. A live node whose two-hop successor is
  /// also dead cannot repair locally; that case is flagged in the log and
  /// repaired by a fresh lookup.
  void fail_nodes(const std::vector<NodeId>& ids);
  /// Recomputes the extra links from the pool of duplicated ring adjacencies.
  void rewire_duplicates();

  /// Live ids in increasing order; the index of an id in this list is its
  /// vertex in equivalent_graph().
  std::vector<NodeId> live_ids() const;
  /// Union of all ring adjacencies plus the rewired extra links.
  Graph equivalent_graph() const;

  /// Hops of a greedy lookup for `target` on `ring` starting at `source`,
  /// moving toward the nearer side of the circle. Returns (predecessor, hops).
  std::pair<NodeId, std::size_t> route(NodeId source, std::size_t ring, double target, NodeId target_id) const;

  OverlayCheck check() const;
  /// Runs check() and records the outcome in the event log.
  OverlayCheck logged_check();

 private:
  void refresh_two_hop(std::size_t ring, const std::vector<NodeId>& around);
  void log(OverlayEventKind kind, NodeId node, std::optional<std::size_t> ring, std::size_t hops,
           std::string detail = {});
  bool key_less(std::size_t ring, NodeId a, double xa, NodeId b, double xb) const;

  std::size_t rings_;
  std::uint64_t seed_;
  std::size_t events_ = 0;
  std::map<NodeId, OverlayNode> nodes_;
  std::vector<Edge> extra_;
  std::vector<OverlayEvent> log_;
};

/// Greedy lookup cost over `samples` random (live source, uniform target) pairs.
HopStats lookup_cost(const OverlayNetwork& net, std::size_t samples, std::uint64_t seed);

/// Ground-truth ring order: live ids sorted by (coordinate, id) on `ring`.
std::vector<NodeId> ring_order(const OverlayNetwork& net, std::size_t ring);

struct ChurnCommand {
  enum class Kind { Join, Fail, Check } kind = Kind::Check;
  std::vector<NodeId> ids;
};

/// Line format: `join <id>`, `fail <id> [<id> ...]` (several ids fail
/// simultaneously), `check`. Blank lines and `#` comments are ignored.
/// Throws Config with the line number on malformed input.
std::vector<ChurnCommand> parse_churn_script(std::istream& in);

struct ChurnOutcome {
  std::size_t checks = 0;
  std::size_t failed_checks = 0;
};

ChurnOutcome apply_churn(OverlayNetwork& net, const std::vector<ChurnCommand>& script);

std::string event_log_json(const OverlayNetwork& net);

}  // namespace dflmesh
