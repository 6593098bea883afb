#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "dflmesh/error.hpp"
#include "dflmesh/graph.hpp"
#include "dflmesh/rng.hpp"

using namespace dflmesh;

TEST_SUITE("graph") {
  TEST_CASE("constructor rejects self-loops, duplicates and out-of-range endpoints") {
    CHECK_THROWS_AS(Graph(3, {{0, 0}}), Error);
    CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), Error);
    CHECK_THROWS_AS(Graph(3, {{0, 3}}), Error);
    const Graph g(3, {{2, 1}, {0, 1}});
    CHECK(g.edges() == std::vector<Edge>{{0, 1}, {1, 2}});
    CHECK(g.degree(1) == 2);
  }

  TEST_CASE("ring") {
    CHECK_THROWS_AS(make_ring(2), Error);
    const Graph tri = make_ring(3);
    CHECK(tri.edges() == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
    for (std::size_t n : {4u, 7u, 100u}) {
      const Graph g = make_ring(n);
      CHECK(g.edge_count() == n);
      CHECK(g.min_degree() == 2);
      CHECK(g.max_degree() == 2);
      CHECK(is_connected(g));
    }
  }

  TEST_CASE("complete") {
    CHECK_THROWS_AS(make_complete(1), Error);
    CHECK(make_complete(2).edge_count() == 1);
    const Graph g = make_complete(10);
    CHECK(g.edge_count() == 45);
    CHECK(g.min_degree() == 9);
  }

  TEST_CASE("erdos-renyi is seeded and has the expected mean degree") {
    CHECK(make_erdos_renyi(30, 0.2, 5) == make_erdos_renyi(30, 0.2, 5));
    CHECK_THROWS_AS(make_erdos_renyi(10, 0.0, 1), Error);
    CHECK_THROWS_AS(make_erdos_renyi(10, 1.0, 1), Error);
    const std::size_t n = 100;
    const double p = std::log(100.0) / 100.0;
    double total = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) total += 2.0 * make_erdos_renyi(n, p, s).edge_count() / n;
    CHECK(std::abs(total / 50 - (n - 1) * p) < 1.0);
    int complete = 0;
    for (std::uint64_t s = 0; s < 20; ++s) complete += make_erdos_renyi(5, 0.9999, s).edge_count() == 10;
    CHECK(complete >= 19);
  }

  TEST_CASE("virtual-ring expander") {
    CHECK_THROWS_AS(make_regular_expander(10, 3, 1), Error);
    CHECK_THROWS_AS(make_regular_expander(10, 10, 1), Error);
    CHECK_THROWS_AS(make_regular_expander(10, 0, 1), Error);
    const Graph cyc = make_regular_expander(20, 2, 4);
    CHECK(cyc.edge_count() == 20);
    CHECK(cyc.min_degree() == 2);
    CHECK(cyc.max_degree() == 2);
    CHECK(is_connected(cyc));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Graph g = make_regular_expander(100, 4, seed);
      CHECK(g.max_degree() <= 4);
      CHECK(is_connected(g));
      CHECK(g == make_regular_expander(100, 4, seed));
    }
  }

  TEST_CASE("cubic expander is 3-regular and connected") {
    CHECK_THROWS_AS(make_cubic_expander(7, 1), Error);
    CHECK_THROWS_AS(make_cubic_expander(4, 1), Error);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Graph g = make_cubic_expander(10, seed);
      CHECK(g.edge_count() == 15);
      CHECK(g.min_degree() == 3);
      CHECK(g.max_degree() == 3);
      CHECK(is_connected(g));
    }
  }

  TEST_CASE("pair_pool never creates self-loops or parallel edges") {
    Rng rng(3);
    std::set<Edge> existing{{0, 1}};
    auto adjacent = [&](std::size_t u, std::size_t v) { return existing.contains(u < v ? Edge{u, v} : Edge{v, u}); };
    const auto out = pair_pool({0, 0, 1, 1, 2, 2, 3}, adjacent, rng);
    std::set<Edge> seen;
    for (const auto& e : out) {
      CHECK(e.first != e.second);
      CHECK_FALSE(existing.contains(e));
      CHECK(seen.insert(e).second);
    }
  }

  TEST_CASE("connectivity") {
    CHECK(is_connected(make_ring(5)));
    CHECK(is_connected(make_complete(10)));
    const Graph two(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
    CHECK_FALSE(is_connected(two));
    CHECK(component_count(two) == 2);
    CHECK_THROWS_AS(sample_connected([&](std::uint64_t) { return two; }, 1, 3), Error);
  }

  TEST_CASE("induced subgraph relabels densely") {
    const Graph g = make_ring(5);
    const Graph h = g.induced({true, true, false, true, true});
    CHECK(h.node_count() == 4);
    CHECK(h.edges() == std::vector<Edge>{{0, 1}, {0, 3}, {2, 3}});
    CHECK(h.edge_count() == 3);
    CHECK(is_connected(h));
  }

  TEST_CASE("laplacian rows sum to zero with degrees on the diagonal") {
    const Graph g = make_regular_expander(30, 4, 2);
    const auto L = g.laplacian();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      CHECK(std::abs(L.row(i).sum()) < 1e-12);
      CHECK(L(i, i) == doctest::Approx(static_cast<double>(g.degree(static_cast<std::size_t>(i)))));
    }
    CHECK((L - L.transpose()).norm() == 0.0);
  }

  TEST_CASE("communication cost") {
    CHECK(communication_cost(make_ring(10), 7, 0) == 0.0);
    CHECK(communication_cost(make_ring(10), 7, 3) == 20.0 * 7 * 3);
    CHECK(communication_cost(make_complete(10), 5, 4) / communication_cost(make_cubic_expander(10, 1), 5, 4) == 3.0);
    const Graph g = make_regular_expander(20, 4, 1);
    CHECK(communication_cost(g, 6, 5) == 2.0 * communication_cost(g, 3, 5));
    CHECK(communication_cost(g, 6, 10) == 2.0 * communication_cost(g, 6, 5));
  }

  TEST_CASE("serialization round trips") {
    const Graph g = make_regular_expander(16, 4, 9);
    std::stringstream ss;
    write_edge_list(ss, g);
    CHECK(ss.str().rfind("n 16\n", 0) == 0);
    CHECK(read_edge_list(ss) == g);
    CHECK(graph_from_json(to_json(g)) == g);
    CHECK(to_json(Graph(2, {{0, 1}})) == R"({"edges":[[0,1]],"n":2})");
    std::stringstream bad("n 3\n0 5\n");
    CHECK_THROWS_AS(read_edge_list(bad), Error);
  }
}
