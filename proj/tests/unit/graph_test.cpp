#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "xmrmap/error.hpp"
#include "xmrmap/graph.hpp"

using namespace xmrmap;

namespace {

PeerAddress node(std::uint32_t i) { return PeerAddress::from_ipv4(0x0A000000u + i, 18080); }

using IdEdges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

Graph make(const IdEdges& ids, Graph::BuildStats* stats = nullptr) {
  std::vector<std::pair<PeerAddress, PeerAddress>> e;
  for (auto [a, b] : ids) e.emplace_back(node(a), node(b));
  return Graph::from_edges(e, stats);
}

// Node ids follow address order, and node(i) is increasing in i, so ids
// equal i when every i in [0, n) appears.
oracle::AdjList adjacency(std::uint32_t n, const IdEdges& ids) {
  oracle::AdjList adj(n);
  for (auto [a, b] : ids) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  return adj;
}

}  // namespace

TEST(BuildGraph, UndirectedDedupAndSelfLoops) {
  Graph::BuildStats st;
  auto g = make({{0, 1}, {1, 0}, {2, 2}, {1, 2}}, &st);
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.edge_count(), 2u);
  EXPECT_EQ(st.self_loops, 1u);
  EXPECT_EQ(st.duplicate_edges, 1u);
  auto tri = make({{0, 1}, {1, 2}, {2, 0}});
  EXPECT_EQ(tri.node_count(), 3u);
  EXPECT_EQ(tri.edge_count(), 3u);
}

TEST(BuildGraph, FromInferredEdges) {
  InferredEdgeList l;
  l.edges = {{node(0), node(1), 5}, {node(1), node(0), 7}};
  EXPECT_EQ(build_graph(l).edge_count(), 1u);
}

TEST(Lcc, PicksLargestThenSmallestId) {
  auto g = make({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {10, 11}, {11, 12}});
  auto l = lcc(g);
  EXPECT_EQ(l.node_count(), 5u);
  EXPECT_EQ(l.address(0), node(0));
  auto tie = make({{5, 6}, {1, 2}});
  EXPECT_EQ(lcc(tie).address(0), node(1));
  auto conn = make({{0, 1}, {1, 2}});
  EXPECT_EQ(lcc(conn).node_count(), 3u);
  EXPECT_EQ(lcc(Graph{}).node_count(), 0u);
}

TEST(Centrality, HandExamples) {
  auto path = betweenness(make({{0, 1}, {1, 2}}));
  EXPECT_EQ(path, (std::vector<double>{0, 1, 0}));
  auto star = betweenness(make({{0, 1}, {0, 2}, {0, 3}, {0, 4}}));
  EXPECT_DOUBLE_EQ(star[0], 6.0);
  for (int i = 1; i < 5; ++i) EXPECT_DOUBLE_EQ(star[i], 0.0);
  for (double b : betweenness(make({{0, 1}, {1, 2}, {0, 2}}))) EXPECT_EQ(b, 0.0);
  // disconnected pairs contribute nothing
  EXPECT_EQ(betweenness(make({{0, 1}, {1, 2}, {5, 6}}))[1], 1.0);
}

TEST(Centrality, DegreeSumsToTwiceEdges) {
  std::mt19937_64 rng(4);
  auto e = oracle::random_connected_graph(rng, 20, 0.3);
  auto g = make(e);
  auto d = degree_centrality(g);
  EXPECT_EQ(std::accumulate(d.begin(), d.end(), 0u), 2 * g.edge_count());
}

TEST(CentralityProperty, BrandesMatchesPathEnumeration) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 60; ++round) {
    const auto n = std::uniform_int_distribution<std::uint32_t>(2, 20)(rng);
    const double p = std::uniform_real_distribution<double>(0.1, 0.5)(rng);
    auto e = oracle::random_connected_graph(rng, n, p);
    auto got = betweenness(make(e));
    auto want = oracle::path_enumeration_betweenness(adjacency(n, e));
    for (std::uint32_t i = 0; i < n; ++i) ASSERT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(CentralityProperty, TreeIdentityExact) {
  std::mt19937_64 rng(22);
  for (int round = 0; round < 50; ++round) {
    const auto n = std::uniform_int_distribution<std::uint32_t>(2, 40)(rng);
    auto e = oracle::random_tree(rng, n);
    auto b = betweenness(make(e));
    double sum = 0;
    for (double x : b) sum += x;
    ASSERT_EQ(sum, static_cast<double>(oracle::tree_interior_sum(adjacency(n, e))));
  }
}

TEST(CentralityProperty, CompleteGraphAllZero) {
  IdEdges e;
  for (std::uint32_t i = 0; i < 7; ++i) {
    for (std::uint32_t j = i + 1; j < 7; ++j) e.emplace_back(i, j);
  }
  for (double b : betweenness(make(e))) EXPECT_EQ(b, 0.0);
}

TEST(CentralityProperty, BitStableAcrossThreadCounts) {
  std::mt19937_64 rng(23);
  auto e = oracle::random_connected_graph(rng, 120, 0.05);
  auto g = make(e);
  auto one = betweenness(g, 1);
  for (unsigned t : {2u, 3u, 7u, 0u}) EXPECT_EQ(betweenness(g, t), one) << t;
}

TEST(TopK, Basics) {
  std::vector<double> s{3, 9, 9, 1};
  EXPECT_TRUE(top_k(s, 0).empty());
  EXPECT_EQ(top_k(s, 2), (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(top_k(s, 10), (std::vector<NodeId>{1, 2, 0, 3}));
  std::vector<std::uint32_t> d{1, 5, 3};
  EXPECT_EQ(top_k(d, 1), (std::vector<NodeId>{1}));
}

TEST(Coverage, Basics) {
  auto star = make({{0, 1}, {0, 2}, {0, 3}, {5, 6}});
  std::vector<NodeId> center{0};
  EXPECT_DOUBLE_EQ(one_hop_coverage(star, center), 4.0 / 6.0);
  auto s2 = make({{0, 1}, {0, 2}, {0, 3}});
  EXPECT_DOUBLE_EQ(one_hop_coverage(s2, center), 1.0);
  std::vector<NodeId> all{0, 1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(one_hop_coverage(star, all), 1.0);
}

TEST(CoverageProperty, MonotoneInNodeSet) {
  std::mt19937_64 rng(24);
  auto g = make(oracle::random_connected_graph(rng, 30, 0.1));
  std::vector<NodeId> set;
  double prev = 0;
  for (NodeId i = 0; i < 30; i += 3) {
    set.push_back(i);
    const double c = one_hop_coverage(g, set);
    EXPECT_GE(c, prev);
    prev = c;
  }
}

TEST(Overlap, Formula) {
  // x=0 has neighbors {2,3,4,5}, y=1 has {4,5,6,7,8,9}; shared 2 -> 2/4
  auto g = make({{0, 2}, {0, 3}, {0, 4}, {0, 5}, {1, 4}, {1, 5}, {1, 6}, {1, 7}, {1, 8}, {1, 9}});
  std::vector<NodeId> xy{0, 1};
  auto m = overlap_matrix(g, xy);
  EXPECT_DOUBLE_EQ(m.at(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(m.at(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(m.at(0, 0), 1.0);

  // endpoints are excluded: x-y adjacent with identical other neighbors
  auto same = make({{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}});
  EXPECT_DOUBLE_EQ(overlap_matrix(same, xy).at(0, 1), 1.0);
  auto disjoint = make({{0, 2}, {1, 3}});
  EXPECT_DOUBLE_EQ(overlap_matrix(disjoint, xy).at(0, 1), 0.0);
}

TEST(OverlapProperty, Symmetric) {
  std::mt19937_64 rng(25);
  auto g = make(oracle::random_connected_graph(rng, 40, 0.15));
  auto top = top_k(std::span<const std::uint32_t>(degree_centrality(g)), 14);
  auto m = overlap_matrix(g, top);
  ASSERT_EQ(m.nodes.size(), 14u);
  for (std::size_t i = 0; i < 14; ++i) {
    EXPECT_EQ(m.at(i, i), 1.0);
    for (std::size_t j = 0; j < 14; ++j) {
      EXPECT_EQ(m.at(i, j), m.at(j, i));
      EXPECT_GE(m.at(i, j), 0.0);
      EXPECT_LE(m.at(i, j), 1.0);
    }
  }
}

TEST(Attack, StarDegreeFirstBatchRemovesCenter) {
  auto g = make({{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  AttackOptions o;
  o.step_fraction = 0.2;
  auto c = attack(g, AttackStrategy::degree, o);
  ASSERT_GE(c.points.size(), 2u);
  EXPECT_DOUBLE_EQ(c.points[0].lcc_fraction, 1.0);
  EXPECT_DOUBLE_EQ(c.points[1].removed_fraction, 0.2);
  EXPECT_DOUBLE_EQ(c.points[1].lcc_fraction, 0.2);
  EXPECT_EQ(c.points.size(), 6u);
}

TEST(Attack, CurveShapeAndFullRemoval) {
  std::mt19937_64 rng(26);
  auto g = make(oracle::random_connected_graph(rng, 100, 0.05));
  for (auto s : {AttackStrategy::degree, AttackStrategy::betweenness, AttackStrategy::random}) {
    auto c = attack(g, s, {});
    EXPECT_EQ(c.points.size(), 101u);
    EXPECT_EQ(c.points.front().removed_fraction, 0.0);
    EXPECT_EQ(c.points.back().removed_fraction, 1.0);
    EXPECT_EQ(c.points.back().lcc_fraction, 0.0);
    ASSERT_TRUE(c.turning_point);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GT(c.points[i].removed_fraction, c.points[i - 1].removed_fraction);
      EXPECT_LE(c.points[i].lcc_fraction, c.points[i - 1].lcc_fraction);
    }
  }
  AttackOptions adaptive;
  adaptive.adaptive = true;
  EXPECT_EQ(attack(g, AttackStrategy::degree, adaptive).points.back().lcc_fraction, 0.0);
}

TEST(Attack, StepValidated) {
  auto g = make({{0, 1}});
  AttackOptions o;
  o.step_fraction = 0;
  EXPECT_THROW(attack(g, AttackStrategy::degree, o), InputError);
  o.step_fraction = 1.5;
  EXPECT_THROW(attack(g, AttackStrategy::degree, o), InputError);
  o.step_fraction = 1.0;
  EXPECT_EQ(attack(g, AttackStrategy::degree, o).points.size(), 2u);
  EXPECT_THROW(parse_attack_strategy("closeness"), InputError);
}

TEST(Attack, RandomDependsOnlyOnSeed) {
  std::mt19937_64 rng(27);
  auto g = make(oracle::random_connected_graph(rng, 80, 0.06));
  AttackOptions o;
  o.seed = 9;
  auto a = attack(g, AttackStrategy::random, o);
  auto b = attack(g, AttackStrategy::random, o);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].lcc_fraction, b.points[i].lcc_fraction);
}

TEST(Export, GraphmlAndEdgeList) {
  auto g = make({{0, 1}, {1, 2}});
  auto sc = centrality(g);
  std::stringstream gm, el;
  write_graphml(gm, g, &sc);
  write_edge_list(el, g);
  EXPECT_NE(gm.str().find("<graphml"), std::string::npos);
  EXPECT_NE(gm.str().find("10.0.0.1:18080"), std::string::npos);
  EXPECT_EQ(el.str(), "10.0.0.0:18080 10.0.0.1:18080\n10.0.0.1:18080 10.0.0.2:18080\n");
}

TEST(Export, ReadEdgeCsv) {
  std::stringstream in("ip1,ip2,count,label\n10.0.0.1:1,10.0.0.2:1,5,1\n10.0.0.1:1,10.0.0.3:1,2,0\n");
  auto e = read_edge_csv(in);
  ASSERT_EQ(e.size(), 1u);
  std::stringstream bad("a,b\n");
  EXPECT_THROW(read_edge_csv(bad), ProtocolError);
}
