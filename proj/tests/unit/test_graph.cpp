#include <gtest/gtest.h>

#include "dloop/error.hpp"
#include "dloop/graph.hpp"
#include "generators.hpp"

using namespace dloop;
using dloop::testing::Rng;

namespace {

Canvas notes_canvas(std::initializer_list<const char*> ids) {
  Canvas c;
  for (const char* id : ids) c.add_node(StickyNote{NodeId{id}, id, {}, std::nullopt});
  return c;
}

std::vector<std::string> values(const std::vector<NodeId>& ids) {
  std::vector<std::string> out;
  for (const auto& id : ids) out.push_back(id.value());
  return out;
}

}  // namespace

TEST(Canvas, RejectsSelfLoopsDuplicatesAndUnknownIds) {
  auto c = notes_canvas({"a", "b"});
  c.connect(EdgeId{"e1"}, NodeId{"a"}, NodeId{"b"});
  EXPECT_THROW(c.connect(EdgeId{"e2"}, NodeId{"a"}, NodeId{"a"}), SelfLoop);
  EXPECT_THROW(c.connect(EdgeId{"e3"}, NodeId{"a"}, NodeId{"b"}), DuplicateEdge);
  EXPECT_THROW(c.connect(EdgeId{"e4"}, NodeId{"a"}, NodeId{"zz"}), UnknownId);
  EXPECT_THROW(c.connect(EdgeId{"e1"}, NodeId{"b"}, NodeId{"a"}), DuplicateId);
  EXPECT_THROW(c.add_node(StickyNote{NodeId{"a"}, "x", {}, std::nullopt}), DuplicateId);
  EXPECT_THROW(c.disconnect(EdgeId{"missing"}), UnknownId);
}

TEST(Canvas, ReverseEdgeIsAllowedOnTheMainCanvas) {
  auto c = notes_canvas({"a", "b"});
  c.connect(EdgeId{"e1"}, NodeId{"a"}, NodeId{"b"});
  EXPECT_NO_THROW(c.connect(EdgeId{"e2"}, NodeId{"b"}, NodeId{"a"}));
  EXPECT_THROW((void)c.predecessors_in_order(NodeId{"a"}), CycleDetected);
}

TEST(Canvas, RemoveNodeDropsIncidentEdges) {
  auto c = notes_canvas({"a", "b", "c"});
  c.connect(EdgeId{"e1"}, NodeId{"a"}, NodeId{"b"});
  c.connect(EdgeId{"e2"}, NodeId{"b"}, NodeId{"c"});
  c.connect(EdgeId{"e3"}, NodeId{"a"}, NodeId{"c"});
  EXPECT_EQ(c.remove_node(NodeId{"b"}), 2u);
  EXPECT_EQ(c.edges().size(), 1u);
  EXPECT_EQ(values(c.insertion_order()), (std::vector<std::string>{"a", "c"}));
}

TEST(Canvas, PredecessorsFollowTopologyThenInsertionOrder) {
  // d is inserted before c but depends on nothing, so it comes first among peers.
  auto c = notes_canvas({"root", "d", "c", "mid", "target", "other"});
  c.connect(EdgeId{"1"}, NodeId{"root"}, NodeId{"mid"});
  c.connect(EdgeId{"2"}, NodeId{"c"}, NodeId{"mid"});
  c.connect(EdgeId{"3"}, NodeId{"mid"}, NodeId{"target"});
  c.connect(EdgeId{"4"}, NodeId{"d"}, NodeId{"target"});
  c.connect(EdgeId{"5"}, NodeId{"target"}, NodeId{"other"});
  EXPECT_EQ(values(c.predecessors_in_order(NodeId{"target"})),
            (std::vector<std::string>{"root", "d", "c", "mid"}));
  EXPECT_TRUE(c.predecessors_in_order(NodeId{"root"}).empty());
}

TEST(Canvas, CycleOutsideTheAncestorSubgraphIsIgnored) {
  auto c = notes_canvas({"a", "b", "x", "y"});
  c.connect(EdgeId{"1"}, NodeId{"a"}, NodeId{"b"});
  c.connect(EdgeId{"2"}, NodeId{"x"}, NodeId{"y"});
  c.connect(EdgeId{"3"}, NodeId{"y"}, NodeId{"x"});
  EXPECT_EQ(values(c.predecessors_in_order(NodeId{"b"})), std::vector<std::string>{"a"});
}

TEST(GraphFunctions, DescendantsAndReaches) {
  const std::vector<Edge> edges{{EdgeId{"1"}, NodeId{"a"}, NodeId{"b"}},
                                {EdgeId{"2"}, NodeId{"b"}, NodeId{"c"}},
                                {EdgeId{"3"}, NodeId{"d"}, NodeId{"c"}}};
  auto d = values(descendants(edges, NodeId{"a"}));
  std::sort(d.begin(), d.end());
  EXPECT_EQ(d, (std::vector<std::string>{"b", "c"}));
  EXPECT_TRUE(reaches(edges, NodeId{"a"}, NodeId{"c"}));
  EXPECT_FALSE(reaches(edges, NodeId{"c"}, NodeId{"a"}));
}

TEST(GraphProperty, PredecessorOrderMatchesOracleOnRandomDags) {
  Rng rng(20260101);
  for (int round = 0; round < 150; ++round) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 14)(rng);
    const auto dag = dloop::testing::random_dag(rng, n, 0.35);
    Canvas c;
    std::map<NodeId, std::size_t> rank;
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
      c.add_node(StickyNote{dag.nodes[i], "n", {}, std::nullopt});
      rank[dag.nodes[i]] = i;
    }
    for (const auto& e : dag.edges) c.connect(e.id, e.source, e.target);
    const auto sets = dloop::testing::oracle_ancestor_sets(dag.nodes, dag.edges);
    for (const auto& t : dag.nodes) {
      const auto got = c.predecessors_in_order(t);
      ASSERT_EQ(got, dloop::testing::oracle_ordered_ancestors(dag.edges, t, rank));
      ASSERT_EQ(std::set<NodeId>(got.begin(), got.end()), sets.at(t));
      // Every edge among the returned ancestors points forward.
      std::map<NodeId, std::size_t> pos;
      for (std::size_t i = 0; i < got.size(); ++i) pos[got[i]] = i;
      for (const auto& e : dag.edges) {
        if (pos.contains(e.source) && pos.contains(e.target)) {
          ASSERT_LT(pos[e.source], pos[e.target]);
        }
      }
    }
  }
}
