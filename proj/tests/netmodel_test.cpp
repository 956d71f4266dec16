#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "robust_te/errors.hpp"
#include "robust_te/netmodel.hpp"
#include "test_support.hpp"

using namespace robust_te;
using testing::diamond;
using testing::pair_of;

TEST_CASE("diamond topology has four nodes and four links") {
  const Topology t = diamond();
  CHECK(t.num_nodes() == 4);
  CHECK(t.num_links() == 4);
  CHECK(t.node_name(0) == "A");
  CHECK(t.find_link(t.node("A"), t.node("B")).has_value());
  CHECK_FALSE(t.find_link(t.node("B"), t.node("A")).has_value());
}

TEST_CASE("topology construction rejects malformed specs") {
  TopologySpec dup;
  dup.links = {{"A", "B", 1.0, {}}, {"A", "B", 2.0, {}}};
  CHECK_THROWS_AS(build_topology(dup), DataError);

  TopologySpec loop;
  loop.links = {{"A", "A", 1.0, {}}};
  CHECK_THROWS_AS(build_topology(loop), DataError);

  TopologySpec zero;
  zero.links = {{"A", "B", 0.0, {}}};
  CHECK_THROWS_AS(build_topology(zero), DataError);

  TopologySpec dangling;
  dangling.nodes = {"A"};
  dangling.links = {{"A", "B", 1.0, {}}};
  CHECK_THROWS_AS(build_topology(dangling), DataError);

  TopologySpec defaults;
  defaults.links = {{"A", "B", 3.0, {}}};
  CHECK(build_topology(defaults).link(0).weight == 1.0);
}

TEST_CASE("topology text format round trips") {
  std::istringstream in("# comment\nnodes 3 links 2\nX Y 5 2\n\nY Z 7\n");
  const Topology t = read_topology(in);
  CHECK(t.num_nodes() == 3);
  CHECK(t.link(*t.find_link(t.node("X"), t.node("Y"))).weight == 2.0);
  CHECK(t.link(*t.find_link(t.node("Y"), t.node("Z"))).weight == 1.0);

  std::ostringstream out;
  write_topology(t, out);
  std::istringstream again(out.str());
  const Topology u = read_topology(again);
  REQUIRE(u.num_links() == t.num_links());
  for (LinkIndex l = 0; l < t.num_links(); ++l) {
    CHECK(u.link(l).src == t.link(l).src);
    CHECK(u.link(l).capacity == t.link(l).capacity);
    CHECK(u.link(l).weight == t.link(l).weight);
  }

  std::istringstream bad_count("nodes 2 links 2\nA B 1\n");
  CHECK_THROWS_AS(read_topology(bad_count), DataError);
  std::istringstream bad_header("links 2\n");
  CHECK_THROWS_AS(read_topology(bad_header), DataError);
}

TEST_CASE("shipped Abilene topology has 12 nodes and 30 directed links") {
  const Topology t = read_topology_file(testing::data_dir() + "/abilene.topo");
  CHECK(t.num_nodes() == 12);
  CHECK(t.num_links() == 30);
  for (const Link& l : t.links()) CHECK(t.find_link(l.dst, l.src).has_value());
}

TEST_CASE("ATT topology has 25 nodes and 112 links when provided") {
  const char* path = std::getenv("ROBUST_TE_ATT_TOPO");
  if (path == nullptr) {
    MESSAGE("ROBUST_TE_ATT_TOPO not set; ATT topology check skipped");
    return;
  }
  const Topology t = read_topology_file(path);
  CHECK(t.num_nodes() == 25);
  CHECK(t.num_links() == 112);
}

TEST_CASE("k shortest paths on the diamond") {
  const Topology t = diamond();
  const auto paths = k_shortest_paths(t, pair_of(t, "A", "D"), 2);
  REQUIRE(paths.size() == 2);
  CHECK(describe_path(t, paths[0]) == "A->B->D");
  CHECK(describe_path(t, paths[1]) == "A->C->D");
  CHECK(paths[0].weight == 2.0);
  CHECK(paths[1].weight == 2.0);
  CHECK(k_shortest_paths(t, pair_of(t, "A", "D"), 5).size() == 2);
  CHECK(describe_path(t, shortest_path(t, pair_of(t, "A", "D"))) == "A->B->D");
}

TEST_CASE("shortest path on a chain") {
  TopologySpec spec;
  spec.links = {{"A", "B", 1.0, {}}, {"B", "C", 1.0, {}}};
  const Topology t = build_topology(spec);
  CHECK(describe_path(t, shortest_path(t, pair_of(t, "A", "C"))) == "A->B->C");
  CHECK_THROWS_AS(shortest_path(t, pair_of(t, "C", "A")), DataError);
}

TEST_CASE("k shortest paths match exhaustive enumeration on random graphs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const Topology t = testing::random_topology(rng, 5, 0.4);
    for (NodeIndex s = 0; s < t.num_nodes(); ++s) {
      for (NodeIndex d = 0; d < t.num_nodes(); ++d) {
        if (s == d) continue;
        const auto oracle = testing::all_simple_paths(t, s, d);
        for (std::size_t k : {1, 3, 6}) {
          const auto got = k_shortest_paths(t, {s, d}, k);
          REQUIRE(got.size() == std::min(k, oracle.size()));
          for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].weight == oracle[i].weight);
            CHECK(got[i].nodes == oracle[i].nodes);
            validate_path(t, got[i]);
          }
        }
        CHECK(shortest_path(t, {s, d}).nodes == oracle.front().nodes);
      }
    }
  }
}

TEST_CASE("k shortest paths: weights nondecreasing and prefix property") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Topology t = testing::random_topology(rng, 6, 0.35);
    const FlowPair fp{0, t.num_nodes() - 1};
    const auto big = k_shortest_paths(t, fp, 8);
    for (std::size_t i = 1; i < big.size(); ++i) CHECK(big[i - 1].weight <= big[i].weight);
    for (std::size_t k = 1; k < 8; ++k) {
      const auto small = k_shortest_paths(t, fp, k);
      REQUIRE(small.size() <= big.size());
      for (std::size_t i = 0; i < small.size(); ++i) CHECK(small[i].id == big[i].id);
    }
  }
}

TEST_CASE("path ids depend only on the link sequence") {
  const Topology t = diamond();
  const auto a = k_shortest_paths(t, pair_of(t, "A", "D"), 2);
  const auto b = k_shortest_paths(t, pair_of(t, "A", "D"), 2);
  CHECK(a[0].id == b[0].id);
  CHECK(a[0].id != a[1].id);
  CHECK(format_path_id(a[0].id).size() == 16);

  // Same graph declared in a different order keeps the ids.
  TopologySpec spec;
  spec.links = {{"C", "D", 10.0, 1.0}, {"B", "D", 10.0, 1.0},
                {"A", "C", 10.0, 1.0}, {"A", "B", 10.0, 1.0}};
  const Topology u = build_topology(spec);
  const auto c = k_shortest_paths(u, pair_of(u, "A", "D"), 2);
  CHECK(c[0].id == a[0].id);
  CHECK(c[1].id == a[1].id);
}

TEST_CASE("validate_path rejects broken paths") {
  const Topology t = diamond();
  Path p = shortest_path(t, pair_of(t, "A", "D"));
  Path gap = p;
  gap.links = {p.links[0], *t.find_link(t.node("C"), t.node("D"))};
  CHECK_THROWS_AS(validate_path(t, gap), DataError);
  Path wrong_end = p;
  wrong_end.pair.dst = t.node("C");
  CHECK_THROWS_AS(validate_path(t, wrong_end), DataError);
}

TEST_CASE("candidate path set indexing") {
  const Topology t = diamond();
  const std::vector<FlowPair> pairs = {pair_of(t, "A", "B"), pair_of(t, "A", "D")};
  const CandidatePathSet cps = build_candidate_paths(t, pairs, 4);
  CHECK(cps.num_pairs() == 2);
  CHECK(cps.num_paths() == 3);
  CHECK(cps.first_of(1) == 1);
  CHECK(cps.end_of(1) == 3);
  CHECK(cps.ref(2).pair == 1);
  CHECK(cps.ref(2).rank == 1);
  CHECK(cps.find(cps.path(2).id) == std::optional<std::size_t>(2));

  PathSubset s({2});
  CHECK_FALSE(s.covers(cps, 0));
  CHECK(s.covers(cps, 1));
  s.insert(0);
  s.insert(0);
  CHECK(s.indices() == std::vector<std::size_t>{0, 2});
  CHECK(PathSubset::all(cps).size() == 3);
}
