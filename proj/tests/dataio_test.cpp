#include <doctest.h>

#include <set>
#include <sstream>

#include "robust_te/dataio.hpp"
#include "robust_te/errors.hpp"
#include "test_support.hpp"

using namespace robust_te;
using testing::diamond;

TEST_CASE("three-interval diamond CSV") {
  const Topology t = diamond();
  const TrafficTrace tr = load_trace(testing::data_dir() + "/diamond.csv", TraceFormat::kCsv, t);
  CHECK(tr.size() == 3);
  REQUIRE(tr.pairs.size() == 1);
  CHECK(tr.at(0).demand(0) == 8.0);
  CHECK(tr.at(1).demand(0) == 4.0);
  CHECK(tr.interval_seconds == 300.0);
}

TEST_CASE("CSV reader: missing pairs are zero, header optional, unit scale applied") {
  const Topology t = diamond();
  std::istringstream in("0,A,D,2\n0,B,D,1\n1,A,D,3\n");
  TraceLoadOptions opts;
  opts.unit_scale = 2.0;
  opts.interval_seconds = 60.0;
  const TrafficTrace tr = read_trace_csv(in, t, opts);
  REQUIRE(tr.pairs.size() == 2);
  CHECK(tr.interval_seconds == 60.0);
  CHECK(tr.at(0).demand(0) == 4.0);
  CHECK(tr.at(1).demand(1) == 0.0);
}

TEST_CASE("CSV reader rejects bad rows") {
  const Topology t = diamond();
  auto load = [&](const std::string& text) {
    std::istringstream in(text);
    return read_trace_csv(in, t);
  };
  CHECK_THROWS_AS(load("0,A,D,-1\n"), DataError);
  CHECK_THROWS_AS(load("0,A,Q,1\n"), DataError);
  CHECK_THROWS_AS(load("0,A,D\n"), DataError);
  CHECK_THROWS_AS(load("0,A,D,x\n"), DataError);
  CHECK_THROWS_AS(load("0,A,D,1\n0,A,D,2\n"), DataError);
  CHECK_THROWS_AS(load("0,A,D,1\n2,A,D,1\n"), DataError);  // interval 1 missing
  CHECK_THROWS_AS(load(""), DataError);
}

TEST_CASE("CSV write/read round trip is exact") {
  const Topology t = diamond();
  SynthOptions o;
  o.length = 5;
  o.seed = 3;
  const TrafficTrace tr = synth_trace(t, o);
  std::ostringstream out;
  write_trace_csv(tr, t, out);
  std::istringstream in(out.str());
  const TrafficTrace back = read_trace_csv(in, t);
  REQUIRE(back.size() == tr.size());
  CHECK(back.pairs == tr.pairs);
  for (std::size_t i = 0; i < tr.size(); ++i) CHECK(back.at(i).demand == tr.at(i).demand);
}

TEST_CASE("Abilene rows: plain and five-column layouts") {
  TopologySpec spec;
  spec.links = {{"A", "B", 1.0, {}}, {"B", "A", 1.0, {}}};
  const Topology t = build_topology(spec);
  std::istringstream plain("0 1 2 0\n0 5 6 0\n");
  const TrafficTrace a = read_trace_abilene(plain, t);
  CHECK(a.size() == 2);
  CHECK(a.at(0).demand(0) == 1.0);  // A->B
  CHECK(a.at(0).demand(1) == 2.0);  // B->A
  CHECK(a.at(1).demand(1) == 6.0);

  std::istringstream wide("0 9 9 9 9 1 9 9 9 9 2 9 9 9 9 0 9 9 9 9\n");
  TraceLoadOptions opts;
  opts.unit_scale = 800.0 / 300.0;
  const TrafficTrace b = read_trace_abilene(wide, t, opts);
  CHECK(b.at(0).demand(0) == doctest::Approx(800.0 / 300.0));
  CHECK(b.at(0).demand(1) == doctest::Approx(1600.0 / 300.0));

  std::istringstream short_row("1 2 3\n");
  CHECK_THROWS_AS(read_trace_abilene(short_row, t), DataError);
}

TEST_CASE("Abilene archive week has 2016 five-minute intervals when provided") {
  const char* path = std::getenv("ROBUST_TE_ABILENE_TM");
  if (path == nullptr) {
    MESSAGE("ROBUST_TE_ABILENE_TM not set; archive check skipped");
    return;
  }
  const Topology t = read_topology_file(testing::data_dir() + "/abilene.topo");
  const TrafficTrace tr = load_trace(path, TraceFormat::kAbilene, t);
  CHECK(tr.size() == 7 * 24 * 12);
  CHECK(tr.pairs.size() == 132);
}

TEST_CASE("scale_trace") {
  const Topology t = diamond();
  SynthOptions o;
  o.length = 4;
  const TrafficTrace tr = synth_trace(t, o);
  const TrafficTrace same = scale_trace(tr, 1.0);
  for (std::size_t i = 0; i < tr.size(); ++i) CHECK(same.at(i).demand == tr.at(i).demand);
  const TrafficTrace x4 = scale_trace(tr, 4.0);
  for (std::size_t i = 0; i < tr.size(); ++i) CHECK(x4.at(i).demand == 4.0 * tr.at(i).demand);
  CHECK_THROWS_AS(scale_trace(tr, 0.0), DataError);
}

TEST_CASE("scale_trace composes exactly for power-of-two factors") {
  // Exact composition holds whenever a*b is representable without rounding of
  // the intermediate products; powers of two guarantee that.
  std::mt19937_64 rng(4);
  const Topology t = testing::random_topology(rng, 5, 0.4);
  SynthOptions o;
  o.length = 6;
  const TrafficTrace tr = synth_trace(t, o);
  for (double a : {0.5, 2.0, 4.0}) {
    for (double b : {0.25, 2.0, 8.0}) {
      const TrafficTrace lhs = scale_trace(scale_trace(tr, a), b);
      const TrafficTrace rhs = scale_trace(tr, a * b);
      for (std::size_t i = 0; i < tr.size(); ++i) CHECK(lhs.at(i).demand == rhs.at(i).demand);
    }
  }
}

TEST_CASE("synthetic traces are deterministic and well formed") {
  std::mt19937_64 rng(9);
  const Topology t = testing::random_topology(rng, 6, 0.3);
  SynthOptions o;
  o.pattern = SynthPattern::kPeriodic;
  o.length = 48;
  o.seed = 7;
  const TrafficTrace a = synth_trace(t, o);
  const TrafficTrace b = synth_trace(t, o);
  REQUIRE(a.size() == 48);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.at(i).demand == b.at(i).demand);
  CHECK(a.pairs == connected_pairs(t));
  CHECK_NOTHROW(validate_trace(a));
}

TEST_CASE("gravity with uniform masses is near uniform") {
  const Topology t = diamond();
  SynthOptions o;
  o.pattern = SynthPattern::kGravity;
  o.uniform_masses = true;
  o.noise = 0.0;
  o.length = 3;
  const TrafficTrace tr = synth_trace(t, o);
  const auto& d = tr.at(0).demand;
  CHECK(d.maxCoeff() == doctest::Approx(d.minCoeff()));
}

TEST_CASE("regime switch alternates every period") {
  Eigen::VectorXd r0(2), r1(2);
  r0 << 10.0, 1.0;
  r1 << 1.0, 10.0;
  const TrafficTrace tr = regime_switch_trace({{0, 1}, {1, 0}}, {r0, r1}, 48, 12, 0.0, 1);
  for (std::size_t t = 0; t < 48; ++t) {
    const Eigen::VectorXd& expect = (t / 12) % 2 == 0 ? r0 : r1;
    CHECK(tr.at(t).demand == expect);
  }
  const TrafficTrace noisy = regime_switch_trace({{0, 1}, {1, 0}}, {r0, r1}, 24, 12, 0.1, 1);
  for (std::size_t t = 0; t < 24; ++t) {
    const Eigen::VectorXd& base = t < 12 ? r0 : r1;
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(noisy.at(t).demand(i) >= 0.9 * base(i) - 1e-12);
      CHECK(noisy.at(t).demand(i) <= 1.1 * base(i) + 1e-12);
    }
  }
}

TEST_CASE("random capacities") {
  std::mt19937_64 rng(2);
  const Topology t = testing::random_topology(rng, 6, 0.4);
  const Topology same = random_capacities(t, 5.0, 5.0, 1);
  for (const auto& l : same.links()) CHECK(l.capacity == 5.0);
  const Topology a = random_capacities(t, 1e6, 9e6, 42);
  const Topology b = random_capacities(t, 1e6, 9e6, 42);
  for (LinkIndex l = 0; l < t.num_links(); ++l) {
    CHECK(a.link(l).capacity >= 1e6);
    CHECK(a.link(l).capacity <= 9e6);
    CHECK(a.link(l).capacity == b.link(l).capacity);
  }
  CHECK_THROWS_AS(random_capacities(t, 2.0, 1.0, 1), DataError);
}

TEST_CASE("split of a 100-interval trace with c=2, w=3") {
  TrafficTrace tr;
  tr.pairs = {{0, 1}};
  for (std::size_t i = 0; i < 100; ++i) tr.matrices.push_back(testing::matrix(i, {1.0}));
  // Starts t with t >= 2 and t + 3 <= 100: 2..97.
  CHECK(usable_starts(100, 3, 2).size() == 96);
  const TraceSplit s = split_trace(tr, 0.7, 3, 2, 17);
  CHECK(s.train.size() == 67);
  CHECK(s.test.size() == 29);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto t : s.test) CHECK(all.insert(t).second);
  CHECK(all.size() == 96);
  CHECK(*all.begin() == 2);
  CHECK(*all.rbegin() == 97);
  const TraceSplit again = split_trace(tr, 0.7, 3, 2, 17);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK_THROWS_AS(split_trace(tr, 1.0, 3, 2, 17), ConfigError);
  CHECK_THROWS_AS(split_trace(tr, 0.7, 99, 2, 17), DataError);
}

TEST_CASE("split property: disjoint cover for random lengths and windows") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> len(6, 80), win(1, 4);
  std::uniform_real_distribution<double> frac(0.1, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    TrafficTrace tr;
    tr.pairs = {{0, 1}};
    const std::size_t n = len(rng), w = win(rng), c = win(rng);
    for (std::size_t i = 0; i < n; ++i) tr.matrices.push_back(testing::matrix(i, {1.0}));
    if (c + w > n) continue;
    const double f = frac(rng);
    const TraceSplit s = split_trace(tr, f, w, c, rng());
    const auto starts = usable_starts(n, w, c);
    std::vector<std::size_t> merged(s.train);
    merged.insert(merged.end(), s.test.begin(), s.test.end());
    std::sort(merged.begin(), merged.end());
    CHECK(merged == starts);
    CHECK(std::adjacent_find(merged.begin(), merged.end()) == merged.end());
    CHECK(s.train.size() ==
          static_cast<std::size_t>(std::llround(f * static_cast<double>(starts.size()))));
  }
}
