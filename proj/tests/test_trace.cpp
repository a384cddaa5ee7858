#include <gtest/gtest.h>

#include <powrob/enumerate.hpp>
#include <powrob/trace.hpp>

#include "common.hpp"

using namespace powrob;
using testing_support::litmus;

namespace {

const Node a{1, 1}, b{1, 2}, c{2, 1}, d{2, 2};
const Node st_x = Node::init(0), st_y = Node::init(1);

// MP with the store to y dropped and the loads executed after a is visible.
const char* kAlphaPrime =
    "F 2 q0->q1:r1 <- mem[&y]\n"
    "F 2 q1->q2:r2 <- mem[&x]\n"
    "F 1 q0->q1:mem[&x] <- 1\n"
    "S 1 1 1 0\n"
    "P 1 1 1 0\n"
    "L 2 1 1\n"
    "L 2 2 0\n"
    "C 2 2\n"
    "C 2 1\n";

std::vector<std::string> corpus() {
  return {"mp.lit", "sb.lit", "lb.lit", "mp_addr.lit", "branch.lit", "single_thread.lit", "disjoint.lit"};
}

}  // namespace

TEST(Trace, SigmaMpTrace) {
  Program p = litmus("mp.lit");
  Trace tr = trace_of(p, parse_computation(p, testing_support::kSigmaMp));
  EXPECT_EQ(tr.nodes, (std::vector<Node>{st_x, st_y, a, b, c, d}));
  EXPECT_EQ(tr.po, (std::set<Arc>{{a, b}, {c, d}}));
  EXPECT_EQ(tr.co, (std::set<Arc>{{st_x, a}, {st_y, b}}));
  EXPECT_EQ(tr.src, (std::set<Arc>{{b, c}, {st_x, d}}));
  EXPECT_EQ(tr.cf, (std::set<Arc>{{d, a}}));
}

TEST(Trace, EmptyComputation) {
  Program p = litmus("mp.lit");
  Trace tr = trace_of(p, {});
  EXPECT_EQ(tr.nodes, (std::vector<Node>{st_x, st_y}));
  EXPECT_TRUE(tr.po.empty() && tr.co.empty() && tr.src.empty() && tr.cf.empty());
}

TEST(Trace, ShortenedMpTrace) {
  Program p = litmus("mp.lit");
  Trace tr = trace_of(p, parse_computation(p, kAlphaPrime));
  EXPECT_EQ(tr.nodes, (std::vector<Node>{st_x, st_y, a, c, d}));
  EXPECT_EQ(tr.po, (std::set<Arc>{{c, d}}));
  EXPECT_EQ(tr.co, (std::set<Arc>{{st_x, a}}));
  EXPECT_EQ(tr.src, (std::set<Arc>{{st_y, c}, {st_x, d}}));
  EXPECT_EQ(tr.cf, (std::set<Arc>{{d, a}}));
  EXPECT_FALSE(find_hb_cycle(tr));
}

TEST(Trace, RejectsInvalidComputation) {
  Program p = litmus("mp.lit");
  EXPECT_THROW(trace_of(p, parse_computation(p, "C 1 1\n")), TraceError);
}

TEST(Trace, GammaHasSameTrace) {
  Program p = litmus("mp.lit");
  EXPECT_EQ(trace_of(p, parse_computation(p, testing_support::kGammaMp)),
            trace_of(p, parse_computation(p, testing_support::kSigmaMp)));
}

TEST(HbCycle, MessagePassing) {
  Program p = litmus("mp.lit");
  Trace tr = trace_of(p, parse_computation(p, testing_support::kSigmaMp));
  auto cyc = find_hb_cycle(tr);
  ASSERT_TRUE(cyc);
  EXPECT_EQ(cyc->nodes, (std::vector<Node>{a, b, c, d}));
  EXPECT_EQ(cyc->kinds, (std::vector<std::string>{"po", "src", "po", "cf"}));
  EXPECT_EQ(format_cycle(p, *cyc), "t1_1 -po-> t1_2 -src-> t2_1 -po-> t2_2 -cf-> t1_1");
}

TEST(HbCycle, SingleNode) {
  Trace tr;
  tr.nodes = {Node::init(0)};
  EXPECT_FALSE(find_hb_cycle(tr));
  EXPECT_FALSE(find_beautiful_cycle(tr));
}

TEST(BeautifulCycle, MessagePassing) {
  Program p = litmus("mp.lit");
  Trace tr = trace_of(p, parse_computation(p, testing_support::kSigmaMp));
  auto bc = find_beautiful_cycle(tr);
  ASSERT_TRUE(bc);
  EXPECT_EQ(bc->profile, (std::vector<int>{1, 2}));
  EXPECT_EQ(bc->entries, (std::vector<Node>{a, c}));
  EXPECT_EQ(bc->exits, (std::vector<Node>{b, d}));
  EXPECT_EQ(bc->hops, (std::vector<std::string>{"src", "cf"}));
  auto other = find_beautiful_cycle(tr, std::vector<int>{2, 1});
  ASSERT_TRUE(other);
  EXPECT_EQ(other->entries, (std::vector<Node>{c, a}));
  EXPECT_FALSE(find_beautiful_cycle(tr, std::vector<int>{1}));
}

TEST(BeautifulCycle, Profiles) {
  EXPECT_EQ(all_profiles(1), (std::vector<std::vector<int>>{{1}}));
  EXPECT_EQ(all_profiles(2), (std::vector<std::vector<int>>{{1}, {2}, {1, 2}, {2, 1}}));
  EXPECT_EQ(all_profiles(3).size(), 15u);
}

TEST(TraceOutput, Dot) {
  Program p = litmus("mp.lit");
  std::string dot = trace_to_dot(p, trace_of(p, parse_computation(p, testing_support::kSigmaMp)));
  EXPECT_NE(dot.find("t1_1 -> t1_2 [label=\"po\", style=solid]"), std::string::npos);
  EXPECT_NE(dot.find("init_x -> t1_1 [label=\"co\", style=dashed]"), std::string::npos);
  EXPECT_NE(dot.find("t1_2 -> t2_1 [label=\"src\", style=bold]"), std::string::npos);
  EXPECT_NE(dot.find("t2_2 -> t1_1 [label=\"cf\", style=dotted]"), std::string::npos);
  std::string empty = trace_to_dot(p, trace_of(p, {}));
  EXPECT_EQ(empty.find("->"), std::string::npos);
}

TEST(TraceOutput, Json) {
  Program p = litmus("mp.lit");
  auto j = trace_to_json(p, trace_of(p, parse_computation(p, testing_support::kSigmaMp)));
  EXPECT_EQ(j["nodes"].size(), 6u);
  EXPECT_EQ(j["cf"], nlohmann::json::parse(R"([["t2_2","t1_1"]])"));
  EXPECT_EQ(j["src"].size(), 2u);
}

// Structural invariants of traces of all accepted computations.
TEST(TraceProperties, AcceptedComputations) {
  for (const auto& f : corpus()) {
    Program p = litmus(f);
    int checked = 0;
    enumerate_computations(p, Bounds{p.max_path()}, [&](const Computation& comp, const PowerState& s) {
      Trace tr = trace_of_state(p, s);
      // each load has exactly one source
      for (const Node& n : tr.nodes) {
        if (n.is_init()) continue;
        bool load = Power(p).instr(s, n.tid, n.index).cmd.kind == Command::Kind::Load;
        int in = 0;
        for (const auto& [x, y] : tr.src) in += y == n;
        EXPECT_EQ(in, load ? 1 : 0) << f;
      }
      // co is a strict total order per address rooted at the init store
      for (const auto& [x, y] : tr.co) {
        EXPECT_FALSE(tr.co.count({y, x})) << f;
        EXPECT_FALSE(y.is_init()) << f;
        for (const auto& [y2, z] : tr.co)
          if (y2 == y) EXPECT_TRUE(tr.co.count({x, z})) << f;
      }
      // cf is the join of src and co
      std::set<Arc> cf;
      for (const auto& [w, r] : tr.src)
        for (const auto& [w2, v] : tr.co)
          if (w == w2) cf.insert({r, v});
      EXPECT_EQ(cf, tr.cf) << f;
      // beautiful cycles exist exactly when hb cycles do
      EXPECT_EQ(find_hb_cycle(tr).has_value(), find_beautiful_cycle(tr).has_value()) << f;
      // co depends on key order only
      Computation scaled = comp;
      for (auto& e : scaled)
        if (e.kind == Event::Kind::StoreCommit) e.key = e.key + e.key + Rational(7);
      EXPECT_EQ(trace_of(p, scaled), tr) << f;
      ++checked;
      return checked < 3000;
    });
    EXPECT_GT(checked, 0) << f;
  }
}
