#include <gtest/gtest.h>

#include <powrob/enumerate.hpp>
#include <powrob/oracle.hpp>

#include "common.hpp"

using namespace powrob;
using testing_support::litmus;

TEST(Enumerate, BoundZero) {
  Program p = litmus("mp.lit");
  std::vector<Computation> all;
  enumerate_computations(p, Bounds{0}, [&](const Computation& c, const PowerState&) {
    all.push_back(c);
    return true;
  });
  ASSERT_EQ(all.size(), 1u);
  EXPECT_TRUE(all[0].empty());
  EXPECT_EQ(count_computations(p, Bounds{0}), 1u);
}

TEST(Enumerate, MpContainsSigmaAndReplays) {
  Program p = litmus("mp.lit");
  Computation sigma = parse_computation(p, testing_support::kSigmaMp);
  bool found = false;
  unsigned long long n = 0;
  enumerate_computations(p, Bounds{2}, [&](const Computation& c, const PowerState& s) {
    ++n;
    if (c == sigma) found = true;
    auto r = replay(p, c);
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_EQ(r.state, s);
    return true;
  });
  EXPECT_TRUE(found);
  EXPECT_EQ(to_string_u128(count_computations(p, Bounds{2})), std::to_string(n));
}

// Outcome sets of the classic litmus shapes: Power allows every combination in MP, SB and LB.
TEST(Enumerate, Outcomes) {
  std::set<Outcome> all4{{{}, {0, 0}}, {{}, {0, 1}}, {{}, {1, 0}}, {{}, {1, 1}}};
  Program mp = litmus("mp.lit");
  EXPECT_EQ(outcomes(mp, Bounds{2}), all4);
  EXPECT_EQ(format_outcome(mp, Outcome{{}, {1, 0}}), "2:r1=1 2:r2=0");
  std::set<Outcome> sb{{{0}, {0}}, {{0}, {1}}, {{1}, {0}}, {{1}, {1}}};
  EXPECT_EQ(outcomes(litmus("sb.lit"), Bounds{2}), sb);
  EXPECT_EQ(outcomes(litmus("lb.lit"), Bounds{2}), sb);
  EXPECT_EQ(outcomes(litmus("single_thread.lit"), Bounds{2}), (std::set<Outcome>{{{1}}}));
}

// Outcomes recomputed from the register valuations of every enumerated computation.
TEST(Enumerate, OutcomesMatchEnumeration) {
  for (const char* f : {"mp.lit", "mp_addr.lit", "branch.lit"}) {
    Program p = litmus(f);
    Power pw(p);
    std::set<Outcome> direct;
    enumerate_computations(p, Bounds{p.max_path()}, [&](const Computation&, const PowerState& s) {
      for (int t = 1; t <= p.num_threads(); ++t)
        if (!p.thread(t).outgoing(pw.control(s, t)).empty()) return true;
      Outcome o;
      for (int t = 1; t <= p.num_threads(); ++t) o.push_back(pw.registers(s, t));
      direct.insert(o);
      return true;
    });
    EXPECT_EQ(outcomes(p, Bounds{p.max_path()}), direct) << f;
  }
}

TEST(Classify, SigmaMpLoads) {
  Program p = litmus("mp.lit");
  Computation c = parse_computation(p, testing_support::kSigmaMp);
  auto lc = classify_load(c, 2, 1);
  EXPECT_EQ(lc.rule, LoadRule::Memory);
  EXPECT_EQ(lc.store, StoreRef::of(1, 2));
  auto ld = classify_load(c, 2, 2);
  EXPECT_EQ(ld.rule, LoadRule::Memory);
  EXPECT_EQ(ld.store, StoreRef::init(0));
}

TEST(Classify, EarlyRead) {
  Program p = litmus("single_thread.lit");
  std::optional<Computation> pick;
  enumerate_computations(p, Bounds{2}, [&](const Computation& c, const PowerState&) {
    std::size_t load = 0, commit = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k].kind == Event::Kind::Load) load = k;
      if (c[k].kind == Event::Kind::StoreCommit) commit = k;
    }
    if (c.size() > 4 && load < commit) {
      pick = c;
      return false;
    }
    return true;
  });
  ASSERT_TRUE(pick);
  auto lc = classify_load(*pick, 1, 2);
  EXPECT_EQ(lc.rule, LoadRule::Early);
  EXPECT_EQ(lc.store, StoreRef::of(1, 1));
}

// The syntactic classification agrees with the rule the engine took, for every load of every
// accepted computation of a corpus of small programs.
TEST(Classify, AgreesWithEngine) {
  std::vector<Program> corpus;
  for (const char* f : {"mp.lit", "sb.lit", "lb.lit", "mp_addr.lit", "branch.lit", "single_thread.lit"})
    corpus.push_back(litmus(f));
  corpus.push_back(parse_program(
      "program FWD\ndomain 2\nvars x\nthread 1 {\n q0 -> q1: mem[&x] <- 1\n q1 -> q2: mem[&x] <- 0\n"
      " q2 -> q3: r1 <- mem[&x]\n}\nthread 2 {\n q0 -> q1: mem[&x] <- 1\n}\n"));
  corpus.push_back(parse_program(
      "program UNK\ndomain 2\nthread 1 {\n q0 -> q1: r1 <- mem[1]\n q1 -> q2: mem[r1] <- 1\n"
      " q2 -> q3: r2 <- mem[0]\n}\nthread 2 {\n q0 -> q1: mem[1] <- 1\n}\n"));
  for (const auto& p : corpus) {
    std::size_t n = 0;
    enumerate_computations(p, Bounds{p.max_path()}, [&](const Computation& c, const PowerState& s) {
      for (int t = 1; t <= p.num_threads(); ++t) {
        const auto& th = s.threads[t - 1];
        for (int i = 1; i <= th.size(); ++i) {
          if (th.rule[i - 1] == LoadRule::None) continue;
          LoadClass lc;
          EXPECT_NO_THROW(lc = classify_load(c, t, i)) << p.name;
          EXPECT_EQ(lc.rule, th.rule[i - 1]) << p.name;
          EXPECT_EQ(lc.store, *th.loaded[i - 1]) << p.name;
        }
      }
      return ++n < 20000;
    });
    EXPECT_GT(n, 0u) << p.name;
  }
}

TEST(NormalForm, GammaSplit) {
  Program p = litmus("mp.lit");
  Computation g = parse_computation(p, testing_support::kGammaMp);
  EXPECT_TRUE(replay(p, g).ok);
  EXPECT_TRUE(is_normal_form(g, {4, 6, 8, 9}));
  auto split = find_normal_form_split(g, 5);
  ASSERT_TRUE(split);
  EXPECT_TRUE(is_normal_form(g, *split));
}

TEST(NormalForm, SinglePart) {
  Program p = litmus("mp.lit");
  Computation c = parse_computation(p,
                                    "F 1 q0->q1:mem[&x] <- 1\n"
                                    "S 1 1 1 0\n"
                                    "P 1 1 1 0\n");
  EXPECT_TRUE(is_normal_form(c, {}));
  EXPECT_TRUE(is_normal_form({}, {}));
}

TEST(NormalForm, LateFetch) {
  Program p = litmus("mp.lit");
  Computation c = parse_computation(p, testing_support::kSigmaMp);
  EXPECT_FALSE(is_normal_form(c, {3}));
  // Fetches of c and d follow all events of a and b, so the loads and commits can form the
  // remaining parts.
  EXPECT_EQ(find_normal_form_split(c, 5), (std::vector<int>{9, 12, 13, 13}));
  EXPECT_EQ(find_normal_form_split(c, 3), (std::vector<int>{9, 12}));
  EXPECT_FALSE(find_normal_form_split(c, 2));
}

TEST(NormalForm, OrderConflict) {
  Program p = litmus("mp.lit");
  Computation c = parse_computation(p,
                                    "F 1 q0->q1:mem[&x] <- 1\n"
                                    "F 2 q0->q1:r1 <- mem[&y]\n"
                                    "L 2 1 1\n"
                                    "S 1 1 1 0\n"
                                    "P 1 1 1 0\n"
                                    "C 2 1\n");
  EXPECT_FALSE(is_normal_form(c, {2}));
  EXPECT_TRUE(is_normal_form(c, {2, 3}));
  EXPECT_EQ(find_normal_form_split(c, 3), (std::vector<int>{3, 6}));
  EXPECT_EQ(find_normal_form_split(c, 2), (std::vector<int>{3}));
  EXPECT_FALSE(find_normal_form_split(c, 1));
}

TEST(Oracle, MessagePassing) {
  Program p = litmus("mp.lit");
  auto r = oracle_check(p, default_bounds(p));
  ASSERT_EQ(r.verdict, OracleVerdict::NonRobust);
  EXPECT_TRUE(replay(p, r.witness).ok);
  ASSERT_TRUE(r.cycle);
  EXPECT_TRUE(find_hb_cycle(trace_of(p, r.witness)));
}

TEST(Oracle, RobustPrograms) {
  for (const char* f : {"single_thread.lit", "disjoint.lit"}) {
    Program p = litmus(f);
    EXPECT_EQ(oracle_check(p, default_bounds(p)).verdict, OracleVerdict::Robust) << f;
  }
  Program p = litmus("mp.lit");
  EXPECT_EQ(oracle_check(p, Bounds{1}).verdict, OracleVerdict::Inconclusive);
}

// The oracle's verdict equals a direct scan of every enumerated computation.
TEST(Oracle, AgreesWithFullEnumeration) {
  std::vector<Program> corpus{litmus("sb.lit"), litmus("lb.lit"), litmus("mp_addr.lit"), litmus("branch.lit")};
  corpus.push_back(parse_program(
      "program MP_SWAPPED\ndomain 2\nvars x y\nthread 1 {\n q0 -> q1: mem[&x] <- 1\n q1 -> q2: mem[&y] <- 1\n}\n"
      "thread 2 {\n q0 -> q1: r2 <- mem[&x]\n q1 -> q2: r1 <- mem[&y]\n}\n"));
  for (const auto& p : corpus) {
    bool cyclic = false;
    enumerate_computations(p, default_bounds(p), [&](const Computation&, const PowerState& s) {
      cyclic = find_hb_cycle(trace_of_state(p, s)).has_value();
      return !cyclic;
    });
    auto r = oracle_check(p, default_bounds(p));
    EXPECT_EQ(r.verdict, cyclic ? OracleVerdict::NonRobust : OracleVerdict::Robust) << p.name;
  }
}
