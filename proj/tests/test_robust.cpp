#include <gtest/gtest.h>

#include <set>

#include <powrob/fuzz.hpp>
#include <powrob/robust.hpp>

#include "common.hpp"

using namespace powrob;
using testing_support::litmus;

namespace {

std::vector<std::string> corpus() {
  return {"mp.lit", "sb.lit", "lb.lit", "mp_addr.lit", "branch.lit", "single_thread.lit", "disjoint.lit"};
}

// Every combination of (entry, exit) pairs over the profile, kept when all hops are possible.
std::vector<std::set<std::pair<int, int>>> brute_mark_pairs(const Program& p, const std::vector<int>& profile) {
  const int n = static_cast<int>(profile.size());
  std::vector<std::vector<std::pair<int, int>>> cand(n);
  for (int j = 0; j < n; ++j) {
    const Thread& th = p.thread(profile[j]);
    auto reaches = [&](int from, int to) {
      std::set<int> seen{from};
      std::vector<int> stack{from};
      while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        if (q == to) return true;
        for (int i : th.outgoing(q))
          if (seen.insert(th.instructions[i].dst).second) stack.push_back(th.instructions[i].dst);
      }
      return false;
    };
    for (const auto& e : th.instructions)
      for (const auto& l : th.instructions) {
        if (!e.cmd.is_memory() || !l.cmd.is_memory()) continue;
        if (!reaches(th.initial, e.src)) continue;
        if ((e.id == l.id && n > 1) || reaches(e.dst, l.src)) cand[j].push_back({e.id, l.id});
      }
  }
  auto hop = [&](int j, int l, int k, int e) {
    const Command& a = p.instr(profile[j], l).cmd;
    const Command& b = p.instr(profile[k], e).cmd;
    if (a.kind == Command::Kind::Load && b.kind == Command::Kind::Load) return false;
    auto x = possible_addresses(p, a), y = possible_addresses(p, b);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] && y[i]) return true;
    return false;
  };
  std::vector<std::set<std::pair<int, int>>> out(n);
  std::vector<std::pair<int, int>> pick(n);
  auto rec = [&](auto&& self, int j) -> void {
    if (j == n) {
      for (int k = 0; k < n; ++k)
        if (!hop(k, pick[k].second, (k + 1) % n, pick[(k + 1) % n].first)) return;
      for (int k = 0; k < n; ++k) out[k].insert(pick[k]);
      return;
    }
    for (auto c : cand[j]) {
      pick[j] = c;
      self(self, j + 1);
    }
  };
  rec(rec, 0);
  return out;
}

using PairSet = std::set<std::pair<int, int>>;

PairSet as_set(const std::vector<std::pair<int, int>>& v) { return PairSet(v.begin(), v.end()); }

}  // namespace

TEST(Profiles, Counts) {
  // sequences of distinct threads: n!/(n-k)! per length k
  EXPECT_EQ(enumerate_profiles(litmus("mp.lit")).size(), 2u + 2u);
  Program three = parse_program("program T\ndomain 2\nvars x\nthread 1 {\n}\nthread 2 {\n}\nthread 3 {\n}\n");
  EXPECT_EQ(enumerate_profiles(three).size(), 3u + 6u + 6u);
}

TEST(Profiles, LeadsRotation) {
  EXPECT_TRUE(leads_rotation({1, 2, 3}));
  EXPECT_TRUE(leads_rotation({1, 3, 2}));
  EXPECT_FALSE(leads_rotation({2, 3, 1}));
  EXPECT_FALSE(leads_rotation({3, 1, 2}));
}

TEST(MarkPairs, MessagePassing) {
  Program p = litmus("mp.lit");
  auto m = mark_pairs(p, {1, 2});
  ASSERT_EQ(m.size(), 2u);
  // the exit of one thread and the entry of the next share an address
  EXPECT_EQ(as_set(m[0]), (PairSet{{0, 0}, {0, 1}, {1, 1}}));
  EXPECT_EQ(as_set(m[1]), (PairSet{{0, 0}, {0, 1}, {1, 1}}));
}

TEST(MarkPairs, AgreesWithBruteForce) {
  std::vector<Program> programs;
  for (const auto& f : corpus()) programs.push_back(litmus(f));
  FuzzOptions o;
  o.max_instructions = 4;
  for (const auto& text : random_corpus(5, 40, o)) programs.push_back(parse_program(text));
  for (const auto& p : programs)
    for (const auto& prof : enumerate_profiles(p)) {
      auto fast = mark_pairs(p, prof);
      auto slow = brute_mark_pairs(p, prof);
      ASSERT_EQ(fast.size(), slow.size());
      for (std::size_t j = 0; j < fast.size(); ++j)
        EXPECT_EQ(as_set(fast[j]), slow[j]) << p.name << " position " << j;
      bool any_empty = false;
      for (const auto& s : slow) any_empty = any_empty || s.empty();
      EXPECT_EQ(profile_feasible(p, prof), !any_empty);
    }
}

TEST(RequiredHeads, Bounds) {
  for (const auto& f : corpus()) {
    Program p = litmus(f);
    int h = required_heads(p);
    EXPECT_GE(h, 1) << f;
    EXPECT_LE(h, p.num_threads() + 3) << f;
  }
}

TEST(Robustness, LitmusAgreesWithOracle) {
  for (const auto& f : corpus()) {
    Program p = litmus(f);
    auto c = cross_validate(p);
    EXPECT_TRUE(c.agree) << f << ": " << verdict_name(c.decided) << " vs " << verdict_name(c.oracle);
  }
}

TEST(Robustness, MessagePassingWitness) {
  Program p = litmus("mp.lit");
  auto r = check_robustness(p);
  ASSERT_EQ(r.verdict, Verdict::NonRobust);
  EXPECT_EQ(r.profile, (std::vector<int>{1, 2}));
  ASSERT_TRUE(r.witness);
  EXPECT_TRUE(replay(p, *r.witness).ok);
  auto cyc = find_hb_cycle(trace_of(p, *r.witness));
  ASSERT_TRUE(cyc);
  ASSERT_TRUE(r.cycle);
  ASSERT_TRUE(r.beautiful);
  EXPECT_EQ(r.beautiful->hops, (std::vector<std::string>{"src", "cf"}));
}

TEST(Robustness, SingleThreadAndDisjointAreRobust) {
  for (const char* f : {"single_thread.lit", "disjoint.lit"}) {
    auto r = check_robustness(litmus(f));
    EXPECT_EQ(r.verdict, Verdict::Robust) << f;
    EXPECT_FALSE(r.witness);
  }
}

TEST(Robustness, RotatedProfileGivesSameVerdict) {
  for (const char* f : {"mp.lit", "sb.lit", "disjoint.lit"}) {
    Program p = litmus(f);
    CheckOptions a, b;
    a.profile = std::vector<int>{1, 2};
    b.profile = std::vector<int>{2, 1};
    EXPECT_EQ(check_robustness(p, a).verdict, check_robustness(p, b).verdict) << f;
  }
}

TEST(Robustness, DeepeningDoesNotChangeVerdict) {
  for (const auto& f : corpus()) {
    Program p = litmus(f);
    CheckOptions off;
    off.deepen = false;
    auto a = check_robustness(p), b = check_robustness(p, off);
    EXPECT_EQ(a.verdict, b.verdict) << f;
    EXPECT_EQ(b.heads, required_heads(p)) << f;
    EXPECT_LE(a.heads, b.heads) << f;
  }
}

TEST(Robustness, ParallelJobsAgree) {
  for (const char* f : {"mp.lit", "sb.lit", "single_thread.lit"}) {
    Program p = litmus(f);
    CheckOptions par;
    par.jobs = 3;
    auto a = check_robustness(p), b = check_robustness(p, par);
    EXPECT_EQ(a.verdict, b.verdict) << f;
    EXPECT_EQ(a.profile, b.profile) << f;
  }
}

TEST(Robustness, TinyBudgetIsInconclusive) {
  Program q = parse_program(
      "program Busy\ndomain 2\nvars x y\n"
      "thread 1 {\n  q0 -> q1: mem[&x] <- 1\n  q1 -> q2: mem[&y] <- 1\n  q2 -> q3: r1 <- mem[&x]\n}\n"
      "thread 2 {\n  q0 -> q1: mem[&y] <- 0\n  q1 -> q2: r1 <- mem[&x]\n  q2 -> q3: mem[&x] <- 0\n}\n");
  CheckOptions o;
  o.budget = 1;
  o.deepen = false;
  auto r = check_robustness(q, o);
  EXPECT_NE(r.verdict, Verdict::Robust);
}

TEST(Robustness, RandomProgramsAgreeWithOracle) {
  FuzzOptions o;
  o.max_threads = 2;
  o.max_instructions = 2;
  for (const auto& text : random_corpus(17, 30, o)) {
    Program p = parse_program(text);
    auto c = cross_validate(p);
    EXPECT_TRUE(c.agree) << text;
  }
}
