#include <gtest/gtest.h>

#include <powrob/nfa.hpp>
#include <powrob/robust.hpp>

using namespace powrob;

namespace {

// (ab)* with an epsilon shortcut from the middle state back to the start.
Nfa<char> ab_star() {
  Nfa<char> n;
  int s = n.add_state(true), m = n.add_state(), e = n.add_state();
  n.set_initial(s);
  n.add_exact(s, 'a', m);
  n.add_exact(m, 'b', e);
  n.add_epsilon(e, s);
  return n;
}

MarkedEvent prop(int dst, int store_tid, int key) {
  MarkedEvent e;
  e.kind = Event::Kind::Prop;
  e.tid = dst;
  e.store_tid = store_tid;
  e.key = key;
  return e;
}

MarkedEvent load(int t, int key) {
  MarkedEvent e;
  e.kind = Event::Kind::Load;
  e.tid = t;
  e.key = key;
  return e;
}

}  // namespace

TEST(Nfa, AcceptsWithEpsilon) {
  auto n = ab_star();
  EXPECT_TRUE(n.accepts({}));
  EXPECT_TRUE(n.accepts({'a', 'b'}));
  EXPECT_TRUE(n.accepts({'a', 'b', 'a', 'b'}));
  EXPECT_FALSE(n.accepts({'a'}));
  EXPECT_FALSE(n.accepts({'b', 'a'}));
  EXPECT_EQ(n.closure({2}), (std::vector<int>{0, 2}));
  EXPECT_TRUE(n.accepting(2));
}

TEST(Nfa, RejectsUndeclaredStates) {
  Nfa<char> n;
  n.add_state();
  EXPECT_THROW(n.add_exact(0, 'a', 3), std::out_of_range);
}

TEST(Nfa, UniversalAndEmpty) {
  auto u = Nfa<char>::universal();
  auto e = Nfa<char>::empty();
  for (std::vector<char> w : {std::vector<char>{}, {'x'}, {'x', 'y', 'z'}}) {
    EXPECT_TRUE(u.accepts(w));
    EXPECT_FALSE(e.accepts(w));
  }
}

TEST(Nfa, Productive) {
  Nfa<char> n;
  int a = n.add_state(), b = n.add_state(true), c = n.add_state();
  n.set_initial(a);
  n.add_exact(a, 'x', b);
  n.add_exact(a, 'y', c);
  EXPECT_EQ(n.productive(), (std::vector<char>{1, 1, 0}));
}

TEST(Hop, StoreStoreNeedsLowerKey) {
  auto h = hop_nfa(1, 2);
  auto leave = prop(1, 1, 0);
  leave.leave = true;
  auto enter = prop(2, 2, 1);
  enter.enter = true;
  enter.cmp_prev = Cmp::Less;
  EXPECT_TRUE(h.accepts({leave, enter}));
  EXPECT_TRUE(h.accepts({enter, leave}));  // order of writing is irrelevant
  enter.cmp_prev = Cmp::Greater;
  EXPECT_FALSE(h.accepts({leave, enter}));
  enter.cmp_prev = Cmp::Diff;
  EXPECT_FALSE(h.accepts({leave, enter}));
}

TEST(Hop, ComparisonCarriedByLeave) {
  auto h = hop_nfa(1, 2);
  auto enter = prop(2, 2, 1);
  enter.enter = true;
  auto leave = prop(1, 1, 0);
  leave.leave = true;
  leave.cmp_next = Cmp::Less;
  EXPECT_TRUE(h.accepts({enter, leave}));
}

TEST(Hop, SourceAndConflict) {
  auto h = hop_nfa(1, 2);
  auto st = prop(1, 1, 4);
  st.leave = true;
  auto ld = load(2, 4);
  ld.enter = true;
  ld.cmp_prev = Cmp::Equal;
  EXPECT_TRUE(h.accepts({st, ld}));
  ld.cmp_prev = Cmp::Less;
  EXPECT_FALSE(h.accepts({st, ld}));

  // load of thread 1 reads a key below the store of thread 2
  auto l1 = load(1, 0);
  l1.leave = true;
  auto s2 = prop(2, 2, 4);
  s2.enter = true;
  s2.cmp_prev = Cmp::Less;
  EXPECT_TRUE(h.accepts({l1, s2}));
  s2.cmp_prev = Cmp::Equal;
  EXPECT_FALSE(h.accepts({l1, s2}));

  // two loads never form a hop
  auto l2 = load(2, 0);
  l2.enter = true;
  l2.cmp_prev = Cmp::Less;
  EXPECT_FALSE(h.accepts({l1, l2}));
}

TEST(Hop, UnmarkedWordsRejected) {
  auto h = hop_nfa(1, 2);
  EXPECT_FALSE(h.accepts({}));
  EXPECT_FALSE(h.accepts({prop(1, 1, 0), load(2, 0), prop(2, 1, 0)}));
}

TEST(Hop, OtherThreadsMarkersIgnored) {
  auto h = hop_nfa(1, 2);
  auto leave = prop(1, 1, 0);
  leave.leave = true;
  auto enter = prop(2, 2, 4);
  enter.enter = true;
  enter.cmp_prev = Cmp::Less;
  auto other = prop(3, 3, 8);
  other.enter = other.leave = true;
  EXPECT_TRUE(h.accepts({other, leave, other, enter}));
}
