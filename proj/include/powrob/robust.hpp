#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mh.hpp"
#include "oracle.hpp"
#include "trace.hpp"

namespace powrob {

// Hop language between the LEAVE of thread t1 and the ENTER of thread t2: the two marked
// events are related by co (store, store, LEAVE key < ENTER key), src (store, load, equal keys)
// or cf (load, store, key read < ENTER key). The relation is carried by whichever endpoint is
// written second, so the language does not depend on symbol order.
inline Nfa<MarkedEvent> hop_nfa(int t1, int t2) {
  Nfa<MarkedEvent> n;
  n.commutative = true;
  const std::vector<Cmp> cmps{Cmp::None, Cmp::Diff, Cmp::Less, Cmp::Equal, Cmp::Greater};
  int start = n.add_state();
  n.set_initial(start);
  int accept = n.add_state(true);
  auto is_leave = [t1](const MarkedEvent& e) { return e.leave && e.owner() == t1; };
  auto is_enter = [t2](const MarkedEvent& e) { return e.enter && e.owner() == t2; };
  auto ok = [](bool leave_store, bool enter_store, Cmp c) {
    if (leave_store && enter_store) return c == Cmp::Less;
    if (leave_store) return c == Cmp::Equal;
    if (enter_store) return c == Cmp::Less;
    return false;
  };
  n.add_pred(start, [=](const MarkedEvent& e) { return !is_leave(e) && !is_enter(e); }, start);
  n.add_pred(accept, [](const MarkedEvent&) { return true; }, accept);
  for (bool store : {false, true})
    for (Cmp c : cmps) {
      // LEAVE seen first
      int l = n.add_state();
      n.add_pred(start, [=](const MarkedEvent& e) { return is_leave(e) && !is_enter(e) && e.is_store() == store && e.cmp_next == c; }, l);
      n.add_pred(l, [=](const MarkedEvent& e) { return !is_enter(e); }, l);
      n.add_pred(l, [=](const MarkedEvent& e) {
        return is_enter(e) && ok(store, e.is_store(), c != Cmp::None ? c : e.cmp_prev);
      }, accept);
      // ENTER seen first
      int en = n.add_state();
      n.add_pred(start, [=](const MarkedEvent& e) { return is_enter(e) && !is_leave(e) && e.is_store() == store && e.cmp_prev == c; }, en);
      n.add_pred(en, [=](const MarkedEvent& e) { return !is_leave(e); }, en);
      n.add_pred(en, [=](const MarkedEvent& e) {
        return is_leave(e) && ok(e.is_store(), store, c != Cmp::None ? c : e.cmp_next);
      }, accept);
    }
  return n;
}

// Addresses an instruction may access: exact for register-free address expressions.
inline std::vector<char> possible_addresses(const Program& p, const Command& c) {
  std::vector<char> out(p.domain.size, 0);
  if (!c.is_memory()) return out;
  if (c.addr_regs().empty())
    out[eval_with(c.addr, p.domain.size, [](int) { return 0; })] = 1;
  else
    std::fill(out.begin(), out.end(), 1);
  return out;
}

// Number of parts that suffices for the normal form of a shortest computation with cyclic
// happens-before. Its parts are delimited by the events of one cancellable instruction: fetch,
// load and commit for a load; fetch, commit with own propagation, and one propagation per other
// thread reading it for a store (propagations nobody reads can be dropped from a shortest
// computation). Never more than threads + 3.
inline int required_heads(const Program& p) {
  int n = 3;
  for (const auto& th : p.threads)
    for (const auto& in : th.instructions) {
      if (in.cmd.kind == Command::Kind::Load) n = std::max(n, 4);
      if (in.cmd.kind != Command::Kind::Store) continue;
      auto mine = possible_addresses(p, in.cmd);
      int readers = 0;
      for (const auto& other : p.threads) {
        if (other.id == th.id) continue;
        bool reads = false;
        for (const auto& o : other.instructions) {
          if (o.cmd.kind != Command::Kind::Load) continue;
          auto theirs = possible_addresses(p, o.cmd);
          for (std::size_t a = 0; a < mine.size(); ++a) reads |= mine[a] && theirs[a];
        }
        readers += reads;
      }
      n = std::max(n, 3 + readers);
    }
  return n;
}

// Rotating a profile keeps its cyclic successor relation, and with it the hop automata and the
// marked language up to renaming of positions; only the rotation starting at its least thread
// needs checking.
inline bool leads_rotation(const std::vector<int>& profile) {
  return profile.empty() || *std::min_element(profile.begin(), profile.end()) == profile.front();
}

// Marker placements per profile position: the (entry, exit) instruction pairs (entry at or before
// the exit in program order, strictly before for a one-thread profile) that take part in some
// choice over all positions making every hop possible on addresses and kinds alone. An empty
// position means the profile's intersection is empty.
using MarkPairs = std::vector<std::vector<std::pair<int, int>>>;

inline MarkPairs mark_pairs(const Program& p, const std::vector<int>& profile) {
  struct Mem {
    int id;
    bool store;
    std::vector<char> addrs;
  };
  const int n = static_cast<int>(profile.size());
  std::vector<std::vector<Mem>> mems(n);
  std::vector<std::vector<std::pair<int, int>>> cand(n);  // indices into mems[j]
  for (int j = 0; j < n; ++j) {
    const Thread& th = p.thread(profile[j]);
    std::vector<std::vector<char>> reach(th.states.size(), std::vector<char>(th.states.size(), 0));
    for (std::size_t q = 0; q < th.states.size(); ++q) {
      std::vector<int> stack{static_cast<int>(q)};
      reach[q][q] = 1;
      while (!stack.empty()) {
        int x = stack.back();
        stack.pop_back();
        for (int i : th.outgoing(x))
          if (!reach[q][th.instructions[i].dst]) {
            reach[q][th.instructions[i].dst] = 1;
            stack.push_back(th.instructions[i].dst);
          }
      }
    }
    for (const auto& in : th.instructions)
      if (in.cmd.is_memory() && reach[th.initial][in.src])
        mems[j].push_back({in.id, in.cmd.kind == Command::Kind::Store, possible_addresses(p, in.cmd)});
    for (int x = 0; x < static_cast<int>(mems[j].size()); ++x)
      for (int y = 0; y < static_cast<int>(mems[j].size()); ++y)
        if ((x == y && n > 1) || reach[th.instructions[mems[j][x].id].dst][th.instructions[mems[j][y].id].src])
          cand[j].push_back({x, y});
  }
  auto hop = [&](int j, int l, int k, int e) {
    const Mem& from = mems[j][l];
    const Mem& to = mems[k][e];
    if (!from.store && !to.store) return false;
    for (std::size_t a = 0; a < from.addrs.size(); ++a)
      if (from.addrs[a] && to.addrs[a]) return true;
    return false;
  };
  std::vector<std::vector<char>> keep(n);
  for (int j = 0; j < n; ++j) keep[j].assign(cand[j].size(), 0);
  // Fix the pair at position 0, then intersect what is reachable forward with what closes the cycle.
  for (std::size_t c0 = 0; c0 < cand[0].size(); ++c0) {
    std::vector<std::vector<char>> fw(n), bw(n);
    for (int j = 0; j < n; ++j) {
      fw[j].assign(cand[j].size(), 0);
      bw[j].assign(cand[j].size(), 0);
    }
    fw[0][c0] = 1;
    for (int j = 1; j < n; ++j)
      for (std::size_t c = 0; c < cand[j].size(); ++c)
        for (std::size_t d = 0; d < cand[j - 1].size() && !fw[j][c]; ++d)
          if (fw[j - 1][d] && hop(j - 1, cand[j - 1][d].second, j, cand[j][c].first)) fw[j][c] = 1;
    for (std::size_t c = 0; c < cand[n - 1].size(); ++c)
      bw[n - 1][c] = (n > 1 || c == c0) && hop(n - 1, cand[n - 1][c].second, 0, cand[0][c0].first);
    for (int j = n - 2; j >= 0; --j)
      for (std::size_t c = 0; c < cand[j].size(); ++c) {
        if (j == 0 && c != c0) continue;
        for (std::size_t d = 0; d < cand[j + 1].size() && !bw[j][c]; ++d)
          if (bw[j + 1][d] && hop(j, cand[j][c].second, j + 1, cand[j + 1][d].first)) bw[j][c] = 1;
      }
    if (!bw[0][c0]) continue;
    for (int j = 0; j < n; ++j)
      for (std::size_t c = 0; c < cand[j].size(); ++c)
        if (fw[j][c] && bw[j][c]) keep[j][c] = 1;
  }
  MarkPairs out(n);
  for (int j = 0; j < n; ++j)
    for (std::size_t c = 0; c < cand[j].size(); ++c)
      if (keep[j][c]) out[j].push_back({mems[j][cand[j][c].first].id, mems[j][cand[j][c].second].id});
  return out;
}

inline bool profile_feasible(const Program& p, const std::vector<int>& profile) {
  auto m = mark_pairs(p, profile);
  return std::none_of(m.begin(), m.end(), [](const auto& v) { return v.empty(); });
}

inline std::vector<std::vector<int>> enumerate_profiles(const Program& p) { return all_profiles(p.num_threads()); }

inline std::vector<Nfa<MarkedEvent>> hop_nfas(const std::vector<int>& profile) {
  std::vector<Nfa<MarkedEvent>> out;
  for (std::size_t j = 0; j < profile.size(); ++j) out.push_back(hop_nfa(profile[j], profile[(j + 1) % profile.size()]));
  return out;
}

inline auto build_profile_automaton(const Program& p, const std::vector<int>& profile, int heads = 0) {
  return intersect_commutative(build_mh_marked(p, profile, heads, mark_pairs(p, profile)), hop_nfas(profile));
}

using ProfileAutomaton = decltype(build_profile_automaton(std::declval<const Program&>(), {}));

enum class Verdict { Robust, NonRobust, Inconclusive };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Robust: return "robust";
    case Verdict::NonRobust: return "non_robust";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct ProfileStats {
  std::vector<int> profile;
  std::string outcome;  // "empty", "infeasible", "rotation", "nonempty", "budget", "cancelled", "skipped", "error"
  std::size_t states = 0;
  std::size_t transitions = 0;
  double ms = 0;
};

struct CheckOptions {
  std::size_t budget = 4'000'000;  // states per profile; 0 = unlimited
  int jobs = 1;
  int heads = 0;  // 0 = required_heads
  // Before the full round, search with fewer heads under this per-profile budget. Fewer heads
  // generate fewer computations, so a violation found there is real; only emptiness needs all.
  bool deepen = true;
  std::size_t probe_budget = 50'000;
  std::optional<std::vector<int>> profile;
};

struct RobustnessResult {
  Verdict verdict = Verdict::Robust;
  std::vector<int> profile;             // of the witness
  std::vector<MarkedEvent> marked;      // witness word of the marked automaton
  std::vector<int> cuts;
  std::optional<Computation> witness;   // reconstructed full computation
  std::optional<HbCycle> cycle;
  std::optional<BeautifulCycle> beautiful;
  std::vector<ProfileStats> stats;
  int heads = 0;                // of the round that decided
  std::size_t probe_states = 0;  // spent in rounds with fewer heads
  std::string note;
  std::size_t total_states() const {
    std::size_t n = 0;
    for (const auto& s : stats) n += s.states;
    return n;
  }
};

// Rebuilds a full computation from a run of the marked automaton: the transition annotations
// give each generated instruction and the parts of its load and commit, the written
// propagations give the rest; coherence keys are then searched by replay. Returns nullopt if
// no key assignment replays within `node_budget` steps.
template <class Steps>
std::optional<Computation> reconstruct_computation(const Program& p, int heads, const Steps& steps,
                                                   std::size_t node_budget = 200000) {
  std::vector<Computation> parts(heads);
  std::vector<int> count(p.num_threads() + 1, 0);
  int store_tid = 0, store_idx = 0;
  for (const auto& st : steps) {
    if (auto info = decode_step_info(st.info)) {
      int t = info->tid;
      int idx = ++count[t];
      const Command& c = p.instr(t, info->instr).cmd;
      parts[0].push_back(Event::fetch(t, info->instr));
      int addr = -1;
      for (const auto& [h, e] : st.labels) addr = e.addr;
      switch (c.kind) {
        case Command::Kind::Load:
          if (addr < 0) return std::nullopt;
          parts[info->h2 - 1].push_back(Event::load(t, idx, addr));
          parts[info->h3 - 1].push_back(Event::commit(t, idx));
          break;
        case Command::Kind::Store:
          if (addr < 0) return std::nullopt;
          parts[info->h3 - 1].push_back(Event::store_commit(t, idx, Rational(0), addr));
          parts[info->h3 - 1].push_back(Event::prop(t, t, idx, addr));
          store_tid = t;
          store_idx = idx;
          break;
        default: parts[info->h3 - 1].push_back(Event::commit(t, idx)); break;
      }
    } else {
      for (const auto& [h, e] : st.labels)
        if (e.kind == Event::Kind::Prop) parts[h - 1].push_back(Event::prop(e.tid, store_tid, store_idx, e.addr));
    }
  }
  Computation skel;
  for (const auto& part : parts) skel.insert(skel.end(), part.begin(), part.end());
  Power pw(p);
  Computation out;
  std::size_t nodes = 0;
  auto rec = [&](auto&& self, const PowerState& s, std::size_t i) -> bool {
    if (++nodes > node_budget) return false;
    if (i == skel.size()) return pw.is_final(s);
    Event e = skel[i];
    std::vector<Event> options;
    if (e.kind == Event::Kind::StoreCommit) {
      for (const auto& k : pw.key_candidates(s, e.tid, e.addr)) {
        e.key = k;
        options.push_back(e);
      }
    } else {
      options.push_back(e);
    }
    for (const auto& o : options) {
      auto n = pw.try_step(s, o);
      if (!n) continue;
      out.push_back(o);
      if (self(self, *n, i + 1)) return true;
      out.pop_back();
    }
    return false;
  };
  if (!rec(rec, pw.initial_state(), 0)) return std::nullopt;
  return out;
}

namespace detail {

struct Round {
  std::vector<ProfileStats> stats;
  std::optional<std::size_t> index;  // first nonempty profile
  std::optional<Run<ProfileAutomaton>> run;
  bool inconclusive = false;
};

inline Round check_round(const Program& p, const std::vector<std::vector<int>>& profiles, int heads,
                         std::size_t budget, int jobs, bool rotations) {
  Round out;
  out.stats.resize(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    out.stats[i].profile = profiles[i];
    out.stats[i].outcome = "skipped";
  }
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> found{profiles.size()};
  std::mutex mu;

  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= profiles.size() || i > found.load()) return;
      auto t0 = std::chrono::steady_clock::now();
      ProfileStats st;
      st.profile = profiles[i];
      std::optional<Run<ProfileAutomaton>> run;
      bool exhausted = false;
      if (!rotations && !leads_rotation(profiles[i])) {
        st.outcome = "rotation";
      } else if (!profile_feasible(p, profiles[i])) {
        st.outcome = "infeasible";
      } else try {
        auto w = build_profile_automaton(p, profiles[i], heads);
        auto r = is_empty(w, budget, [&] { return found.load() < i; });
        st.states = r.states;
        st.transitions = r.transitions;
        st.outcome = r.cancelled ? "cancelled" : r.empty ? "empty" : "nonempty";
        if (!r.empty) run = std::move(r.witness);
      } catch (const BudgetExceeded& e) {
        st.states = e.states();
        st.outcome = "budget";
        exhausted = true;
      } catch (const std::length_error&) {
        st.outcome = "error";
        exhausted = true;
      }
      st.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard<std::mutex> lock(mu);
      out.stats[i] = st;
      if (exhausted) out.inconclusive = true;
      if (run && (!out.index || i < *out.index)) {
        out.index = i;
        out.run = std::move(run);
        std::size_t cur = found.load();
        while (i < cur && !found.compare_exchange_weak(cur, i)) {
        }
      }
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace detail

inline RobustnessResult check_robustness(const Program& p, const CheckOptions& opt = {}) {
  RobustnessResult res;
  std::vector<std::vector<int>> profiles = opt.profile ? std::vector<std::vector<int>>{*opt.profile} : enumerate_profiles(p);
  const int heads = opt.heads > 0 ? opt.heads : required_heads(p);
  detail::Round round;
  int h = opt.deepen ? 1 : heads;
  for (;; ++h) {
    bool last = h >= heads;
    std::size_t budget = last ? opt.budget : opt.probe_budget;
    if (!last && opt.budget) budget = std::min(budget, opt.budget);
    round = detail::check_round(p, profiles, h, budget, opt.jobs, opt.profile.has_value());
    if (round.run || last) break;
    for (const auto& st : round.stats) res.probe_states += st.states;
  }
  res.heads = h;
  res.stats = std::move(round.stats);

  if (round.run) {
    res.verdict = Verdict::NonRobust;
    res.profile = profiles[*round.index];
    res.marked = round.run->word;
    res.cuts = round.run->cuts;
    res.witness = reconstruct_computation(p, h, round.run->steps);
    if (res.witness) {
      Trace tr = trace_of(p, *res.witness);
      res.cycle = find_hb_cycle(tr);
      res.beautiful = find_beautiful_cycle(tr, res.profile);
    } else {
      res.note = "witness reconstruction failed; reporting the marked word only";
    }
  } else if (round.inconclusive) {
    res.verdict = Verdict::Inconclusive;
    res.note = "state budget exhausted";
  }
  return res;
}

// Compares the decision procedure with the bounded oracle.
struct CrossCheck {
  Verdict decided;
  OracleVerdict oracle;
  bool agree;
};

inline CrossCheck cross_validate(const Program& p, const CheckOptions& opt = {}) {
  auto r = check_robustness(p, opt);
  auto o = oracle_check(p, default_bounds(p));
  bool agree = (r.verdict == Verdict::Robust && o.verdict == OracleVerdict::Robust) ||
               (r.verdict == Verdict::NonRobust && o.verdict == OracleVerdict::NonRobust);
  return {r.verdict, o.verdict, agree};
}

}  // namespace powrob
