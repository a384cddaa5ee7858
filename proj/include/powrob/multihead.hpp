#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nfa.hpp"

namespace powrob {

inline std::size_t hash_mix(std::size_t h, std::size_t x) {
  return h ^ (x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

// An n-headed automaton: each transition writes a (possibly empty) sequence of symbols, each
// onto one of the heads 1..n. The word of a run is the concatenation of the heads' words.
template <class State, class Symbol, class Hash = std::hash<State>>
struct MultiheadedAutomaton {
  using state_type = State;
  using symbol_type = Symbol;
  using hash_type = Hash;
  using Label = std::pair<int, Symbol>;
  struct Step {
    std::vector<Label> labels;
    State next;
    int info = -1;  // automaton-specific annotation, carried into runs
  };
  // Lookahead for membership: the split word and the current position on each head.
  struct Guide {
    const std::vector<std::vector<Symbol>>* parts = nullptr;
    std::vector<int> pos;
  };

  int heads = 1;
  State initial{};
  std::function<std::vector<Step>(const State&)> successors;
  std::function<bool(const State&)> is_final;
  // Optional: successors restricted to those compatible with the lookahead.
  std::function<std::vector<Step>(const State&, const Guide&)> guided;
};

template <class Symbol>
std::vector<Symbol> word_of_labels(int heads, const std::vector<std::pair<int, Symbol>>& labels,
                                   std::vector<int>* cuts = nullptr) {
  std::vector<std::vector<Symbol>> parts(heads);
  for (const auto& [h, x] : labels) parts.at(h - 1).push_back(x);
  std::vector<Symbol> w;
  for (int h = 0; h < heads; ++h) {
    if (cuts && h > 0) cuts->push_back(static_cast<int>(w.size()));
    w.insert(w.end(), parts[h].begin(), parts[h].end());
  }
  return w;
}

class BudgetExceeded : public std::runtime_error {
public:
  explicit BudgetExceeded(std::size_t states)
      : std::runtime_error("state budget exceeded after " + std::to_string(states) + " states"), states_(states) {}
  std::size_t states() const { return states_; }

private:
  std::size_t states_;
};

template <class M>
struct Run {
  std::vector<typename M::Step> steps;
  std::vector<typename M::symbol_type> word;
  std::vector<int> cuts;  // head boundaries in word
};

template <class M>
struct EmptinessResult {
  bool empty = true;
  std::optional<Run<M>> witness;
  bool cancelled = false;
  std::size_t states = 0;
  std::size_t transitions = 0;
};

// Depth-first search of the reachable states. Throws BudgetExceeded once more than `budget`
// states have been stored (0 = unlimited). `stop` is polled for cancellation.
template <class M>
EmptinessResult<M> is_empty(const M& m, std::size_t budget = 0, const std::function<bool()>& stop = {}) {
  using State = typename M::state_type;
  struct Node {
    const State* parent = nullptr;
    int choice = -1;
  };
  std::unordered_map<State, Node, typename M::hash_type> seen;
  std::vector<const State*> stack;
  EmptinessResult<M> res;
  auto [it0, _] = seen.emplace(m.initial, Node{});
  stack.push_back(&it0->first);
  const State* hit = nullptr;
  while (!stack.empty()) {
    const State* s = stack.back();
    stack.pop_back();
    if (m.is_final(*s)) {
      hit = s;
      break;
    }
    if (stop && stop()) {
      res.cancelled = true;
      break;
    }
    auto steps = m.successors(*s);
    for (int k = 0; k < static_cast<int>(steps.size()); ++k) {
      ++res.transitions;
      auto [it, fresh] = seen.emplace(std::move(steps[k].next), Node{s, k});
      if (!fresh) continue;
      if (budget && seen.size() > budget) throw BudgetExceeded(seen.size());
      stack.push_back(&it->first);
    }
  }
  res.states = seen.size();
  if (!hit) return res;
  res.empty = false;
  std::vector<std::pair<const State*, int>> back;
  for (const State* s = hit; seen.at(*s).parent; s = seen.at(*s).parent) back.push_back({seen.at(*s).parent, seen.at(*s).choice});
  Run<M> run;
  std::vector<typename M::Label> labels;
  for (auto it = back.rbegin(); it != back.rend(); ++it) {
    auto steps = m.successors(*it->first);
    run.steps.push_back(steps.at(it->second));
    labels.insert(labels.end(), run.steps.back().labels.begin(), run.steps.back().labels.end());
  }
  run.word = word_of_labels(m.heads, labels, &run.cuts);
  res.witness = std::move(run);
  return res;
}

// All non-decreasing cut vectors of length heads-1 over a word of length len.
inline void for_each_split(int len, int heads, const std::function<bool(const std::vector<int>&)>& f) {
  std::vector<int> cuts(std::max(heads - 1, 0), 0);
  auto rec = [&](auto&& self, int k, int lo) -> bool {
    if (k == static_cast<int>(cuts.size())) return f(cuts);
    for (int c = lo; c <= len; ++c) {
      cuts[k] = c;
      if (!self(self, k + 1, c)) return false;
    }
    return true;
  };
  rec(rec, 0, 0);
}

template <class Symbol>
std::vector<std::vector<Symbol>> split_word(const std::vector<Symbol>& w, const std::vector<int>& cuts) {
  std::vector<std::vector<Symbol>> parts;
  int from = 0;
  for (std::size_t k = 0; k <= cuts.size(); ++k) {
    int to = k < cuts.size() ? cuts[k] : static_cast<int>(w.size());
    parts.emplace_back(w.begin() + from, w.begin() + to);
    from = to;
  }
  return parts;
}

// Is there an accepting run whose head words are exactly the parts of w under `cuts`?
template <class M>
bool accepts_split(const M& m, const std::vector<typename M::symbol_type>& w, const std::vector<int>& cuts,
                   std::size_t budget = 0) {
  using State = typename M::state_type;
  auto parts = split_word(w, cuts);
  struct Key {
    State s;
    std::vector<int> pos;
    bool operator==(const Key& o) const { return pos == o.pos && s == o.s; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = typename M::hash_type{}(k.s);
      for (int p : k.pos) h = hash_mix(h, static_cast<std::size_t>(p));
      return h;
    }
  };
  std::unordered_set<Key, KeyHash> seen;
  std::vector<Key> stack{{m.initial, std::vector<int>(m.heads, 0)}};
  seen.insert(stack.back());
  while (!stack.empty()) {
    Key k = std::move(stack.back());
    stack.pop_back();
    bool done = true;
    for (int h = 0; h < m.heads; ++h) done = done && k.pos[h] == static_cast<int>(parts[h].size());
    if (done && m.is_final(k.s)) return true;
    std::vector<typename M::Step> steps;
    if (m.guided) {
      typename M::Guide g{&parts, k.pos};
      steps = m.guided(k.s, g);
    } else {
      steps = m.successors(k.s);
    }
    for (auto& st : steps) {
      std::vector<int> pos = k.pos;
      bool ok = true;
      for (const auto& [h, x] : st.labels) {
        auto& part = parts[h - 1];
        if (pos[h - 1] >= static_cast<int>(part.size()) || !(part[pos[h - 1]] == x)) {
          ok = false;
          break;
        }
        ++pos[h - 1];
      }
      if (!ok) continue;
      Key nk{std::move(st.next), std::move(pos)};
      if (seen.insert(nk).second) {
        if (budget && seen.size() > budget) throw BudgetExceeded(seen.size());
        stack.push_back(std::move(nk));
      }
    }
  }
  return false;
}

// Membership: tries `hint` first, then (if exhaustive) every split of w into heads parts.
template <class M>
bool mh_language_contains(const M& m, const std::vector<typename M::symbol_type>& w,
                          const std::optional<std::vector<int>>& hint = {}, bool exhaustive = true,
                          std::size_t budget = 0) {
  if (hint && accepts_split(m, w, *hint, budget)) return true;
  if (!exhaustive) return false;
  bool found = false;
  for_each_split(static_cast<int>(w.size()), m.heads, [&](const std::vector<int>& cuts) {
    if (hint && cuts == *hint) return true;
    found = accepts_split(m, w, cuts, budget);
    return !found;
  });
  return found;
}

// Words of accepting runs emitting at most max_len symbols (brute force, for small automata).
// Requires ordered State and Symbol.
template <class M>
std::set<std::vector<typename M::symbol_type>> enumerate_language(const M& m, int max_len) {
  using State = typename M::state_type;
  using Symbol = typename M::symbol_type;
  using Parts = std::vector<std::vector<Symbol>>;
  std::set<std::pair<State, Parts>> seen;
  std::vector<std::pair<State, Parts>> stack;
  std::set<std::vector<Symbol>> out;
  stack.push_back({m.initial, Parts(m.heads)});
  seen.insert(stack.back());
  while (!stack.empty()) {
    auto [s, parts] = stack.back();
    stack.pop_back();
    int len = 0;
    for (const auto& p : parts) len += static_cast<int>(p.size());
    if (m.is_final(s)) {
      std::vector<Symbol> w;
      for (const auto& p : parts) w.insert(w.end(), p.begin(), p.end());
      out.insert(w);
    }
    for (auto& st : m.successors(s)) {
      if (len + static_cast<int>(st.labels.size()) > max_len) continue;
      Parts np = parts;
      for (const auto& [h, x] : st.labels) np[h - 1].push_back(x);
      std::pair<State, Parts> node{std::move(st.next), std::move(np)};
      if (seen.insert(node).second) stack.push_back(std::move(node));
    }
  }
  return out;
}

// Random accepted runs by randomized depth-first search: successors are tried in random order,
// a final state ends the run with probability 1 / (1 + number of successors) or once all its
// continuations fail. States proven unable to reach a final state
// are remembered; an attempt gives up after `attempt_budget` visited states.
template <class M>
std::vector<Run<M>> sample_runs(const M& m, std::size_t count, std::uint64_t seed, std::size_t max_attempts = 0,
                                std::size_t attempt_budget = 2000) {
  using State = typename M::state_type;
  std::unordered_set<State, typename M::hash_type> dead;
  std::mt19937_64 rng(seed);
  std::vector<Run<M>> out;
  if (!max_attempts) max_attempts = count * 20;
  std::vector<typename M::Step> path;
  std::size_t visited = 0;
  // 1 = reached a final state, 0 = proven dead, -1 = budget exhausted
  auto walk = [&](auto&& self, const State& s) -> int {
    if (++visited > attempt_budget) return -1;
    auto steps = m.successors(s);
    std::shuffle(steps.begin(), steps.end(), rng);
    bool fin = m.is_final(s);
    if (fin && std::uniform_int_distribution<std::size_t>(0, steps.size())(rng) == 0) return 1;
    for (auto& st : steps) {
      if (dead.count(st.next)) continue;
      path.push_back(st);
      int r = self(self, st.next);
      if (r != 0) return r;
      path.pop_back();
    }
    if (fin) return 1;
    dead.insert(s);
    return 0;
  };
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < count; ++attempt) {
    path.clear();
    visited = 0;
    int r = walk(walk, m.initial);
    if (r == 0) break;
    if (r < 0) continue;
    Run<M> run;
    std::vector<typename M::Label> labels;
    for (const auto& st : path) labels.insert(labels.end(), st.labels.begin(), st.labels.end());
    run.steps = path;
    run.word = word_of_labels(m.heads, labels, &run.cuts);
    out.push_back(std::move(run));
  }
  return out;
}

// Splits every transition into single-symbol transitions; states carry the unwritten suffix.
template <class M>
auto split_transitions(const M& m) {
  using State = typename M::state_type;
  using Symbol = typename M::symbol_type;
  using Label = typename M::Label;
  using S2 = std::pair<State, std::vector<Label>>;
  struct H {
    std::size_t operator()(const S2& s) const {
      std::size_t h = typename M::hash_type{}(s.first);
      return hash_mix(h, s.second.size());
    }
  };
  MultiheadedAutomaton<S2, Symbol, H> r;
  r.heads = m.heads;
  r.initial = {m.initial, {}};
  r.successors = [m](const S2& s) {
    std::vector<typename MultiheadedAutomaton<S2, Symbol, H>::Step> out;
    if (!s.second.empty()) {
      std::vector<Label> rest(s.second.begin() + 1, s.second.end());
      out.push_back({{s.second.front()}, {s.first, std::move(rest)}, -1});
      return out;
    }
    for (auto& st : m.successors(s.first)) {
      if (st.labels.empty()) {
        out.push_back({{}, {std::move(st.next), {}}, st.info});
        continue;
      }
      std::vector<Label> rest(st.labels.begin() + 1, st.labels.end());
      out.push_back({{st.labels.front()}, {std::move(st.next), std::move(rest)}, st.info});
    }
    return out;
  };
  r.is_final = [m](const S2& s) { return s.second.empty() && m.is_final(s.first); };
  return r;
}

// Product with regular languages: the result accepts L(m) ∩ L(V1) ∩ ... ∩ L(Vk).
// Each component guesses, for every head, the state in which V starts reading that head's
// word and checks at the end that head h ends where head h+1 starts.
template <class State>
struct ProductState {
  bool init = true;
  State u{};
  std::vector<int> start, cur;  // [component * heads + head]
  bool operator==(const ProductState& o) const { return init == o.init && start == o.start && cur == o.cur && u == o.u; }
  bool operator<(const ProductState& o) const {
    return std::tie(init, u, start, cur) < std::tie(o.init, o.u, o.start, o.cur);
  }
};

template <class State, class Hash>
struct ProductHash {
  std::size_t operator()(const ProductState<State>& s) const {
    std::size_t h = s.init ? 1 : Hash{}(s.u);
    for (int x : s.start) h = hash_mix(h, static_cast<std::size_t>(x));
    for (int x : s.cur) h = hash_mix(h, static_cast<std::size_t>(x) + 77);
    return h;
  }
};

template <class M>
auto intersect_regular(const M& m, const std::vector<Nfa<typename M::symbol_type>>& vs) {
  using State = typename M::state_type;
  using Symbol = typename M::symbol_type;
  using PS = ProductState<State>;
  using R = MultiheadedAutomaton<PS, Symbol, ProductHash<State, typename M::hash_type>>;
  R r;
  r.heads = m.heads;
  r.initial = PS{true, m.initial, {}, {}};
  const int n = m.heads;
  r.successors = [m, vs, n](const PS& s) {
    std::vector<typename R::Step> out;
    if (s.init) {
      // guess start states for heads 2..n of every component
      std::vector<int> start;
      auto rec = [&](auto&& self, std::size_t k) -> void {
        if (k == vs.size() * n) {
          out.push_back({{}, PS{false, s.u, start, start}, -1});
          return;
        }
        const auto& v = vs[k / n];
        if (k % n == 0) {
          start.push_back(v.initial());
          self(self, k + 1);
          start.pop_back();
          return;
        }
        for (int q = 0; q < v.size(); ++q) {
          start.push_back(q);
          self(self, k + 1);
          start.pop_back();
        }
      };
      rec(rec, 0);
      return out;
    }
    for (auto& st : m.successors(s.u)) {
      std::vector<PS> acc{PS{false, st.next, s.start, s.cur}};
      for (const auto& [h, x] : st.labels) {
        std::vector<PS> next;
        for (const auto& ps : acc) {
          std::vector<std::vector<int>> choices(vs.size());
          bool dead = false;
          for (std::size_t c = 0; c < vs.size() && !dead; ++c) {
            choices[c] = vs[c].step(ps.cur[c * n + h - 1], x);
            dead = choices[c].empty();
          }
          if (dead) continue;
          std::vector<int> cur = ps.cur;
          auto rec = [&](auto&& self, std::size_t c) -> void {
            if (c == vs.size()) {
              next.push_back(PS{false, ps.u, ps.start, cur});
              return;
            }
            for (int q : choices[c]) {
              cur[c * n + h - 1] = q;
              self(self, c + 1);
            }
          };
          rec(rec, 0);
        }
        acc = std::move(next);
      }
      for (auto& ps : acc) out.push_back({st.labels, std::move(ps), st.info});
    }
    return out;
  };
  r.is_final = [m, vs, n](const PS& s) {
    if (s.init || !m.is_final(s.u)) return false;
    for (std::size_t c = 0; c < vs.size(); ++c) {
      for (int h = 0; h + 1 < n; ++h) {
        auto cl = vs[c].closure({s.cur[c * n + h]});
        if (!std::binary_search(cl.begin(), cl.end(), s.start[c * n + h + 1])) return false;
      }
      if (!vs[c].accepting(s.cur[c * n + n - 1])) return false;
    }
    return true;
  };
  return r;
}

template <class M>
auto intersect_regular(const M& m, const Nfa<typename M::symbol_type>& v) {
  return intersect_regular(m, std::vector<Nfa<typename M::symbol_type>>{v});
}

// Product with commutative regular languages: symbols are fed to the NFAs in the order the
// automaton writes them, which is sound only because the NFAs ignore order. Steps into NFA
// states that cannot reach acceptance are pruned. String states are extended in place with
// one byte per NFA (NFAs must then have at most 256 states).
template <class M>
auto intersect_commutative(const M& m, const std::vector<Nfa<typename M::symbol_type>>& vs) {
  using State = typename M::state_type;
  using Symbol = typename M::symbol_type;
  constexpr bool packed = std::is_same_v<State, std::string>;
  using PS = std::conditional_t<packed, std::string, ProductState<State>>;
  using PH = std::conditional_t<packed, typename M::hash_type, ProductHash<State, typename M::hash_type>>;
  using R = MultiheadedAutomaton<PS, Symbol, PH>;
  for (const auto& v : vs) {
    if (!v.commutative) throw std::invalid_argument("intersect_commutative needs commutative languages");
    if (packed && v.size() > 256) throw std::invalid_argument("NFA too large for packed product");
  }
  std::vector<std::vector<char>> productive;
  for (const auto& v : vs) productive.push_back(v.productive());
  const std::size_t k = vs.size();
  auto unpack = [k](const PS& s) -> std::pair<State, std::vector<int>> {
    if constexpr (packed) {
      std::vector<int> cur;
      for (std::size_t c = 0; c < k; ++c) cur.push_back(static_cast<unsigned char>(s[s.size() - k + c]));
      return {s.substr(0, s.size() - k), cur};
    } else {
      return {s.u, s.cur};
    }
  };
  auto pack = [](State u, const std::vector<int>& cur) -> PS {
    if constexpr (packed) {
      for (int q : cur) u.push_back(static_cast<char>(q));
      return u;
    } else {
      return PS{false, std::move(u), {}, cur};
    }
  };
  R r;
  r.heads = m.heads;
  std::vector<int> init;
  for (const auto& v : vs) init.push_back(v.initial());
  r.initial = pack(m.initial, init);
  r.successors = [m, vs, productive, unpack, pack](const PS& ps) {
    auto [u, cur0] = unpack(ps);
    std::vector<typename R::Step> out;
    for (auto& st : m.successors(u)) {
      std::vector<std::vector<int>> acc{cur0};
      for (const auto& lab : st.labels) {
        std::vector<std::vector<int>> next;
        for (const auto& cur : acc) {
          std::vector<std::vector<int>> choices(vs.size());
          bool dead = false;
          for (std::size_t c = 0; c < vs.size() && !dead; ++c) {
            for (int q : vs[c].step(cur[c], lab.second))
              if (productive[c][q]) choices[c].push_back(q);
            dead = choices[c].empty();
          }
          if (dead) continue;
          std::vector<int> nc = cur;
          auto rec = [&](auto&& self, std::size_t c) -> void {
            if (c == vs.size()) {
              next.push_back(nc);
              return;
            }
            for (int q : choices[c]) {
              nc[c] = q;
              self(self, c + 1);
            }
          };
          rec(rec, 0);
        }
        acc = std::move(next);
      }
      for (const auto& cur : acc) out.push_back({st.labels, pack(st.next, cur), st.info});
    }
    return out;
  };
  r.is_final = [m, vs, unpack](const PS& ps) {
    auto [u, cur] = unpack(ps);
    if (!m.is_final(u)) return false;
    for (std::size_t c = 0; c < vs.size(); ++c)
      if (!vs[c].accepting(cur[c])) return false;
    return true;
  };
  return r;
}

}  // namespace powrob
