#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "power.hpp"

namespace powrob {

struct Bounds {
  int max_fetch = 0;  // per thread
};

// Rewrites store keys to rank*|A| + addr (rank 1-based within the address); keeps order per address.
inline PowerState canonicalize(const Power& pw, const PowerState& s) {
  const int na = pw.program().domain.size;
  std::vector<std::vector<Rational>> per(na);
  for (int t = 1; t <= static_cast<int>(s.threads.size()); ++t) {
    const auto& th = s.threads[t - 1];
    for (int i = 1; i <= th.size(); ++i)
      if (th.key[i - 1]) per[pw.getaddr(s, t, i)].push_back(*th.key[i - 1]);
  }
  for (auto& v : per) std::sort(v.begin(), v.end());
  PowerState n = s;
  for (int t = 1; t <= static_cast<int>(s.threads.size()); ++t) {
    auto& th = n.threads[t - 1];
    for (int i = 1; i <= th.size(); ++i)
      if (th.key[i - 1]) {
        int a = pw.getaddr(s, t, i);
        auto rank = std::lower_bound(per[a].begin(), per[a].end(), *th.key[i - 1]) - per[a].begin() + 1;
        th.key[i - 1] = Rational(static_cast<std::int64_t>(rank) * na + a);
      }
  }
  return n;
}

inline std::string encode_state(const PowerState& s) {
  std::string out;
  auto put = [&](std::int64_t x) {
    out += std::to_string(x);
    out += ',';
  };
  for (const auto& th : s.threads) {
    put(th.size());
    for (int i = 0; i < th.size(); ++i) {
      put(th.fetched[i]);
      put(th.committed[i]);
      put(th.loaded[i] ? th.loaded[i]->tid : -1);
      put(th.loaded[i] ? th.loaded[i]->index : -1);
      put(th.key[i] ? th.key[i]->num() : -1);
    }
    out += '|';
  }
  for (const auto& row : s.propagated)
    for (const auto& r : row) {
      put(r.tid);
      put(r.index);
    }
  put(s.pending ? s.pending->first : 0);
  put(s.pending ? s.pending->second : 0);
  return out;
}

inline bool fetch_allowed(const PowerState& s, const Event& e, const Bounds& b) {
  return e.kind != Event::Kind::Fetch || s.threads[e.tid - 1].size() < b.max_fetch;
}

// Visits every accepted computation within the bounds; the callback returns false to stop.
inline void enumerate_computations(const Program& p, const Bounds& b,
                                   const std::function<bool(const Computation&, const PowerState&)>& visit) {
  Power pw(p);
  Computation cur;
  bool stop = false;
  auto rec = [&](auto&& self, const PowerState& s) -> void {
    if (pw.is_final(s) && !visit(cur, s)) {
      stop = true;
      return;
    }
    for (auto& [e, n] : pw.enabled(s)) {
      if (!fetch_allowed(s, e, b)) continue;
      cur.push_back(e);
      self(self, n);
      cur.pop_back();
      if (stop) return;
    }
  };
  rec(rec, pw.initial_state());
}

// Number of accepted computations within the bounds (path count over the state graph).
inline unsigned __int128 count_computations(const Program& p, const Bounds& b) {
  Power pw(p);
  std::unordered_map<std::string, unsigned __int128> memo;
  auto rec = [&](auto&& self, const PowerState& s) -> unsigned __int128 {
    std::string key = encode_state(s);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    unsigned __int128 n = pw.is_final(s) ? 1 : 0;
    for (auto& [e, next] : pw.enabled(s))
      if (fetch_allowed(s, e, b)) n += self(self, canonicalize(pw, next));
    memo.emplace(std::move(key), n);
    return n;
  };
  return rec(rec, pw.initial_state());
}

inline std::string to_string_u128(unsigned __int128 x) {
  if (x == 0) return "0";
  std::string s;
  while (x > 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(x % 10)));
    x /= 10;
  }
  return s;
}

// Per-thread register valuations.
using Outcome = std::vector<std::vector<Value>>;

// Final register valuations of accepted computations in which every thread ran to a control
// state without outgoing instructions.
inline std::set<Outcome> outcomes(const Program& p, const Bounds& b) {
  Power pw(p);
  std::set<Outcome> out;
  std::unordered_map<std::string, char> seen;
  auto rec = [&](auto&& self, const PowerState& s) -> void {
    if (!seen.emplace(encode_state(s), 1).second) return;
    if (pw.is_final(s)) {
      bool done = true;
      for (int t = 1; t <= p.num_threads(); ++t)
        if (!p.thread(t).outgoing(pw.control(s, t)).empty()) done = false;
      if (done) {
        Outcome o;
        for (int t = 1; t <= p.num_threads(); ++t) o.push_back(pw.registers(s, t));
        out.insert(o);
      }
    }
    for (auto& [e, next] : pw.enabled(s))
      if (fetch_allowed(s, e, b)) self(self, canonicalize(pw, next));
  };
  rec(rec, pw.initial_state());
  return out;
}

inline std::string format_outcome(const Program& p, const Outcome& o) {
  std::string out;
  for (int t = 1; t <= p.num_threads(); ++t) {
    const auto& regs = p.thread(t).registers;
    for (std::size_t r = 0; r < regs.size(); ++r) {
      if (!out.empty()) out += " ";
      out += std::to_string(t) + ":" + regs[r] + "=" + std::to_string(o[t - 1][r]);
    }
  }
  return out;
}

// Load classification ---------------------------------------------------

struct LoadClass {
  LoadRule rule = LoadRule::None;
  StoreRef store;
};

class ClassifyError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Decides from the event sequence alone how load (t,i) was satisfied.
inline LoadClass classify_load(const Computation& c, int t, int i) {
  int pos = -1, a = -1;
  for (std::size_t k = 0; k < c.size(); ++k)
    if (c[k].kind == Event::Kind::Load && c[k].tid == t && c[k].index == i) {
      pos = static_cast<int>(k);
      a = c[k].addr;
    }
  if (pos < 0) throw ClassifyError("load not found");
  auto own_commit = [&](const Event& e, int lo, int hi) {
    return e.kind == Event::Kind::StoreCommit && e.tid == t && e.addr == a && e.index >= lo && e.index <= hi;
  };
  std::optional<LoadClass> early, memory;
  for (std::size_t k = pos + 1; k < c.size() && !early; ++k) {
    if (!own_commit(c[k], 1, i - 1)) continue;
    int j = c[k].index;
    bool later = false;
    for (std::size_t m = k + 1; m < c.size(); ++m)
      if (own_commit(c[m], j + 1, i - 1)) later = true;
    if (!later) early = LoadClass{LoadRule::Early, StoreRef::of(t, j)};
  }
  StoreRef src = StoreRef::init(a);
  for (int k = 0; k < pos; ++k)
    if (c[k].kind == Event::Kind::Prop && c[k].tid == t && c[k].addr == a)
      src = StoreRef::of(c[k].store_tid, c[k].store_index);
  bool committed_after = false;
  for (std::size_t k = pos + 1; k < c.size(); ++k)
    if (own_commit(c[k], 1, i - 1)) committed_after = true;
  if (!committed_after) memory = LoadClass{LoadRule::Memory, src};
  if (early && memory) throw ClassifyError("load matches both characterizations");
  if (!early && !memory) throw ClassifyError("load matches neither characterization");
  return early ? *early : *memory;
}

// Normal form --------------------------------------------------------------

// Instruction (tid, fetch index) an event belongs to, for every event of c.
inline std::vector<std::pair<int, int>> event_owners(const Computation& c) {
  std::vector<std::pair<int, int>> out;
  std::map<int, int> fetched;
  for (const auto& e : c) {
    switch (e.kind) {
      case Event::Kind::Fetch: out.emplace_back(e.tid, ++fetched[e.tid]); break;
      case Event::Kind::Prop: out.emplace_back(e.store_tid, e.store_index); break;
      default: out.emplace_back(e.tid, e.index); break;
    }
  }
  return out;
}

inline bool is_normal_form(const Computation& c, const std::vector<int>& cuts) {
  int m = static_cast<int>(c.size());
  std::vector<int> bounds{0};
  for (int x : cuts) {
    if (x < bounds.back() || x > m) return false;
    bounds.push_back(x);
  }
  bounds.push_back(m);
  for (int k = bounds[1]; k < m; ++k)
    if (c[k].kind == Event::Kind::Fetch) return false;
  auto owner = event_owners(c);
  std::set<std::pair<std::pair<int, int>, std::pair<int, int>>> before;
  for (std::size_t part = 0; part + 1 < bounds.size(); ++part) {
    std::vector<std::pair<int, int>> blocks;
    for (int k = bounds[part]; k < bounds[part + 1]; ++k)
      if (blocks.empty() || blocks.back() != owner[k]) blocks.push_back(owner[k]);
    for (std::size_t x = 0; x < blocks.size(); ++x)
      for (std::size_t y = x + 1; y < blocks.size(); ++y) {
        if (blocks[x] == blocks[y]) return false;  // events of one instruction split within a part
        before.insert({blocks[x], blocks[y]});
      }
  }
  for (const auto& [x, y] : before)
    if (before.count({y, x})) return false;
  return true;
}

// Cut positions of a degree-n normal-form split, if one exists. Under NF-A every instruction
// has its fetch in part 1, so each part must list instruction blocks in fetch order; longest
// parts first is then optimal.
inline std::optional<std::vector<int>> find_normal_form_split(const Computation& c, int n) {
  int m = static_cast<int>(c.size());
  auto owner = event_owners(c);
  std::map<std::pair<int, int>, int> order;
  for (int k = 0; k < m; ++k)
    if (c[k].kind == Event::Kind::Fetch) order.emplace(owner[k], static_cast<int>(order.size()));
  int last_fetch = -1;
  for (int k = 0; k < m; ++k)
    if (c[k].kind == Event::Kind::Fetch) last_fetch = k;
  std::vector<int> cuts;
  int k = 0;
  while (k < m) {
    int start = k;
    std::set<std::pair<int, int>> closed;
    std::pair<int, int> cur{-1, -1};
    for (; k < m; ++k) {
      auto o = owner[k];
      if (!order.count(o)) return std::nullopt;
      if (o == cur) continue;
      if (closed.count(o) || (cur.first >= 0 && order[o] < order[cur])) break;
      if (cur.first >= 0) closed.insert(cur);
      cur = o;
    }
    if (start == 0 && k <= last_fetch) return std::nullopt;
    if (k < m) cuts.push_back(k);
  }
  if (static_cast<int>(cuts.size()) > n - 1) return std::nullopt;
  while (static_cast<int>(cuts.size()) < n - 1) cuts.push_back(m);
  return cuts;
}

}  // namespace powrob
