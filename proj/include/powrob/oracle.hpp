#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "enumerate.hpp"
#include "trace.hpp"

namespace powrob {

enum class OracleVerdict { Robust, NonRobust, Inconclusive };

inline const char* verdict_name(OracleVerdict v) {
  switch (v) {
    case OracleVerdict::Robust: return "robust";
    case OracleVerdict::NonRobust: return "non_robust";
    case OracleVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct OracleResult {
  OracleVerdict verdict = OracleVerdict::Inconclusive;
  Computation witness;
  std::optional<HbCycle> cycle;
  std::size_t states = 0;
  std::size_t final_states = 0;
};

// Every sequence of fetch events of thread t of length <= bound, prefixes included.
inline std::vector<std::vector<int>> fetch_paths(const Program& p, int t, int bound) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  const Thread& th = p.thread(t);
  auto rec = [&](auto&& self, int q) -> void {
    out.push_back(cur);
    if (static_cast<int>(cur.size()) == bound) return;
    for (int id : th.outgoing(q)) {
      cur.push_back(id);
      self(self, th.instructions[id].dst);
      cur.pop_back();
    }
  };
  rec(rec, th.initial);
  return out;
}

// Calls visit(final_state, computation) for every distinct final state of computations whose
// fetch events come first (any computation can be reordered that way with the same final
// state). Stops when visit returns false.
inline std::size_t explore_final_states(const Program& p, const Bounds& b,
                                        const std::function<bool(const PowerState&, const Computation&)>& visit,
                                        std::size_t* finals = nullptr) {
  Power pw(p);
  struct Info {
    std::string parent;
    int choice = -1;
    int root = -1;
  };
  std::unordered_map<std::string, Info> info;
  std::vector<Computation> roots;
  std::vector<std::vector<std::vector<int>>> paths;
  for (int t = 1; t <= p.num_threads(); ++t) paths.push_back(fetch_paths(p, t, b.max_fetch));
  std::vector<std::size_t> pick(p.num_threads(), 0);

  auto witness = [&](const std::string& key) {
    std::vector<int> choices;
    std::string k = key;
    while (info[k].choice >= 0) {
      choices.push_back(info[k].choice);
      k = info[k].parent;
    }
    Computation c = roots[info[k].root];
    PowerState s = pw.initial_state();
    for (const auto& e : c) s = pw.step(s, e);
    for (auto it = choices.rbegin(); it != choices.rend(); ++it) {
      auto en = pw.enabled(s);
      c.push_back(en.at(*it).first);
      s = en.at(*it).second;
    }
    return c;
  };

  std::size_t nfinal = 0;
  bool stop = false;
  while (!stop) {
    Computation prefix;
    PowerState s = pw.initial_state();
    for (int t = 1; t <= p.num_threads(); ++t)
      for (int id : paths[t - 1][pick[t - 1]]) {
        prefix.push_back(Event::fetch(t, id));
        s = pw.step(s, prefix.back());
      }
    s = canonicalize(pw, s);
    std::string rk = encode_state(s);
    if (!info.count(rk)) {
      roots.push_back(prefix);
      info[rk] = Info{"", -1, static_cast<int>(roots.size() - 1)};
      std::vector<std::pair<PowerState, std::string>> stack{{s, rk}};
      while (!stack.empty() && !stop) {
        auto [cur, key] = std::move(stack.back());
        stack.pop_back();
        if (pw.is_final(cur)) {
          ++nfinal;
          if (!visit(cur, witness(key))) stop = true;
        }
        auto en = pw.enabled(cur);
        for (int j = static_cast<int>(en.size()) - 1; j >= 0; --j) {
          if (en[j].first.kind == Event::Kind::Fetch) continue;
          PowerState n = canonicalize(pw, en[j].second);
          std::string nk = encode_state(n);
          if (info.count(nk)) continue;
          info[nk] = Info{key, j, -1};
          stack.emplace_back(std::move(n), std::move(nk));
        }
      }
    }
    int t = 0;
    while (t < p.num_threads() && ++pick[t] == paths[t].size()) pick[t++] = 0;
    if (t == p.num_threads()) break;
  }
  if (finals) *finals = nfinal;
  return info.size();
}

inline OracleResult oracle_check(const Program& p, const Bounds& b) {
  OracleResult r;
  r.states = explore_final_states(
      p, b,
      [&](const PowerState& s, const Computation& c) {
        auto cyc = find_hb_cycle(trace_of_state(p, s));
        if (!cyc) return true;
        r.verdict = OracleVerdict::NonRobust;
        r.witness = c;
        r.cycle = cyc;
        return false;
      },
      &r.final_states);
  if (r.verdict != OracleVerdict::NonRobust)
    r.verdict = p.loop_free() && b.max_fetch >= p.max_path() ? OracleVerdict::Robust : OracleVerdict::Inconclusive;
  return r;
}

inline Bounds default_bounds(const Program& p) { return Bounds{p.max_path()}; }

}  // namespace powrob
