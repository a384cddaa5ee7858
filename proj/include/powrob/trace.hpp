#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "power.hpp"

namespace powrob {

// tid == 0 denotes the initial store of address `index`.
struct Node {
  int tid = 0;
  int index = 0;

  static Node init(int addr) { return {0, addr}; }
  static Node instr(int t, int i) { return {t, i}; }
  static Node of(const StoreRef& r) { return {r.tid, r.index}; }
  bool is_init() const { return tid == 0; }

  friend bool operator==(const Node&, const Node&) = default;
  friend auto operator<=>(const Node&, const Node&) = default;
};

using Arc = std::pair<Node, Node>;

struct Trace {
  std::vector<Node> nodes;  // sorted
  std::map<Node, std::string> label;
  std::set<Arc> po, co, src, cf;
  std::set<Arc> addr_dep, data_dep;

  bool same_graph(const Trace& o) const {
    return nodes == o.nodes && po == o.po && co == o.co && src == o.src && cf == o.cf;
  }
  friend bool operator==(const Trace& a, const Trace& b) { return a.same_graph(b); }

  bool hb(const Node& a, const Node& b) const {
    Arc x{a, b};
    return po.count(x) || co.count(x) || src.count(x) || cf.count(x);
  }
  bool hop(const Node& a, const Node& b) const {
    Arc x{a, b};
    return co.count(x) || src.count(x) || cf.count(x);
  }
  // Arc kind by priority po, co, src, cf; empty if no arc.
  std::string kind(const Node& a, const Node& b) const {
    Arc x{a, b};
    if (po.count(x)) return "po";
    if (co.count(x)) return "co";
    if (src.count(x)) return "src";
    if (cf.count(x)) return "cf";
    return "";
  }
};

inline std::string node_name(const Program& p, const Node& n) {
  if (n.is_init()) {
    for (const auto& [name, v] : p.symbols)
      if (v == n.index) return "init_" + name;
    return "init_" + std::to_string(n.index);
  }
  return "t" + std::to_string(n.tid) + "_" + std::to_string(n.index);
}

inline Trace trace_of_state(const Program& p, const PowerState& s) {
  Power pw(p);
  Trace tr;
  for (int a = 0; a < p.domain.size; ++a) {
    tr.nodes.push_back(Node::init(a));
    tr.label[Node::init(a)] = "init " + std::to_string(a);
  }
  struct Store {
    Node node;
    int addr;
    Rational key;
  };
  std::vector<Store> stores;
  for (int t = 1; t <= p.num_threads(); ++t) {
    const auto& th = s.threads[t - 1];
    for (int i = 1; i <= th.size(); ++i) {
      Node n = Node::instr(t, i);
      tr.nodes.push_back(n);
      tr.label[n] = render(pw.instr(s, t, i), p.thread(t));
      if (i > 1) tr.po.insert({Node::instr(t, i - 1), n});
      const Command& c = pw.instr(s, t, i).cmd;
      if (c.kind == Command::Kind::Store && th.key[i - 1]) {
        int a = pw.getaddr(s, t, i);
        stores.push_back({n, a, *th.key[i - 1]});
        tr.co.insert({Node::init(a), n});
      }
      if (c.kind == Command::Kind::Load && th.loaded[i - 1]) tr.src.insert({Node::of(*th.loaded[i - 1]), n});
      Deps d = pw.deps(s, t, i);
      for (int j : d.addr) tr.addr_dep.insert({Node::instr(t, j), n});
      for (int j : d.data) tr.data_dep.insert({Node::instr(t, j), n});
    }
  }
  for (const auto& x : stores)
    for (const auto& y : stores)
      if (x.addr == y.addr && x.key < y.key) tr.co.insert({x.node, y.node});
  for (const auto& [c, a] : tr.src)
    for (const auto& [c2, b] : tr.co)
      if (c2 == c) tr.cf.insert({a, b});
  std::sort(tr.nodes.begin(), tr.nodes.end());
  return tr;
}

class TraceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline Trace trace_of(const Program& p, const Computation& c) {
  auto r = replay(p, c);
  if (!r.ok) {
    std::string where = r.position >= 0 ? "event " + std::to_string(r.position + 1) : "final state";
    throw TraceError("computation does not replay (" + where + "): " + r.error);
  }
  return trace_of_state(p, r.state);
}

struct HbCycle {
  std::vector<Node> nodes;
  std::vector<std::string> kinds;  // kinds[j] labels the arc nodes[j] -> nodes[j+1 mod size]
};

// Shortest hb cycle; ties broken by the node sequence, rotated to start at its smallest node.
inline std::optional<HbCycle> find_hb_cycle(const Trace& tr) {
  std::map<Node, std::vector<Node>> adj;
  for (const auto* set : {&tr.po, &tr.co, &tr.src, &tr.cf})
    for (const auto& [a, b] : *set) adj[a].push_back(b);
  for (auto& [_, v] : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  std::optional<std::vector<Node>> best;
  for (const Node& start : tr.nodes) {
    // Cycles whose smallest node is `start`.
    std::map<Node, Node> parent;
    std::deque<Node> queue{start};
    std::optional<Node> closing;
    std::set<Node> seen{start};
    while (!queue.empty() && !closing) {
      Node u = queue.front();
      queue.pop_front();
      for (const Node& v : adj[u]) {
        if (v < start) continue;
        if (v == start) {
          closing = u;
          break;
        }
        if (seen.insert(v).second) {
          parent[v] = u;
          queue.push_back(v);
        }
      }
    }
    if (!closing) continue;
    std::vector<Node> cyc;
    for (Node x = *closing; !(x == start); x = parent[x]) cyc.push_back(x);
    cyc.push_back(start);
    std::reverse(cyc.begin(), cyc.end());
    if (!best || cyc.size() < best->size() || (cyc.size() == best->size() && cyc < *best)) best = cyc;
  }
  if (!best) return std::nullopt;
  HbCycle out;
  out.nodes = *best;
  for (std::size_t j = 0; j < out.nodes.size(); ++j)
    out.kinds.push_back(tr.kind(out.nodes[j], out.nodes[(j + 1) % out.nodes.size()]));
  return out;
}

struct BeautifulCycle {
  std::vector<int> profile;
  std::vector<Node> entries, exits;
  std::vector<std::string> hops;  // hops[j] labels exits[j] -> entries[j+1 mod n]
};

inline std::vector<std::vector<int>> all_profiles(int nthreads) {
  std::vector<std::vector<int>> out;
  for (int len = 1; len <= nthreads; ++len) {
    std::vector<int> cur;
    std::vector<char> used(nthreads + 1, 0);
    auto rec = [&](auto&& self) -> void {
      if (static_cast<int>(cur.size()) == len) {
        out.push_back(cur);
        return;
      }
      for (int t = 1; t <= nthreads; ++t) {
        if (used[t]) continue;
        used[t] = 1;
        cur.push_back(t);
        self(self);
        cur.pop_back();
        used[t] = 0;
      }
    };
    rec(rec);
  }
  return out;
}

inline std::string hop_kind(const Trace& tr, const Node& a, const Node& b) {
  Arc x{a, b};
  if (tr.co.count(x)) return "co";
  if (tr.src.count(x)) return "src";
  if (tr.cf.count(x)) return "cf";
  return "";
}

inline std::optional<BeautifulCycle> find_beautiful_cycle(const Trace& tr, std::optional<std::vector<int>> only = {}) {
  std::map<int, int> length;
  int nthreads = 0;
  for (const Node& n : tr.nodes)
    if (!n.is_init()) {
      length[n.tid] = std::max(length[n.tid], n.index);
      nthreads = std::max(nthreads, n.tid);
    }
  std::vector<std::vector<int>> profiles = only ? std::vector<std::vector<int>>{*only} : all_profiles(nthreads);
  for (const auto& prof : profiles) {
    int n = static_cast<int>(prof.size());
    BeautifulCycle bc;
    bc.profile = prof;
    bc.entries.resize(n);
    bc.exits.resize(n);
    bc.hops.resize(n);
    auto rec = [&](auto&& self, int j) -> bool {
      int t = prof[j];
      int len = length.count(t) ? length[t] : 0;
      for (int i = 1; i <= len; ++i) {
        if (j > 0 && !tr.hop(bc.exits[j - 1], Node::instr(t, i))) continue;
        bc.entries[j] = Node::instr(t, i);
        for (int k = i; k <= len; ++k) {
          bc.exits[j] = Node::instr(t, k);
          if (j + 1 < n) {
            if (self(self, j + 1)) return true;
          } else if (tr.hop(bc.exits[j], bc.entries[0])) {
            return true;
          }
        }
      }
      return false;
    };
    if (rec(rec, 0)) {
      for (int j = 0; j < n; ++j) bc.hops[j] = hop_kind(tr, bc.exits[j], bc.entries[(j + 1) % n]);
      return bc;
    }
  }
  return std::nullopt;
}

// Output ------------------------------------------------------------------

inline std::string trace_to_dot(const Program& p, const Trace& tr) {
  std::string out = "digraph trace {\n";
  for (const Node& n : tr.nodes) {
    std::string lbl = n.is_init() ? node_name(p, n) : tr.label.at(n);
    std::string esc;
    for (char ch : lbl) {
      if (ch == '"' || ch == '\\') esc += '\\';
      esc += ch;
    }
    out += "  " + node_name(p, n) + " [label=\"" + esc + "\"];\n";
  }
  auto arcs = [&](const std::set<Arc>& set, const char* name, const char* style) {
    for (const auto& [a, b] : set)
      out += "  " + node_name(p, a) + " -> " + node_name(p, b) + " [label=\"" + name + "\", style=" + style + "];\n";
  };
  arcs(tr.po, "po", "solid");
  arcs(tr.co, "co", "dashed");
  arcs(tr.src, "src", "bold");
  arcs(tr.cf, "cf", "dotted");
  out += "}\n";
  return out;
}

inline nlohmann::json trace_to_json(const Program& p, const Trace& tr) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const Node& n : tr.nodes) {
    nlohmann::json o{{"id", node_name(p, n)}, {"tid", n.tid}, {"index", n.index}};
    if (n.is_init())
      o["address"] = n.index;
    else
      o["label"] = tr.label.at(n);
    j["nodes"].push_back(o);
  }
  auto arcs = [&](const std::set<Arc>& set) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [x, y] : set) a.push_back({node_name(p, x), node_name(p, y)});
    return a;
  };
  j["po"] = arcs(tr.po);
  j["co"] = arcs(tr.co);
  j["src"] = arcs(tr.src);
  j["cf"] = arcs(tr.cf);
  return j;
}

inline std::string format_cycle(const Program& p, const HbCycle& c) {
  std::string out;
  for (std::size_t j = 0; j < c.nodes.size(); ++j) out += node_name(p, c.nodes[j]) + " -" + c.kinds[j] + "-> ";
  return out + node_name(p, c.nodes.front());
}

}  // namespace powrob
