#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "program.hpp"
#include "rational.hpp"

namespace powrob {

// tid == 0 denotes the initial store of address `index`.
struct StoreRef {
  int tid = 0;
  int index = 0;

  static StoreRef init(int addr) { return {0, addr}; }
  static StoreRef of(int tid, int index) { return {tid, index}; }
  bool is_init() const { return tid == 0; }

  friend bool operator==(const StoreRef&, const StoreRef&) = default;
  friend auto operator<=>(const StoreRef&, const StoreRef&) = default;
};

inline std::string to_string(const StoreRef& r) {
  return r.is_init() ? "init(" + std::to_string(r.index) + ")"
                     : "(" + std::to_string(r.tid) + "," + std::to_string(r.index) + ")";
}

struct Event {
  enum class Kind { Fetch, Load, Commit, StoreCommit, Prop };
  Kind kind = Kind::Fetch;
  int tid = 0;    // Prop: destination thread
  int index = 0;  // 1-based fetch index; Fetch: instruction id
  int addr = 0;
  Rational key;
  int store_tid = 0;  // Prop only
  int store_index = 0;

  static Event fetch(int t, int instr) { return {Kind::Fetch, t, instr, 0, {}, 0, 0}; }
  static Event load(int t, int i, int a) { return {Kind::Load, t, i, a, {}, 0, 0}; }
  static Event commit(int t, int i) { return {Kind::Commit, t, i, 0, {}, 0, 0}; }
  static Event store_commit(int t, int i, Rational k, int a) { return {Kind::StoreCommit, t, i, a, k, 0, 0}; }
  static Event prop(int t, int st, int si, int a) { return {Kind::Prop, t, 0, a, {}, st, si}; }

  auto tie() const { return std::tie(kind, tid, index, key, store_tid, store_index, addr); }
  friend bool operator==(const Event& a, const Event& b) { return a.tie() == b.tie(); }
  friend bool operator<(const Event& a, const Event& b) { return a.tie() < b.tie(); }
};

using Computation = std::vector<Event>;

enum class LoadRule { None, Memory, Early };

struct ThreadState {
  std::vector<int> fetched;  // instruction ids
  std::vector<char> committed;
  std::vector<std::optional<StoreRef>> loaded;
  std::vector<LoadRule> rule;
  std::vector<std::optional<Rational>> key;  // coherence key of committed stores

  int size() const { return static_cast<int>(fetched.size()); }
  friend bool operator==(const ThreadState&, const ThreadState&) = default;
};

struct PowerState {
  std::vector<ThreadState> threads;
  std::vector<std::vector<StoreRef>> propagated;  // [tid-1][addr]
  std::optional<std::pair<int, int>> pending;     // store awaiting its own propagation

  friend bool operator==(const PowerState&, const PowerState&) = default;
};

struct Deps {
  std::set<int> addr, data, ctrl;
};

struct Violation {
  enum class Kind { FinComm, FinLd, FinLdSt, PendingProp };
  Kind kind;
  int tid = 0;
  int index = 0;
  int other = 0;  // the earlier instruction of the pair
};

inline const char* violation_name(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::FinComm: return "FIN-COMM";
    case Violation::Kind::FinLd: return "FIN-LD";
    case Violation::Kind::FinLdSt: return "FIN-LD-ST";
    case Violation::Kind::PendingProp: return "pending-propagate";
  }
  return "?";
}

class StepError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Power {
public:
  explicit Power(const Program& p) : p_(p), nthreads_(p.num_threads()), size_(p.domain.size) {}

  const Program& program() const { return p_; }

  PowerState initial_state() const {
    PowerState s;
    s.threads.resize(nthreads_);
    s.propagated.assign(nthreads_, std::vector<StoreRef>());
    for (auto& row : s.propagated)
      for (int a = 0; a < size_; ++a) row.push_back(StoreRef::init(a));
    return s;
  }

  const Instruction& instr(const PowerState& s, int t, int i) const {
    return p_.instr(t, s.threads[t - 1].fetched[i - 1]);
  }

  // Value of register `reg` as seen by the i-th fetched instruction of thread t.
  Value reg_value(const PowerState& s, int t, int i, int reg) const {
    int w = writer(s, t, i, reg);
    if (w == 0) return 0;
    const Command& c = instr(s, t, w).cmd;
    if (c.kind == Command::Kind::Assign) return evaluate(s, t, w, c.value);
    const auto& ld = s.threads[t - 1].loaded[w - 1];
    if (!ld) return kUndef;
    return store_value(s, *ld);
  }

  Value evaluate(const PowerState& s, int t, int i, const Expr& e) const {
    return eval_with(e, size_, [&](int r) { return reg_value(s, t, i, r); });
  }

  Value store_value(const PowerState& s, const StoreRef& r) const {
    if (r.is_init()) return 0;
    return evaluate(s, r.tid, r.index, instr(s, r.tid, r.index).cmd.value);
  }

  Value getaddr(const PowerState& s, int t, int i) const {
    const Command& c = instr(s, t, i).cmd;
    return c.is_memory() ? evaluate(s, t, i, c.addr) : kNone;
  }

  Value getvalue(const PowerState& s, int t, int i) const {
    const Command& c = instr(s, t, i).cmd;
    return c.kind == Command::Kind::Load ? kNone : evaluate(s, t, i, c.value);
  }

  Deps deps(const PowerState& s, int t, int i) const {
    Deps d;
    const Command& c = instr(s, t, i).cmd;
    for (int r : c.addr_regs()) reg_deps(s, t, i, r, d.addr);
    for (int r : c.value_regs()) reg_deps(s, t, i, r, d.data);
    for (int j = 1; j < i; ++j)
      if (instr(s, t, j).cmd.kind == Command::Kind::Assume) d.ctrl.insert(j);
    return d;
  }

  std::optional<Rational> key_of(const PowerState& s, const StoreRef& r) const {
    if (r.is_init()) return Rational(0);
    return s.threads[r.tid - 1].key[r.index - 1];
  }

  int control(const PowerState& s, int t) const {
    const auto& th = s.threads[t - 1];
    return th.fetched.empty() ? p_.thread(t).initial : p_.instr(t, th.fetched.back()).dst;
  }

  // Reason the commit of (t,i) is disabled, or nullopt.
  std::optional<std::string> commit_blocker(const PowerState& s, int t, int i) const {
    const auto& th = s.threads[t - 1];
    if (i < 1 || i > th.size()) return "instruction not fetched";
    if (th.committed[i - 1]) return "already committed";
    Deps d = deps(s, t, i);
    for (const auto* set : {&d.addr, &d.data, &d.ctrl})
      for (int j : *set)
        if (!th.committed[j - 1]) return "dependency " + std::to_string(j) + " not committed";
    Value a = getaddr(s, t, i), v = getvalue(s, t, i);
    if (a == kUndef) return "address unknown";
    if (v == kUndef) return "value unknown";
    if (a != kNone)
      for (int j = 1; j < i; ++j) {
        Value aj = getaddr(s, t, j);
        if ((aj == a || aj == kUndef) && !th.committed[j - 1])
          return "earlier access " + std::to_string(j) + " to same or unknown address not committed";
      }
    const Command& c = instr(s, t, i).cmd;
    if (c.kind == Command::Kind::Load && !th.loaded[i - 1]) return "load not satisfied";
    if (c.kind == Command::Kind::Assume && v == 0) return "assume condition is 0";
    return std::nullopt;
  }

  // Store that the early-read rule would forward to load (t,i), if its conditions hold.
  std::optional<int> early_source(const PowerState& s, int t, int i, Value a) const {
    const auto& th = s.threads[t - 1];
    for (int j = i - 1; j >= 1; --j) {
      if (instr(s, t, j).cmd.kind != Command::Kind::Store) continue;
      Value aj = getaddr(s, t, j);
      if (aj != a && aj != kUndef) continue;
      if (aj == kUndef || getvalue(s, t, j) == kUndef || th.committed[j - 1]) return std::nullopt;
      return j;
    }
    return std::nullopt;
  }

  // Fresh keys for a store to `a` by thread t: one per insertion point above propagated(t,a).
  std::vector<Rational> key_candidates(const PowerState& s, int t, int a) const {
    Rational lo = *key_of(s, s.propagated[t - 1][a]);
    std::vector<Rational> same{Rational(0)}, all{Rational(0)};
    for (int u = 1; u <= nthreads_; ++u) {
      const auto& th = s.threads[u - 1];
      for (int j = 1; j <= th.size(); ++j) {
        if (!th.key[j - 1]) continue;
        all.push_back(*th.key[j - 1]);
        if (getaddr(s, u, j) == a) same.push_back(*th.key[j - 1]);
      }
    }
    std::sort(same.begin(), same.end());
    std::sort(all.begin(), all.end());
    auto used = [&](const Rational& k) { return std::binary_search(all.begin(), all.end(), k); };
    std::vector<Rational> out;
    for (std::size_t j = 0; j + 1 < same.size(); ++j) {
      if (same[j] < lo) continue;
      Rational m = midpoint(same[j], same[j + 1]);
      while (used(m)) m = midpoint(same[j], m);
      out.push_back(m);
    }
    out.push_back(all.back() + Rational(1));
    return out;
  }

  std::vector<std::pair<Event, PowerState>> enabled(const PowerState& s) const {
    std::vector<std::pair<Event, PowerState>> out;
    if (s.pending) {
      auto [t, i] = *s.pending;
      Event e = Event::prop(t, t, i, getaddr(s, t, i));
      out.emplace_back(e, apply(s, e));
      return out;
    }
    for (int t = 1; t <= nthreads_; ++t) {
      int q = control(s, t);
      for (int id : p_.thread(t).outgoing(q)) {
        Event e = Event::fetch(t, id);
        out.emplace_back(e, apply(s, e));
      }
    }
    for (int t = 1; t <= nthreads_; ++t) {
      const auto& th = s.threads[t - 1];
      for (int i = 1; i <= th.size(); ++i) {
        if (instr(s, t, i).cmd.kind != Command::Kind::Load || th.loaded[i - 1]) continue;
        Value a = getaddr(s, t, i);
        if (a < 0) continue;
        Event e = Event::load(t, i, a);
        out.emplace_back(e, apply(s, e));
      }
    }
    for (int t = 1; t <= nthreads_; ++t)
      for (int i = 1; i <= s.threads[t - 1].size(); ++i) {
        if (instr(s, t, i).cmd.kind == Command::Kind::Store || commit_blocker(s, t, i)) continue;
        Event e = Event::commit(t, i);
        out.emplace_back(e, apply(s, e));
      }
    for (int t = 1; t <= nthreads_; ++t)
      for (int i = 1; i <= s.threads[t - 1].size(); ++i) {
        if (instr(s, t, i).cmd.kind != Command::Kind::Store || commit_blocker(s, t, i)) continue;
        Value a = getaddr(s, t, i);
        for (const Rational& k : key_candidates(s, t, a)) {
          Event e = Event::store_commit(t, i, k, a);
          out.emplace_back(e, apply(s, e));
        }
      }
    for (int t = 1; t <= nthreads_; ++t)
      for (int u = 1; u <= nthreads_; ++u) {
        const auto& th = s.threads[u - 1];
        for (int j = 1; j <= th.size(); ++j) {
          if (!th.key[j - 1]) continue;
          Value a = getaddr(s, u, j);
          if (*key_of(s, s.propagated[t - 1][a]) < *th.key[j - 1]) {
            Event e = Event::prop(t, u, j, a);
            out.emplace_back(e, apply(s, e));
          }
        }
      }
    return out;
  }

  std::optional<PowerState> try_step(const PowerState& s, const Event& e, std::string* why = nullptr) const {
    auto fail = [&](std::string msg) -> std::optional<PowerState> {
      if (why) *why = std::move(msg);
      return std::nullopt;
    };
    if (e.tid < 1 || e.tid > nthreads_) return fail("no thread " + std::to_string(e.tid));
    const auto& th = s.threads[e.tid - 1];
    if (s.pending) {
      auto [t, i] = *s.pending;
      if (e.kind != Event::Kind::Prop || e.tid != t || e.store_tid != t || e.store_index != i)
        return fail("store (" + std::to_string(t) + "," + std::to_string(i) + ") must first propagate to its thread");
    }
    switch (e.kind) {
      case Event::Kind::Fetch: {
        const auto& ins = p_.thread(e.tid).instructions;
        if (e.index < 0 || e.index >= static_cast<int>(ins.size())) return fail("no such instruction");
        if (ins[e.index].src != control(s, e.tid)) return fail("instruction does not start at current control state");
        break;
      }
      case Event::Kind::Load: {
        if (e.index < 1 || e.index > th.size()) return fail("instruction not fetched");
        if (instr(s, e.tid, e.index).cmd.kind != Command::Kind::Load) return fail("not a load");
        if (th.loaded[e.index - 1]) return fail("load already satisfied");
        Value a = getaddr(s, e.tid, e.index);
        if (a == kUndef) return fail("address unknown");
        if (a != e.addr) return fail("address is " + std::to_string(a));
        break;
      }
      case Event::Kind::Commit:
      case Event::Kind::StoreCommit: {
        if (e.index < 1 || e.index > th.size()) return fail("instruction not fetched");
        bool store = instr(s, e.tid, e.index).cmd.kind == Command::Kind::Store;
        if (store != (e.kind == Event::Kind::StoreCommit))
          return fail(store ? "store commits need a coherence key" : "only stores take a coherence key");
        if (auto b = commit_blocker(s, e.tid, e.index)) return fail(*b);
        if (store) {
          if (getaddr(s, e.tid, e.index) != e.addr) return fail("address mismatch");
          for (const auto& u : s.threads)
            for (const auto& k : u.key)
              if (k && *k == e.key) return fail("coherence key " + e.key.str() + " already used");
          if (!(*key_of(s, s.propagated[e.tid - 1][e.addr]) < e.key))
            return fail("key not above the store already propagated to the thread");
        }
        break;
      }
      case Event::Kind::Prop: {
        if (e.store_tid < 1 || e.store_tid > nthreads_) return fail("no such store thread");
        const auto& st = s.threads[e.store_tid - 1];
        if (e.store_index < 1 || e.store_index > st.size()) return fail("store not fetched");
        const auto& k = st.key[e.store_index - 1];
        if (!k) return fail("store not committed");
        if (getaddr(s, e.store_tid, e.store_index) != e.addr) return fail("address mismatch");
        if (!(*key_of(s, s.propagated[e.tid - 1][e.addr]) < *k)) return fail("store is not newer than the propagated one");
        break;
      }
    }
    return apply(s, e);
  }

  PowerState step(const PowerState& s, const Event& e) const {
    std::string why;
    auto r = try_step(s, e, &why);
    if (!r) throw StepError("not enabled: " + why);
    return *r;
  }

  std::vector<Violation> violations(const PowerState& s) const {
    std::vector<Violation> out;
    if (s.pending) out.push_back({Violation::Kind::PendingProp, s.pending->first, s.pending->second, 0});
    for (int t = 1; t <= nthreads_; ++t) {
      const auto& th = s.threads[t - 1];
      for (int i = 1; i <= th.size(); ++i)
        if (!th.committed[i - 1]) out.push_back({Violation::Kind::FinComm, t, i, 0});
      for (int i = 1; i <= th.size(); ++i) {
        if (instr(s, t, i).cmd.kind != Command::Kind::Load || !th.loaded[i - 1]) continue;
        auto ki = key_of(s, *th.loaded[i - 1]);
        Value a = getaddr(s, t, i);
        for (int j = 1; j < i; ++j) {
          if (getaddr(s, t, j) != a) continue;
          const Command& cj = instr(s, t, j).cmd;
          if (cj.kind == Command::Kind::Load && th.loaded[j - 1]) {
            auto kj = key_of(s, *th.loaded[j - 1]);
            if (kj && ki && *ki < *kj) out.push_back({Violation::Kind::FinLd, t, i, j});
          } else if (cj.kind == Command::Kind::Store) {
            auto kj = th.key[j - 1];
            if (kj && ki && *ki < *kj) out.push_back({Violation::Kind::FinLdSt, t, i, j});
          }
        }
      }
    }
    return out;
  }

  bool is_final(const PowerState& s) const { return violations(s).empty(); }

  // Register valuation of thread t after all its fetched instructions.
  std::vector<Value> registers(const PowerState& s, int t) const {
    std::vector<Value> out;
    int n = static_cast<int>(p_.thread(t).registers.size());
    for (int r = 0; r < n; ++r) out.push_back(reg_value(s, t, s.threads[t - 1].size() + 1, r));
    return out;
  }

private:
  const Program& p_;
  int nthreads_;
  int size_;

  // Greatest index j < i writing `reg` in thread t, 0 if none.
  int writer(const PowerState& s, int t, int i, int reg) const {
    for (int j = i - 1; j >= 1; --j) {
      const Command& c = instr(s, t, j).cmd;
      if (c.writes_reg() && c.reg == reg) return j;
    }
    return 0;
  }

  void reg_deps(const PowerState& s, int t, int i, int reg, std::set<int>& out) const {
    int w = writer(s, t, i, reg);
    if (w == 0 || !out.insert(w).second) return;
    const Command& c = instr(s, t, w).cmd;
    if (c.kind == Command::Kind::Assign)
      for (int r : c.value_regs()) reg_deps(s, t, w, r, out);
  }

  // Applies an event already known to be enabled.
  PowerState apply(const PowerState& s, const Event& e) const {
    PowerState n = s;
    auto& th = n.threads[e.tid - 1];
    switch (e.kind) {
      case Event::Kind::Fetch:
        th.fetched.push_back(e.index);
        th.committed.push_back(0);
        th.loaded.emplace_back();
        th.rule.push_back(LoadRule::None);
        th.key.emplace_back();
        break;
      case Event::Kind::Load:
        if (auto j = early_source(s, e.tid, e.index, e.addr)) {
          th.loaded[e.index - 1] = StoreRef::of(e.tid, *j);
          th.rule[e.index - 1] = LoadRule::Early;
        } else {
          th.loaded[e.index - 1] = s.propagated[e.tid - 1][e.addr];
          th.rule[e.index - 1] = LoadRule::Memory;
        }
        break;
      case Event::Kind::Commit: th.committed[e.index - 1] = 1; break;
      case Event::Kind::StoreCommit:
        th.committed[e.index - 1] = 1;
        th.key[e.index - 1] = e.key;
        n.pending = std::make_pair(e.tid, e.index);
        break;
      case Event::Kind::Prop:
        n.propagated[e.tid - 1][e.addr] = StoreRef::of(e.store_tid, e.store_index);
        n.pending.reset();
        break;
    }
    return n;
  }
};

inline PowerState initial_state(const Program& p) { return Power(p).initial_state(); }

struct ReplayResult {
  bool ok = false;
  PowerState state;
  int position = -1;  // failing event (0-based), or -1 for the final check
  std::string error;
  std::vector<Violation> violations;
};

inline ReplayResult replay(const Program& p, const Computation& c) {
  Power pw(p);
  ReplayResult r;
  r.state = pw.initial_state();
  for (std::size_t k = 0; k < c.size(); ++k) {
    std::string why;
    auto n = pw.try_step(r.state, c[k], &why);
    if (!n) {
      r.position = static_cast<int>(k);
      r.error = why;
      return r;
    }
    r.state = std::move(*n);
  }
  r.violations = pw.violations(r.state);
  r.ok = r.violations.empty();
  if (!r.ok) {
    r.error = "final state check failed:";
    for (const auto& v : r.violations) r.error += std::string(" ") + violation_name(v.kind);
  }
  return r;
}

// Serialization ------------------------------------------------------------

inline std::string format_event(const Program& p, const Event& e) {
  std::ostringstream os;
  switch (e.kind) {
    case Event::Kind::Fetch: {
      const Thread& th = p.thread(e.tid);
      const Instruction& in = th.instructions.at(e.index);
      os << "F " << e.tid << " " << th.states[in.src] << "->" << th.states[in.dst] << ":" << render(in.cmd, th);
      break;
    }
    case Event::Kind::Load: os << "L " << e.tid << " " << e.index << " " << e.addr; break;
    case Event::Kind::Commit: os << "C " << e.tid << " " << e.index; break;
    case Event::Kind::StoreCommit: os << "S " << e.tid << " " << e.index << " " << e.key.str() << " " << e.addr; break;
    case Event::Kind::Prop:
      os << "P " << e.tid << " " << e.store_tid << " " << e.store_index << " " << e.addr;
      break;
  }
  return os.str();
}

inline std::string format_computation(const Program& p, const Computation& c) {
  std::string out;
  for (const auto& e : c) out += format_event(p, e) + "\n";
  return out;
}

class FormatError : public std::runtime_error {
public:
  FormatError(int line, const std::string& msg) : std::runtime_error("line " + std::to_string(line) + ": " + msg) {}
};

inline Event parse_event(const Program& p, const std::string& line, int lineno = 0) {
  std::istringstream is(line);
  std::string tag;
  int t = 0;
  if (!(is >> tag >> t)) throw FormatError(lineno, "expected event tag and thread");
  if (t < 1 || t > p.num_threads()) throw FormatError(lineno, "no thread " + std::to_string(t));
  auto nums = [&](int count) {
    std::vector<int> v(count);
    for (auto& x : v)
      if (!(is >> x)) throw FormatError(lineno, "expected integer");
    return v;
  };
  if (tag == "F") {
    std::string rest;
    std::getline(is, rest);
    auto strip = [](std::string s) {
      s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); }), s.end());
      return s;
    };
    rest = strip(rest);
    const Thread& th = p.thread(t);
    for (const auto& in : th.instructions) {
      std::string want = strip(th.states[in.src] + "->" + th.states[in.dst] + ":" + render(in.cmd, th));
      if (want == rest) return Event::fetch(t, in.id);
    }
    throw FormatError(lineno, "no instruction '" + rest + "' in thread " + std::to_string(t));
  }
  if (tag == "L") {
    auto v = nums(2);
    return Event::load(t, v[0], v[1]);
  }
  if (tag == "C") return Event::commit(t, nums(1)[0]);
  if (tag == "S") {
    int i = 0, a = 0;
    std::string k;
    if (!(is >> i >> k >> a)) throw FormatError(lineno, "expected S t i k a");
    try {
      return Event::store_commit(t, i, Rational::parse(k), a);
    } catch (const std::exception&) {
      throw FormatError(lineno, "bad coherence key '" + k + "'");
    }
  }
  if (tag == "P") {
    auto v = nums(3);
    return Event::prop(t, v[0], v[1], v[2]);
  }
  throw FormatError(lineno, "unknown event tag '" + tag + "'");
}

inline Computation parse_computation(const Program& p, const std::string& text) {
  Computation c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    c.push_back(parse_event(p, line, lineno));
  }
  return c;
}

}  // namespace powrob
