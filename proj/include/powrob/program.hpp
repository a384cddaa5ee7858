#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace powrob {

using Value = int;
inline constexpr Value kUndef = -1;  // not yet computable
inline constexpr Value kNone = -2;   // instruction has no such argument

struct Domain {
  int size = 1;
  friend bool operator==(const Domain&, const Domain&) = default;
};

enum class Op { Add, Sub, Mul, Eq, Neq, Lt };

inline const char* op_symbol(Op op) {
  switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Eq: return "==";
    case Op::Neq: return "!=";
    case Op::Lt: return "<";
  }
  return "?";
}

inline int op_precedence(Op op) {
  switch (op) {
    case Op::Mul: return 3;
    case Op::Add:
    case Op::Sub: return 2;
    default: return 1;
  }
}

struct Expr {
  enum class Kind { Const, Addr, Reg, Apply };
  Kind kind = Kind::Const;
  int value = 0;     // Const/Addr: the value; Reg: register index within the thread
  std::string name;  // Addr: symbol without '&'; Reg: register name
  Op op = Op::Add;
  std::vector<Expr> args;

  static Expr constant(int v) { return Expr{Kind::Const, v, {}, Op::Add, {}}; }
  static Expr address(int v, std::string n) { return Expr{Kind::Addr, v, std::move(n), Op::Add, {}}; }
  static Expr reg(int index, std::string n) { return Expr{Kind::Reg, index, std::move(n), Op::Add, {}}; }
  static Expr apply(Op op, Expr a, Expr b) {
    Expr e{Kind::Apply, 0, {}, op, {}};
    e.args.push_back(std::move(a));
    e.args.push_back(std::move(b));
    return e;
  }

  friend bool operator==(const Expr&, const Expr&) = default;
};

inline Value apply_op(Op op, Value a, Value b, int size) {
  if (a < 0 || b < 0) return kUndef;
  long long x = a, y = b, r = 0;
  switch (op) {
    case Op::Add: r = x + y; break;
    case Op::Sub: r = x - y; break;
    case Op::Mul: r = x * y; break;
    case Op::Eq: r = a == b; break;
    case Op::Neq: r = a != b; break;
    case Op::Lt: r = a < b; break;
  }
  r %= size;
  if (r < 0) r += size;
  return static_cast<Value>(r);
}

// `reg_value(index)` returns the current value of a register (kUndef allowed).
template <class RegValue>
Value eval_with(const Expr& e, int size, RegValue&& reg_value) {
  switch (e.kind) {
    case Expr::Kind::Const:
    case Expr::Kind::Addr: return e.value;
    case Expr::Kind::Reg: return reg_value(e.value);
    case Expr::Kind::Apply:
      return apply_op(e.op, eval_with(e.args[0], size, reg_value), eval_with(e.args[1], size, reg_value), size);
  }
  return kUndef;
}

// Registers missing from `regs` read as 0.
inline Value eval_expr(const Expr& e, const Domain& d, const std::map<std::string, Value>& regs) {
  switch (e.kind) {
    case Expr::Kind::Const:
    case Expr::Kind::Addr: return e.value;
    case Expr::Kind::Reg: {
      auto it = regs.find(e.name);
      return it == regs.end() ? 0 : it->second;
    }
    case Expr::Kind::Apply:
      return apply_op(e.op, eval_expr(e.args[0], d, regs), eval_expr(e.args[1], d, regs), d.size);
  }
  return kUndef;
}

inline void collect_regs(const Expr& e, std::vector<int>& out) {
  if (e.kind == Expr::Kind::Reg) {
    if (std::find(out.begin(), out.end(), e.value) == out.end()) out.push_back(e.value);
  }
  for (const auto& a : e.args) collect_regs(a, out);
}

struct Command {
  enum class Kind { Load, Store, Assign, Assume };
  Kind kind = Kind::Assume;
  int reg = -1;  // Load/Assign target
  Expr addr;     // Load/Store
  Expr value;    // Store/Assign/Assume

  bool is_memory() const { return kind == Kind::Load || kind == Kind::Store; }
  bool writes_reg() const { return kind == Kind::Load || kind == Kind::Assign; }

  std::vector<int> addr_regs() const {
    std::vector<int> r;
    if (is_memory()) collect_regs(addr, r);
    return r;
  }
  std::vector<int> value_regs() const {
    std::vector<int> r;
    if (kind != Kind::Load) collect_regs(value, r);
    return r;
  }
  std::vector<int> read_regs() const {
    auto r = addr_regs();
    for (int x : value_regs())
      if (std::find(r.begin(), r.end(), x) == r.end()) r.push_back(x);
    return r;
  }

  friend bool operator==(const Command&, const Command&) = default;
};

struct Instruction {
  int id = 0;   // position in the thread's instruction list
  int tid = 0;  // 1-based
  int src = 0;
  int dst = 0;
  Command cmd;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct Thread {
  int id = 0;
  std::vector<std::string> states;
  int initial = 0;
  std::vector<Instruction> instructions;
  std::vector<std::string> registers;

  std::vector<int> outgoing(int state) const {
    std::vector<int> r;
    for (const auto& in : instructions)
      if (in.src == state) r.push_back(in.id);
    return r;
  }

  // Longest instruction path from the initial state, or -1 if a cycle is reachable.
  int longest_path() const {
    int n = static_cast<int>(states.size());
    std::vector<int> memo(n, -2);  // -2 unvisited, -3 on stack
    bool cyclic = false;
    auto go = [&](auto&& self, int q) -> int {
      if (memo[q] == -3) { cyclic = true; return 0; }
      if (memo[q] >= 0) return memo[q];
      memo[q] = -3;
      int best = 0;
      for (int i : outgoing(q)) best = std::max(best, 1 + self(self, instructions[i].dst));
      memo[q] = best;
      return best;
    };
    int r = go(go, initial);
    return cyclic ? -1 : r;
  }

  friend bool operator==(const Thread&, const Thread&) = default;
};

struct Program {
  std::string name;
  Domain domain;
  std::vector<Thread> threads;
  std::vector<std::pair<std::string, int>> symbols;  // in allocation order

  int num_threads() const { return static_cast<int>(threads.size()); }
  const Thread& thread(int tid) const { return threads.at(tid - 1); }
  const Instruction& instr(int tid, int id) const { return threads.at(tid - 1).instructions.at(id); }

  bool loop_free() const {
    return std::all_of(threads.begin(), threads.end(), [](const Thread& t) { return t.longest_path() >= 0; });
  }
  int max_path() const {
    int m = 0;
    for (const auto& t : threads) m = std::max(m, t.longest_path());
    return m;
  }

  friend bool operator==(const Program&, const Program&) = default;
};

// Rendering ---------------------------------------------------------------

inline std::string render(const Expr& e, int parent_prec = 0, bool right = false) {
  switch (e.kind) {
    case Expr::Kind::Const: return std::to_string(e.value);
    case Expr::Kind::Addr: return "&" + e.name;
    case Expr::Kind::Reg: return e.name;
    case Expr::Kind::Apply: {
      int p = op_precedence(e.op);
      std::string s = render(e.args[0], p, false) + " " + op_symbol(e.op) + " " + render(e.args[1], p, true);
      bool paren = p < parent_prec || (right && p == parent_prec);
      return paren ? "(" + s + ")" : s;
    }
  }
  return "?";
}

inline std::string render(const Command& c, const Thread& t) {
  switch (c.kind) {
    case Command::Kind::Load: return t.registers.at(c.reg) + " <- mem[" + render(c.addr) + "]";
    case Command::Kind::Store: return "mem[" + render(c.addr) + "] <- " + render(c.value);
    case Command::Kind::Assign: return t.registers.at(c.reg) + " <- " + render(c.value);
    case Command::Kind::Assume: return "assume(" + render(c.value) + ")";
  }
  return "?";
}

inline std::string render(const Instruction& in, const Thread& t) {
  return t.states.at(in.src) + " -> " + t.states.at(in.dst) + ": " + render(in.cmd, t);
}

inline std::string render(const Program& p) {
  std::string out = "program " + p.name + "\n";
  out += "domain " + std::to_string(p.domain.size) + "\n";
  if (!p.symbols.empty()) {
    out += "vars";
    for (const auto& s : p.symbols) out += " " + s.first;
    out += "\n";
  }
  for (const auto& t : p.threads) {
    out += "thread " + std::to_string(t.id) + " {\n";
    bool need_init = t.instructions.empty() ? t.states.at(t.initial) != "q0"
                                            : t.instructions.front().src != t.initial;
    if (need_init) out += "  init " + t.states.at(t.initial) + "\n";
    for (const auto& in : t.instructions) out += "  " + render(in, t) + "\n";
    out += "}\n";
  }
  return out;
}

}  // namespace powrob
