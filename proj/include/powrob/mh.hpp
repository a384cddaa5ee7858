#pragma once

#include <algorithm>
#include <array>
#include <bitset>
#include <climits>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "multihead.hpp"
#include "power.hpp"

namespace powrob {

// Relation of the LEAVE key to the ENTER key of a hop, carried by whichever endpoint is
// written second.
enum class Cmp : std::uint8_t { None, Diff, Less, Equal, Greater };

inline const char* cmp_name(Cmp c) {
  switch (c) {
    case Cmp::None: return "";
    case Cmp::Diff: return "diff";
    case Cmp::Less: return "<";
    case Cmp::Equal: return "=";
    case Cmp::Greater: return ">";
  }
  return "?";
}

struct MarkedEvent {
  Event::Kind kind = Event::Kind::Load;  // Load or Prop
  int tid = 0;                           // Load: issuing thread, Prop: destination
  int store_tid = 0;                     // Prop: thread of the store
  int instr = -1;                        // instruction id of the load or store
  int addr = 0;
  int key = 0;  // Prop: store key, Load: key read; ranks at the time of writing
  bool enter = false;
  bool leave = false;
  Cmp cmp_prev = Cmp::None;  // on ENTER: previous position's LEAVE key vs this key
  Cmp cmp_next = Cmp::None;  // on LEAVE: this key vs next position's ENTER key

  int owner() const { return kind == Event::Kind::Load ? tid : store_tid; }
  bool is_store() const { return kind == Event::Kind::Prop; }
  auto tie() const { return std::tie(kind, tid, store_tid, instr, addr, key, enter, leave, cmp_prev, cmp_next); }
  friend bool operator==(const MarkedEvent& a, const MarkedEvent& b) { return a.tie() == b.tie(); }
  friend bool operator<(const MarkedEvent& a, const MarkedEvent& b) { return a.tie() < b.tie(); }
};

inline std::string format_marked(const Program& p, const MarkedEvent& e) {
  std::string s;
  if (e.kind == Event::Kind::Load)
    s = "L " + std::to_string(e.tid) + " [" + render(p.instr(e.tid, e.instr), p.thread(e.tid)) + "] key " +
        std::to_string(e.key);
  else
    s = "P " + std::to_string(e.tid) + " <- " + std::to_string(e.store_tid) + " [" +
        render(p.instr(e.store_tid, e.instr), p.thread(e.store_tid)) + "] key " + std::to_string(e.key);
  if (e.enter) s += std::string(" ENTER") + (e.cmp_prev != Cmp::None ? std::string("(") + cmp_name(e.cmp_prev) + ")" : "");
  if (e.leave) s += std::string(" LEAVE") + (e.cmp_next != Cmp::None ? std::string("(") + cmp_name(e.cmp_next) + ")" : "");
  return s;
}

// Rank of every key in the multiset; equal keys share a rank and the smallest has rank 0.
inline std::vector<int> normalize_keys(const std::vector<Rational>& keys) {
  std::vector<Rational> u = keys;
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  std::vector<int> out;
  for (const auto& k : keys) out.push_back(static_cast<int>(std::lower_bound(u.begin(), u.end(), k) - u.begin()));
  return out;
}

// Annotation of the transition generating an instruction.
struct MhStepInfo {
  int tid = 0, instr = 0, h2 = 0, h3 = 0;
};
inline int encode_step_info(int t, int id, int h2, int h3) { return ((t * 4096 + id) * 64 + h2) * 64 + h3; }
inline std::optional<MhStepInfo> decode_step_info(int info) {
  if (info < 0) return std::nullopt;
  MhStepInfo r;
  r.h3 = info % 64;
  info /= 64;
  r.h2 = info % 64;
  info /= 64;
  r.instr = info % 4096;
  r.tid = info / 4096;
  return r;
}

inline int default_heads(const Program& p) { return p.num_threads() + 3; }

// Generator of the multiheaded automaton of a program. Sym = Event gives the full automaton
// (all events, absolute keys in fixed point); Sym = MarkedEvent gives the marked automaton for
// one profile (loads and propagations only, keys renumbered after every transition).
//
// A state is a byte string. Per (thread, address, head) it holds the current memory value and
// key of that part, the guessed value and key at the start of the part (-1 until first used),
// and the early-read entry (-1 none, -2 blocked, else a value) with its store key.
template <class Sym>
class MhGenerator {
public:
  static constexpr bool kFull = std::is_same_v<Sym, Event>;
  using M = MultiheadedAutomaton<std::string, Sym>;
  using Step = typename M::Step;
  using Guide = typename M::Guide;
  using Label = typename M::Label;
  static constexpr int kInf = INT_MAX;
  static constexpr int kTop = -2;
  static constexpr int kAny = -3;  // value no future load can observe
  static constexpr int kUnit = kFull ? 65536 : 4;
  static constexpr int W = kFull ? 4 : 1;
  static constexpr int kMaxRanks = 31;

  // `marks[j]` restricts the (entry, exit) instruction pairs of profile position j; empty means
  // every memory instruction followed by itself or a later one.
  MhGenerator(Program p, int heads, std::vector<int> profile = {}, std::vector<std::vector<std::pair<int, int>>> marks = {})
      : p_(std::move(p)), profile_(std::move(profile)), pairs_(std::move(marks)) {
    T_ = p_.num_threads();
    A_ = p_.domain.size;
    n_ = heads > 0 ? heads : default_heads(p_);
    if (n_ > 60) throw std::invalid_argument("too many heads");
    R_ = 1;
    for (const auto& th : p_.threads) {
      R_ = std::max<int>(R_, static_cast<int>(th.registers.size()));
      if (th.states.size() > 120) throw std::invalid_argument("too many control states");
    }
    if (A_ > 100) throw std::invalid_argument("domain too large");
    acyclic_ = p_.loop_free();
    pos_of_.assign(T_ + 1, -1);
    for (std::size_t j = 0; j < profile_.size(); ++j) pos_of_.at(profile_[j]) = static_cast<int>(j);
    analyse();
    analyse_marks();
    layout();
    build_initial();
  }

  const Program& program() const { return p_; }
  int heads() const { return n_; }
  const std::vector<int>& profile() const { return profile_; }
  std::string initial() const { return std::string(1, '\0'); }

  std::vector<Step> successors(const std::string& s, const Guide* g = nullptr) const {
    std::vector<Step> out;
    if (s.size() == 1) {
      out.push_back({{}, running_, -1});
      return out;
    }
    GuideData gd;
    const GuideData* gp = nullptr;
    if (g) {
      gd.g = g;
      gd.keys.push_back(0);
      for (const auto& part : *g->parts)
        for (const auto& e : part)
          if constexpr (kFull) {
            if (e.kind == Event::Kind::StoreCommit)
              if (auto k = to_fixed(e.key)) gd.keys.push_back(*k);
          }
      std::sort(gd.keys.begin(), gd.keys.end());
      gd.keys.erase(std::unique(gd.keys.begin(), gd.keys.end()), gd.keys.end());
      gp = &gd;
    }
    Work w{s, {}, g ? g->pos : std::vector<int>{}, {}};
    if (g8(s, o_pact_)) {
      pending_steps(w, gp, out);
      return out;
    }
    if constexpr (!kFull) {
      // Register-only steps commute with every step of the other threads.
      if (acyclic_)
      for (int t = 1; t <= T_; ++t)
        if (int q = g8(s, o_ctrl_ + t - 1); local_only(s, t, q)) {
          for (int id : outgoing_[t][q]) instr_steps(w, t, id, gp, out);
          return out;
        }
    }
    for (int t = 1; t <= T_; ++t)
      for (int id : outgoing_[t][g8(s, o_ctrl_ + t - 1)]) instr_steps(w, t, id, gp, out);
    return out;
  }

  bool is_final(const std::string& s) const {
    if (s.size() == 1 || g8(s, o_pact_)) return false;
    for (std::size_t j = 0; j < profile_.size(); ++j)
      if (g8(s, o_phase_ + static_cast<int>(j)) != 2) return false;
    for (int t = 1; t <= T_; ++t)
      for (int a = 0; a < A_; ++a)
        if (!closed(s, t, a)) return false;
    return true;
  }

  // Inspection helpers (running states only).
  std::string describe(const std::string& s) const {
    if (s.size() == 1) return "init";
    std::string out;
    auto num = [](int v) { return v == kAny ? std::string("*") : std::to_string(v); };
    for (int t = 1; t <= T_; ++t) {
      out += "T" + std::to_string(t) + " q" + std::to_string(g8(s, o_ctrl_ + t - 1)) + " regs";
      for (int r = 0; r < R_; ++r)
        out += " " + std::to_string(g8(s, off_rv(t, r))) + "/" + std::to_string(g8(s, off_rp(t, r))) + "/" +
               std::to_string(g8(s, off_rm(t, r)));
      out += " asm " + std::to_string(g8(s, o_assume_ + t - 1)) + " acomp " + std::to_string(g8(s, o_acomp_ + t - 1));
      for (int a = 0; a < A_; ++a) {
        out += "\n  a" + std::to_string(a) + " acomm " + std::to_string(g8(s, off_acomm(t, a))) + " lk " +
               std::to_string(getk(s, off_lk(t, a))) + " |";
        for (int h = 1; h <= n_; ++h) {
          out += " [";
          if (getk(s, off_gk(t, a, h)) >= 0) out += num(g8(s, off_gv(t, a, h))) + "@" + std::to_string(getk(s, off_gk(t, a, h))) + ">";
          if (getk(s, off_mk(t, a, h)) >= 0) out += num(g8(s, off_mv(t, a, h))) + "@" + std::to_string(getk(s, off_mk(t, a, h)));
          if (int e = g8(s, off_ev(t, a, h)); e != -1) out += " e" + (e == kTop ? std::string("T") : std::to_string(e) + "@" + std::to_string(getk(s, off_ek(t, a, h))));
          out += "]";
        }
      }
      out += "\n";
    }
    for (std::size_t j = 0; j < profile_.size(); ++j) {
      int jj = static_cast<int>(j);
      out += "pos" + std::to_string(j) + " phase " + std::to_string(g8(s, o_phase_ + jj)) + " enter " +
             std::to_string(getk(s, o_pek_ + jj * W)) + "@a" + std::to_string(g8(s, o_pea_ + jj)) + " leave " +
             std::to_string(getk(s, o_plk_ + jj * W)) + "@a" + std::to_string(g8(s, o_pla_ + jj)) + "\n";
    }
    if (g8(s, o_pact_))
      out += "pending t" + std::to_string(g8(s, o_pt_)) + " a" + std::to_string(g8(s, o_pa_)) + " v" +
             std::to_string(g8(s, o_pv_)) + " k" + std::to_string(getk(s, o_pk_)) + " h3 " +
             std::to_string(g8(s, o_ph3_)) + " mask " + std::to_string(g8(s, o_pmask_) & 0xff) + "\n";
    return out;
  }
  int control(const std::string& s, int t) const { return g8(s, o_ctrl_ + t - 1); }
  std::pair<int, int> memory(const std::string& s, int t, int a, int h) const {
    return {g8(s, off_mv(t, a, h)), getk(s, off_mk(t, a, h))};
  }
  std::pair<int, int> guess(const std::string& s, int t, int a, int h) const {
    return {g8(s, off_gv(t, a, h)), getk(s, off_gk(t, a, h))};
  }
  std::vector<int> keys_of(const std::string& s, int a) const { return existing(s, a, {}); }
  int phase(const std::string& s, int j) const { return g8(s, o_phase_ + j); }
  bool pending(const std::string& s) const { return s.size() > 1 && g8(s, o_pact_); }
  Rational to_rational(int k) const { return Rational(k, kUnit); }
  static std::optional<int> to_fixed(const Rational& r) {
    __int128 x = static_cast<__int128>(r.num()) * kUnit;
    if (x % r.den() != 0) return std::nullopt;
    x /= r.den();
    if (x < 0 || x > INT32_MAX / 2) return std::nullopt;
    return static_cast<int>(x);
  }

private:
  struct Work {
    std::string s;
    std::vector<Label> labels;
    std::vector<int> pos;
    std::vector<std::pair<int, int>> fresh;  // (addr, key) committed in this transition
  };
  struct GuideData {
    const Guide* g = nullptr;
    std::vector<int> keys;
  };

  Program p_;
  std::vector<int> profile_;
  std::vector<int> pos_of_;
  std::vector<std::vector<std::pair<int, int>>> pairs_;  // per profile position
  std::vector<std::vector<std::vector<char>>> instr_ahead_;  // [t][q][id]: id can still execute
  int T_ = 0, A_ = 0, n_ = 0, R_ = 0;
  int live_cap_ = 0;
  bool acyclic_ = false;
  std::vector<std::vector<std::vector<int>>> outgoing_;  // [t][q]
  std::vector<std::vector<std::uint64_t>> live_regs_;     // [t][q]
  std::vector<std::vector<char>> mem_ahead_, load_ahead_;
  std::vector<std::vector<std::bitset<128>>> loads_ahead_, access_ahead_;  // [t][q] possible addresses
  std::vector<std::vector<std::vector<int>>> stores_ahead_;  // [t][q][a] most stores to a on a path
  int o_ctrl_, o_rv_, o_rp_, o_rm_, o_assume_, o_acomp_, o_count_, o_acomm_, o_lk_;
  int o_mv_, o_mk_, o_gv_, o_gk_, o_ev_, o_ek_, o_live_;
  int o_phase_, o_pent_, o_pek_, o_pea_, o_plk_, o_pla_;
  int o_pact_, o_pt_, o_pa_, o_pv_, o_pk_, o_ph3_, o_pmask_, o_pidx_;
  int size_ = 0;
  std::string running_;

  static int g8(const std::string& s, int o) { return static_cast<signed char>(s[o]); }
  static void s8(std::string& s, int o, int v) { s[o] = static_cast<char>(static_cast<signed char>(v)); }
  static int getk(const std::string& s, int o) {
    if constexpr (W == 1) {
      return static_cast<signed char>(s[o]);
    } else if constexpr (W == 2) {
      std::int16_t v;
      std::memcpy(&v, s.data() + o, 2);
      return v;
    } else {
      std::int32_t v;
      std::memcpy(&v, s.data() + o, 4);
      return v;
    }
  }
  static void setk(std::string& s, int o, int k) {
    if constexpr (W == 1) {
      s[o] = static_cast<char>(static_cast<signed char>(k));
    } else if constexpr (W == 2) {
      auto v = static_cast<std::int16_t>(k);
      std::memcpy(s.data() + o, &v, 2);
    } else {
      auto v = static_cast<std::int32_t>(k);
      std::memcpy(s.data() + o, &v, 4);
    }
  }

  int tah(int t, int a, int h) const { return ((t - 1) * A_ + a) * n_ + h - 1; }
  int off_rv(int t, int r) const { return o_rv_ + (t - 1) * R_ + r; }
  int off_rp(int t, int r) const { return o_rp_ + (t - 1) * R_ + r; }
  int off_rm(int t, int r) const { return o_rm_ + (t - 1) * R_ + r; }
  int off_acomm(int t, int a) const { return o_acomm_ + (t - 1) * A_ + a; }
  int off_lk(int t, int a) const { return o_lk_ + ((t - 1) * A_ + a) * W; }
  int off_mv(int t, int a, int h) const { return o_mv_ + tah(t, a, h); }
  int off_mk(int t, int a, int h) const { return o_mk_ + tah(t, a, h) * W; }
  int off_gv(int t, int a, int h) const { return o_gv_ + tah(t, a, h); }
  int off_gk(int t, int a, int h) const { return o_gk_ + tah(t, a, h) * W; }
  int off_ev(int t, int a, int h) const { return o_ev_ + tah(t, a, h); }
  int off_ek(int t, int a, int h) const { return o_ek_ + tah(t, a, h) * W; }

  void analyse() {
    outgoing_.assign(T_ + 1, {});
    live_regs_.assign(T_ + 1, {});
    mem_ahead_.assign(T_ + 1, {});
    load_ahead_.assign(T_ + 1, {});
    loads_ahead_.assign(T_ + 1, {});
    access_ahead_.assign(T_ + 1, {});
    stores_ahead_.assign(T_ + 1, {});
    for (int t = 1; t <= T_; ++t) {
      const Thread& th = p_.thread(t);
      int q = static_cast<int>(th.states.size());
      for (int s = 0; s < q; ++s) outgoing_[t].push_back(th.outgoing(s));
      auto& lr = live_regs_[t];
      auto& ma = mem_ahead_[t];
      auto& la = load_ahead_[t];
      lr.assign(q, 0);
      ma.assign(q, 0);
      la.assign(q, 0);
      bool changed = true;
      while (changed) {
        changed = false;
        for (const auto& in : th.instructions) {
          std::uint64_t use = 0;
          for (int r : in.cmd.read_regs()) use |= 1ULL << r;
          std::uint64_t after = lr[in.dst];
          if (in.cmd.writes_reg()) after &= ~(1ULL << in.cmd.reg);
          std::uint64_t v = lr[in.src] | use | after;
          char m = ma[in.src] | ma[in.dst] | (in.cmd.is_memory() ? 1 : 0);
          char l = la[in.src] | la[in.dst] | (in.cmd.kind == Command::Kind::Load ? 1 : 0);
          if (v != lr[in.src] || m != ma[in.src] || l != la[in.src]) {
            lr[in.src] = v;
            ma[in.src] = m;
            la[in.src] = l;
            changed = true;
          }
        }
      }
      if (th.registers.size() > 63) throw std::invalid_argument("too many registers");
      auto& lda = loads_ahead_[t];
      auto& aca = access_ahead_[t];
      lda.assign(q, {});
      aca.assign(q, {});
      changed = true;
      while (changed) {
        changed = false;
        for (const auto& in : th.instructions) {
          std::bitset<128> here;
          if (in.cmd.is_memory()) {
            if (in.cmd.addr_regs().empty())
              here.set(eval_with(in.cmd.addr, A_, [](int) { return 0; }));
            else
              for (int a = 0; a < A_; ++a) here.set(a);
          }
          auto l = lda[in.src] | lda[in.dst] | (in.cmd.kind == Command::Kind::Load ? here : std::bitset<128>{});
          auto c = aca[in.src] | aca[in.dst] | here;
          if (l != lda[in.src] || c != aca[in.src]) {
            lda[in.src] = l;
            aca[in.src] = c;
            changed = true;
          }
        }
      }
      auto& sa = stores_ahead_[t];
      if (th.longest_path() < 0) {
        sa.assign(q, std::vector<int>(A_, 1000));
      } else {
        sa.assign(q, std::vector<int>(A_, -1));
        auto go = [&](auto&& self, int x) -> const std::vector<int>& {
          if (sa[x][0] >= 0) return sa[x];
          std::vector<int> best(A_, 0);
          for (int i : th.outgoing(x)) {
            const auto& in = th.instructions[i];
            std::vector<int> v = self(self, in.dst);
            if (in.cmd.kind == Command::Kind::Store) {
              if (in.cmd.addr_regs().empty())
                ++v[eval_with(in.cmd.addr, A_, [](int) { return 0; })];
              else
                for (int a = 0; a < A_; ++a) ++v[a];
            }
            for (int a = 0; a < A_; ++a) best[a] = std::max(best[a], v[a]);
          }
          sa[x] = best;
          return sa[x];
        };
        for (int x = 0; x < q; ++x) go(go, x);
      }
    }
    if constexpr (kFull) {
      int stores = 0;
      for (const auto& th : p_.threads)
        for (const auto& in : th.instructions) stores += in.cmd.kind == Command::Kind::Store;
      live_cap_ = p_.loop_free() ? std::max(stores, 1) : 16;
    }
  }

  void analyse_marks() {
    instr_ahead_.assign(T_ + 1, {});
    for (int t = 1; t <= T_; ++t) {
      const Thread& th = p_.thread(t);
      int nq = static_cast<int>(th.states.size());
      if (th.instructions.size() > 250) throw std::invalid_argument("too many instructions");
      auto& ia = instr_ahead_[t];
      ia.assign(nq, std::vector<char>(th.instructions.size(), 0));
      for (int q = 0; q < nq; ++q) {
        std::vector<char> seen(nq, 0);
        std::vector<int> stack{q};
        seen[q] = 1;
        while (!stack.empty()) {
          int x = stack.back();
          stack.pop_back();
          for (int i : th.outgoing(x)) {
            ia[q][i] = 1;
            int d = th.instructions[i].dst;
            if (!seen[d]) {
              seen[d] = 1;
              stack.push_back(d);
            }
          }
        }
      }
    }
    if (pairs_.empty()) {
      pairs_.resize(profile_.size());
      for (std::size_t j = 0; j < profile_.size(); ++j) {
        const Thread& th = p_.thread(profile_[j]);
        for (const auto& e : th.instructions)
          for (const auto& l : th.instructions)
            if (e.cmd.is_memory() && l.cmd.is_memory() && (e.id == l.id || instr_ahead_[profile_[j]][e.dst][l.id]))
              pairs_[j].push_back({e.id, l.id});
      }
    }
    if (pairs_.size() != profile_.size()) throw std::invalid_argument("marker pairs do not match the profile");
  }

  bool pair_ok(int j, int e, int l) const {
    return std::find(pairs_[j].begin(), pairs_[j].end(), std::pair<int, int>{e, l}) != pairs_[j].end();
  }
  // Some entry of position j can still execute from control q.
  bool enter_ahead(int j, int q) const {
    for (auto [e, l] : pairs_[j])
      if (instr_ahead_[profile_[j]][q][e]) return true;
    return false;
  }
  // Some exit matching entry e can still execute from control q.
  bool leave_ahead(int j, int q, int e) const {
    for (auto [e2, l] : pairs_[j])
      if (e2 == e && instr_ahead_[profile_[j]][q][l]) return true;
    return false;
  }
  bool markable(const std::string& s, int j, int q) const {
    switch (g8(s, o_phase_ + j)) {
      case 0: return enter_ahead(j, q);
      case 1: return leave_ahead(j, q, g8(s, o_pent_ + j) & 0xff);
      default: return true;
    }
  }

  void layout() {
    int off = 1;
    auto take = [&](int bytes) {
      int o = off;
      off += bytes;
      return o;
    };
    int X = T_ * A_ * n_;
    o_ctrl_ = take(T_);
    o_rv_ = take(T_ * R_);
    o_rp_ = take(T_ * R_);
    o_rm_ = take(T_ * R_);
    o_assume_ = take(T_);
    o_acomp_ = take(T_);
    o_count_ = kFull ? take(T_) : -1;
    o_acomm_ = take(T_ * A_);
    o_lk_ = take(T_ * A_ * W);
    o_mv_ = take(X);
    o_mk_ = take(X * W);
    o_gv_ = take(X);
    o_gk_ = take(X * W);
    o_ev_ = take(X);
    o_ek_ = take(X * W);
    o_live_ = kFull ? take(live_cap_ * W) : take(A_ * 4);
    int m = static_cast<int>(profile_.size());
    o_phase_ = take(m);
    o_pent_ = take(m);
    o_pek_ = take(m * W);
    o_pea_ = take(m);
    o_plk_ = take(m * W);
    o_pla_ = take(m);
    o_pact_ = take(1);
    o_pt_ = take(1);
    o_pa_ = take(1);
    o_pv_ = take(1);
    o_pk_ = take(W);
    o_ph3_ = take(1);
    o_pmask_ = take(1);
    o_pidx_ = take(1);
    size_ = off;
    if (T_ > 7) throw std::invalid_argument("too many threads");
  }

  void clear_pending(std::string& s) const {
    for (int o : {o_pact_, o_pt_, o_pa_, o_pv_, o_ph3_, o_pmask_, o_pidx_}) s8(s, o, 0);
    setk(s, o_pk_, -1);
  }

  void build_initial() {
    std::string s(size_, '\0');
    s8(s, 0, 1);
    for (int t = 1; t <= T_; ++t) {
      s8(s, o_ctrl_ + t - 1, p_.thread(t).initial);
      for (int r = 0; r < R_; ++r) {
        s8(s, off_rp(t, r), 1);
        s8(s, off_rm(t, r), 1);
      }
      s8(s, o_assume_ + t - 1, 1);
      s8(s, o_acomp_ + t - 1, 1);
      for (int a = 0; a < A_; ++a) {
        s8(s, off_acomm(t, a), 1);
        setk(s, off_lk(t, a), -1);
        for (int h = 1; h <= n_; ++h) {
          s8(s, off_mv(t, a, h), h == 1 ? 0 : -1);
          setk(s, off_mk(t, a, h), h == 1 ? 0 : -1);
          s8(s, off_gv(t, a, h), h == 1 ? 0 : -1);
          setk(s, off_gk(t, a, h), h == 1 ? 0 : -1);
          s8(s, off_ev(t, a, h), -1);
          setk(s, off_ek(t, a, h), -1);
        }
      }
    }
    if constexpr (kFull)
      for (int k = 0; k < live_cap_; ++k) setk(s, o_live_ + k * W, -1);
    for (std::size_t j = 0; j < profile_.size(); ++j) {
      setk(s, o_pek_ + static_cast<int>(j) * W, -1);
      setk(s, o_plk_ + static_cast<int>(j) * W, -1);
      s8(s, o_pea_ + static_cast<int>(j), -1);
      s8(s, o_pla_ + static_cast<int>(j), -1);
    }
    clear_pending(s);
    running_ = s;
  }

  // All instructions leaving q are assignments or assumes, and one of them can execute.
  bool local_only(const std::string& s, int t, int q) const {
    bool enabled = false;
    for (int id : outgoing_[t][q]) {
      const Command& c = p_.instr(t, id).cmd;
      if (c.is_memory()) return false;
      if (c.kind == Command::Kind::Assign ||
          eval_with(c.value, A_, [&](int r) { return g8(s, off_rv(t, r)); }) != 0)
        enabled = true;
    }
    return enabled;
  }

  // Every materialized part of (t,a) starts where the previous one ended.
  bool closed(const std::string& s, int t, int a) const {
    int fv = g8(s, off_mv(t, a, 1)), fk = getk(s, off_mk(t, a, 1));
    for (int h = 2; h <= n_; ++h) {
      int gk = getk(s, off_gk(t, a, h));
      if (gk < 0) continue;
      int gv = g8(s, off_gv(t, a, h));
      if (gk != fk || (gv != fv && gv != kAny && fv != kAny)) return false;
      fv = g8(s, off_mv(t, a, h));
      fk = getk(s, off_mk(t, a, h));
    }
    return true;
  }

  // Keys ---------------------------------------------------------------------

  // Sorted distinct keys of address a referenced by the state (0 included).
  std::vector<int> existing(const std::string& s, int a, const std::vector<std::pair<int, int>>& fresh) const {
    std::vector<int> ks;
    ks.reserve(16);
    ks.push_back(0);
    auto add = [&](int k) {
      if (k >= 0) ks.push_back(k);
    };
    for (int t = 1; t <= T_; ++t) {
      add(getk(s, off_lk(t, a)));
      for (int h = 1; h <= n_; ++h) {
        add(getk(s, off_mk(t, a, h)));
        add(getk(s, off_gk(t, a, h)));
        add(getk(s, off_ek(t, a, h)));
      }
    }
    for (std::size_t j = 0; j < profile_.size(); ++j) {
      int jj = static_cast<int>(j);
      if (g8(s, o_pea_ + jj) == a) add(getk(s, o_pek_ + jj * W));
      if (g8(s, o_pla_ + jj) == a) add(getk(s, o_plk_ + jj * W));
    }
    if (g8(s, o_pact_) && g8(s, o_pa_) == a) add(getk(s, o_pk_));
    for (const auto& [fa, k] : fresh)
      if (fa == a) add(k);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
  }

  bool is_live(const Work& w, int a, int k) const {
    if constexpr (kFull) {
      (void)a;
      for (int j = 0; j < live_cap_; ++j)
        if (getk(w.s, o_live_ + j * W) == k) return true;
      return false;
    } else {
      for (const auto& [fa, fk] : w.fresh)
        if (fa == a && fk == k) return true;
      if (k % kUnit) return false;
      int r = k / kUnit;
      if (r > kMaxRanks) return false;
      return (w.s[o_live_ + a * 4 + r / 8] >> (r % 8)) & 1;
    }
  }

  bool add_live(Work& w, int a, int k) const {
    if constexpr (kFull) {
      (void)a;
      for (int j = 0; j < live_cap_; ++j)
        if (getk(w.s, o_live_ + j * W) < 0) {
          setk(w.s, o_live_ + j * W, k);
          std::vector<int> v;
          for (int i = 0; i <= j; ++i) v.push_back(getk(w.s, o_live_ + i * W));
          std::sort(v.begin(), v.end());
          for (int i = 0; i <= j; ++i) setk(w.s, o_live_ + i * W, v[i]);
          return true;
        }
      return false;
    } else {
      w.fresh.push_back({a, k});
      return true;
    }
  }

  int max_live(const Work& w) const {
    int m = 0;
    if constexpr (kFull)
      for (int j = 0; j < live_cap_; ++j) m = std::max(m, getk(w.s, o_live_ + j * W));
    return m;
  }

  // A fresh key strictly between lo and hi, avoiding committed keys.
  std::optional<int> between(const Work& w, int a, int lo, int hi) const {
    if (hi - lo < 2) return std::nullopt;
    int m = lo + (hi - lo) / 2;
    while (is_live(w, a, m)) {
      if (m - lo < 2) return std::nullopt;
      m = lo + (m - lo) / 2;
    }
    return m;
  }

  int above(const Work& w, int top) const {
    if constexpr (kFull) return (std::max(top, max_live(w)) / kUnit + 1) * kUnit;
    return top + kUnit;
  }

  // Known value of the store with key k of address a, or -1.
  int value_of_key(const std::string& s, int a, int k) const {
    if (k == 0) return 0;
    for (int t = 1; t <= T_; ++t)
      for (int h = 1; h <= n_; ++h) {
        if (getk(s, off_mk(t, a, h)) == k && g8(s, off_mv(t, a, h)) != kAny) return g8(s, off_mv(t, a, h));
        if (getk(s, off_gk(t, a, h)) == k && g8(s, off_gv(t, a, h)) != kAny) return g8(s, off_gv(t, a, h));
        if (g8(s, off_ev(t, a, h)) >= 0 && getk(s, off_ek(t, a, h)) == k) return g8(s, off_ev(t, a, h));
      }
    if (g8(s, o_pact_) && g8(s, o_pa_) == a && getk(s, o_pk_) == k) return g8(s, o_pv_);
    return -1;
  }

  std::vector<int> guess_keys(const Work& w, int a, int lo, int hi, const GuideData* gd) const {
    std::vector<int> out;
    if (gd) {
      for (int k : gd->keys)
        if (lo <= k && k <= hi) out.push_back(k);
      return out;
    }
    auto ks = existing(w.s, a, w.fresh);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (lo <= ks[i] && ks[i] <= hi) out.push_back(ks[i]);
      if (i + 1 < ks.size() && lo <= ks[i] && ks[i + 1] <= hi)
        if (auto m = between(w, a, ks[i], ks[i + 1])) out.push_back(*m);
    }
    if (hi == kInf) out.push_back(above(w, ks.back()));
    return out;
  }

  // Keys a store of a can take. Once the remaining stores are all needed for keys already
  // guessed, the marked automaton only commits those.
  std::vector<int> store_keys(const Work& w, int a, int cur, int hi, int v) const {
    std::vector<int> out;
    auto ks = existing(w.s, a, w.fresh);
    bool fresh_ok = true;
    if constexpr (!kFull) {
      int spare = 0;
      for (int u = 1; u <= T_; ++u) spare += stores_ahead_[u][g8(w.s, o_ctrl_ + u - 1)][a];
      for (int k : ks)
        if (k != 0 && !is_live(w, a, k)) --spare;
      fresh_ok = spare >= 0;
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      int k = ks[i];
      if (cur < k && k <= hi && !is_live(w, a, k)) {
        int known = value_of_key(w.s, a, k);
        if (known < 0 || known == v) out.push_back(k);
      }
      if (!fresh_ok) continue;
      if (i + 1 < ks.size() && cur <= k && ks[i + 1] <= hi)
        if (auto m = between(w, a, k, ks[i + 1])) out.push_back(*m);
    }
    if (hi == kInf && fresh_ok) out.push_back(above(w, ks.back()));
    return out;
  }

  // Calls f for every way of fixing the guessed start of part h of (t,a); once if fixed. The
  // marked automaton skips committed keys no propagation can still bring to the end of the
  // previous part. When no load of t reads the part, it continues the previous part: dropping
  // propagations that no load observes only relaxes the keys of t's own stores.
  template <class F>
  void with_part(const Work& w, int t, int a, int h, const GuideData* gd, bool reads, int slack, F&& f) const {
    if (h == 1 || getk(w.s, off_gk(t, a, h)) >= 0) {
      f(w);
      return;
    }
    int lo = 0, below = 1;
    for (int x = h - 1; x >= 1; --x)
      if (x == 1 || getk(w.s, off_gk(t, a, x)) >= 0) {
        lo = getk(w.s, off_mk(t, a, x));
        below = x;
        break;
      }
    int hi = kInf;
    for (int x = h + 1; x <= n_; ++x)
      if (int g = getk(w.s, off_gk(t, a, x)); g >= 0) {
        hi = g;
        break;
      }
    bool open = false, fresh_ok = true;
    std::vector<int> ks;
    if constexpr (!kFull) {
      open = !reads && !loads_ahead_[t][g8(w.s, o_ctrl_ + t - 1)][a];
      ks = existing(w.s, a, w.fresh);
      int spare = slack;
      for (int u = 1; u <= T_; ++u) spare += stores_ahead_[u][g8(w.s, o_ctrl_ + u - 1)][a];
      for (int k : ks)
        if (k != 0 && !is_live(w, a, k)) --spare;
      fresh_ok = spare > 0;
    }
    for (int k : guess_keys(w, a, lo, hi, gd)) {
      if constexpr (!kFull)
        if (open && k != lo) continue;
      if constexpr (!kFull)
        if (!fresh_ok && !std::binary_search(ks.begin(), ks.end(), k)) continue;
      if constexpr (!kFull)
        if (k != lo && k != 0 && is_live(w, a, k) &&
            !(g8(w.s, o_pact_) && g8(w.s, o_pa_) == a && getk(w.s, o_pk_) == k &&
              ((g8(w.s, o_pmask_) >> t) & 1) && below >= g8(w.s, o_ph3_)))
          continue;
      int known = value_of_key(w.s, a, k);
      for (int v = 0; v < A_; ++v) {
        if (known >= 0 && v != known) continue;
        if (open && v > 0) break;
        Work x = w;
        s8(x.s, off_gv(t, a, h), open ? kAny : v);
        setk(x.s, off_gk(t, a, h), k);
        s8(x.s, off_mv(t, a, h), open ? kAny : v);
        setk(x.s, off_mk(t, a, h), k);
        f(x);
      }
    }
  }

  // Emission ----------------------------------------------------------------

  bool emit(Work& w, int h, Sym x, const GuideData* gd) const {
    if (gd) {
      const auto& part = (*gd->g->parts)[h - 1];
      int& p = w.pos[h - 1];
      if (p >= static_cast<int>(part.size()) || !(part[p] == x)) return false;
      ++p;
    }
    w.labels.emplace_back(h, std::move(x));
    return true;
  }

  const Sym* peek(const Work& w, int h, const GuideData* gd) const {
    const auto& part = (*gd->g->parts)[h - 1];
    int p = w.pos[h - 1];
    return p < static_cast<int>(part.size()) ? &part[p] : nullptr;
  }

  // Marker choices for memory instruction id of t moving it to control q, restricted to the
  // allowed (entry, exit) pairs of t's profile position.
  std::vector<std::pair<bool, bool>> marks(const std::string& s, int t, int id, int q) const {
    int j = pos_of_[t];
    if (j < 0) return {{false, false}};
    std::vector<std::pair<bool, bool>> out;
    switch (g8(s, o_phase_ + j)) {
      case 0: {
        if (enter_ahead(j, q)) out.push_back({false, false});
        bool later = false;
        for (auto [e, l] : pairs_[j])
          if (e == id && l != id && instr_ahead_[t][q][l]) later = true;
        if (later) out.push_back({true, false});
        if (pair_ok(j, id, id)) out.push_back({true, true});
        return out;
      }
      case 1: {
        int e = g8(s, o_pent_ + j) & 0xff;
        if (leave_ahead(j, q, e)) out.push_back({false, false});
        if (pair_ok(j, e, id)) out.push_back({false, true});
        return out;
      }
      default: return {{false, false}};
    }
  }

  // A non-memory step of t to control q that would leave t unable to place its markers.
  bool must_leave_first(const std::string& s, int t, int q) const {
    int j = pos_of_[t];
    return j >= 0 && !markable(s, j, q);
  }

  void apply_marks(Work& x, int t, int id, bool en, bool lv, int a, int k, MarkedEvent& ev) const {
    if (!en && !lv) return;
    int j = pos_of_[t], m = static_cast<int>(profile_.size());
    int jp = (j + m - 1) % m, jn = (j + 1) % m;
    auto rel = [](int ka, int aa, int kb, int ab) {
      if (aa != ab) return Cmp::Diff;
      return ka < kb ? Cmp::Less : ka == kb ? Cmp::Equal : Cmp::Greater;
    };
    if (en) {
      ev.enter = true;
      if (jp != j && g8(x.s, o_phase_ + jp) == 2)
        ev.cmp_prev = rel(getk(x.s, o_plk_ + jp * W), g8(x.s, o_pla_ + jp), k, a);
      setk(x.s, o_pek_ + j * W, k);
      s8(x.s, o_pea_ + j, a);
      s8(x.s, o_pent_ + j, id);
      s8(x.s, o_phase_ + j, 1);
    }
    if (lv) {
      ev.leave = true;
      if (jn == j ? !en : g8(x.s, o_phase_ + jn) >= 1)
        ev.cmp_next = rel(k, a, getk(x.s, o_pek_ + jn * W), g8(x.s, o_pea_ + jn));
      setk(x.s, o_plk_ + j * W, k);
      s8(x.s, o_pla_ + j, a);
      s8(x.s, o_phase_ + j, 2);
    }
  }

  // Transitions ---------------------------------------------------------------

  void instr_steps(const Work& w0, int t, int id, const GuideData* gd, std::vector<Step>& out) const {
    const Instruction& in = p_.instr(t, id);
    const Command& c = in.cmd;
    if constexpr (!kFull)
      if (!c.is_memory() && must_leave_first(w0.s, t, in.dst)) return;
    Work w = w0;
    int idx = 0;
    if constexpr (kFull) {
      idx = g8(w.s, o_count_ + t - 1) + 1;
      if (idx > 127) return;
      s8(w.s, o_count_ + t - 1, idx);
      if (!emit(w, 1, Event::fetch(t, id), gd)) return;
    }
    s8(w.s, o_ctrl_ + t - 1, in.dst);
    const std::string& s0 = w0.s;
    auto val = [&](const Expr& e) { return eval_with(e, A_, [&](int r) { return g8(s0, off_rv(t, r)); }); };
    auto comp = [&](const std::vector<int>& rs) {
      int h = 1;
      for (int r : rs) h = std::max(h, g8(s0, off_rp(t, r)));
      return h;
    };
    int hc = g8(s0, o_assume_ + t - 1);
    for (int r : c.read_regs()) hc = std::max(hc, g8(s0, off_rm(t, r)));

    switch (c.kind) {
      case Command::Kind::Assign:
      case Command::Kind::Assume: {
        int v = val(c.value);
        if (c.kind == Command::Kind::Assume && v == 0) return;
        int h2 = comp(c.value_regs());
        int lo3 = std::max(h2, hc);
        for (int h3 = lo3; h3 <= (kFull ? n_ : lo3); ++h3) {
          Work x = w;
          if constexpr (kFull)
            if (!emit(x, h3, Event::commit(t, idx), gd)) continue;
          if (c.kind == Command::Kind::Assign) {
            s8(x.s, off_rv(t, c.reg), v);
            s8(x.s, off_rp(t, c.reg), h2);
            s8(x.s, off_rm(t, c.reg), h3);
          } else {
            s8(x.s, o_assume_ + t - 1, h3);
          }
          finish(x, encode_step_info(t, id, h2, h3), out);
        }
        return;
      }
      case Command::Kind::Load: {
        int a = val(c.addr);
        int ha = comp(c.addr_regs());
        for (int h2 = ha; h2 <= n_; ++h2) {
          int e = g8(w.s, off_ev(t, a, h2));
          if (e == kTop) continue;
          auto go = [&](const Work& x, int v, int k) {
            int lk = getk(x.s, off_lk(t, a));
            if (lk >= 0 && k < lk) return;
            int lo3 = std::max({h2, hc, g8(x.s, off_acomm(t, a)), g8(x.s, o_acomp_ + t - 1)});
            auto cont = [&](const Work& y) {
              for (int h3 = lo3; h3 <= (kFull ? n_ : lo3); ++h3) {
                Work z = y;
                if constexpr (kFull)
                  if (!emit(z, h3, Event::commit(t, idx), gd)) continue;
                s8(z.s, off_rv(t, c.reg), v);
                s8(z.s, off_rp(t, c.reg), h2);
                s8(z.s, off_rm(t, c.reg), h3);
                s8(z.s, o_acomp_ + t - 1, std::max(g8(z.s, o_acomp_ + t - 1), ha));
                s8(z.s, off_acomm(t, a), h3);
                setk(z.s, off_lk(t, a), k);
                finish(z, encode_step_info(t, id, h2, h3), out);
              }
            };
            if constexpr (kFull) {
              Work y = x;
              if (emit(y, h2, Event::load(t, idx, a), gd)) cont(y);
            } else {
              for (auto [en, lv] : marks(x.s, t, id, in.dst)) {
                Work y = x;
                MarkedEvent ev;
                ev.kind = Event::Kind::Load;
                ev.tid = t;
                ev.instr = id;
                ev.addr = a;
                ev.key = k;
                apply_marks(y, t, id, en, lv, a, k, ev);
                if (emit(y, h2, ev, gd)) cont(y);
              }
            }
          };
          if (e >= 0)
            go(w, e, getk(w.s, off_ek(t, a, h2)));
          else
            with_part(w, t, a, h2, gd, true, 0,
                      [&](const Work& x) { go(x, g8(x.s, off_mv(t, a, h2)), getk(x.s, off_mk(t, a, h2))); });
        }
        return;
      }
      case Command::Kind::Store: {
        int a = val(c.addr), v = val(c.value);
        int ha = comp(c.addr_regs());
        int h2 = std::max(ha, comp(c.value_regs()));
        int lo3 = std::max({h2, hc, g8(w.s, o_acomp_ + t - 1), g8(w.s, off_acomm(t, a))});
        for (int h3 = lo3; h3 <= n_; ++h3) {
          with_part(w, t, a, h3, gd, false, 1, [&](const Work& x) {
            int cur = getk(x.s, off_mk(t, a, h3));
            int hi = kInf;
            if (h3 < n_ && getk(x.s, off_gk(t, a, h3 + 1)) >= 0) hi = getk(x.s, off_gk(t, a, h3 + 1));
            std::vector<int> ks;
            if constexpr (kFull) {
              if (gd) {
                const Event* e = peek(x, h3, gd);
                if (e && e->kind == Event::Kind::StoreCommit && e->tid == t && e->index == idx && e->addr == a)
                  if (auto k = to_fixed(e->key); k && cur < *k && *k <= hi && !is_live(x, a, *k)) ks.push_back(*k);
              } else {
                ks = store_keys(x, a, cur, hi, v);
              }
            } else {
              ks = store_keys(x, a, cur, hi, v);
            }
            for (int k : ks) {
              Work y = x;
              for (int h = 1; h <= n_; ++h) {
                if (h < h2) {
                  s8(y.s, off_ev(t, a, h), kTop);
                  setk(y.s, off_ek(t, a, h), -1);
                } else if (h < h3) {
                  s8(y.s, off_ev(t, a, h), v);
                  setk(y.s, off_ek(t, a, h), k);
                }
                if (h < ha)
                  for (int a2 = 0; a2 < A_; ++a2)
                    if (a2 != a && g8(y.s, off_ev(t, a2, h)) >= 0) {
                      s8(y.s, off_ev(t, a2, h), kTop);
                      setk(y.s, off_ek(t, a2, h), -1);
                    }
              }
              s8(y.s, o_acomp_ + t - 1, std::max(g8(y.s, o_acomp_ + t - 1), ha));
              s8(y.s, off_acomm(t, a), h3);
              if (!add_live(y, a, k)) continue;
              s8(y.s, off_mv(t, a, h3), v);
              setk(y.s, off_mk(t, a, h3), k);
              auto cont = [&](Work z) {
                if (T_ > 1) {
                  s8(z.s, o_pact_, 1);
                  s8(z.s, o_pt_, t);
                  s8(z.s, o_pa_, a);
                  s8(z.s, o_pv_, v);
                  setk(z.s, o_pk_, k);
                  s8(z.s, o_ph3_, h3);
                  s8(z.s, o_pmask_, ((1 << (T_ + 1)) - 2) & ~(1 << t));
                  s8(z.s, o_pidx_, kFull ? idx : id);
                }
                finish(z, encode_step_info(t, id, h2, h3), out);
              };
              if constexpr (kFull) {
                if (emit(y, h3, Event::store_commit(t, idx, to_rational(k), a), gd) &&
                    emit(y, h3, Event::prop(t, t, idx, a), gd))
                  cont(y);
              } else {
                for (auto [en, lv] : marks(y.s, t, id, in.dst)) {
                  Work z = y;
                  MarkedEvent ev;
                  ev.kind = Event::Kind::Prop;
                  ev.tid = ev.store_tid = t;
                  ev.instr = id;
                  ev.addr = a;
                  ev.key = k;
                  apply_marks(z, t, id, en, lv, a, k, ev);
                  if (emit(z, h3, ev, gd)) cont(z);
                }
              }
            }
          });
        }
        return;
      }
    }
  }

  // Propagation of the pending store to the remaining threads: the full automaton picks them in
  // any order, the marked one in increasing thread order.
  void pending_steps(const Work& w, const GuideData* gd, std::vector<Step>& out) const {
    int t = g8(w.s, o_pt_), a = g8(w.s, o_pa_), v = g8(w.s, o_pv_), k = getk(w.s, o_pk_);
    int h3 = g8(w.s, o_ph3_), mask = g8(w.s, o_pmask_) & 0xff, idx = g8(w.s, o_pidx_);
    {
      Work x = w;
      clear_pending(x.s);
      finish(x, -1, out);
    }
    for (int t2 = 1; t2 <= T_; ++t2) {
      if (!((mask >> t2) & 1) || retired(w.s, t2, a)) continue;
      for (int h = h3; h <= n_; ++h) {
        with_part(w, t2, a, h, gd, false, 0, [&](const Work& x) {
          if (!(getk(x.s, off_mk(t2, a, h)) < k)) return;
          if (h < n_) {
            int g = getk(x.s, off_gk(t2, a, h + 1));
            if (g >= 0 && k > g) return;
          }
          Work y = x;
          s8(y.s, off_mv(t2, a, h), v);
          setk(y.s, off_mk(t2, a, h), k);
          bool ok;
          if constexpr (kFull) {
            ok = emit(y, h, Event::prop(t2, t, idx, a), gd);
          } else {
            MarkedEvent ev;
            ev.kind = Event::Kind::Prop;
            ev.tid = t2;
            ev.store_tid = t;
            ev.instr = idx;
            ev.addr = a;
            ev.key = k;
            ok = emit(y, h, ev, gd);
          }
          if (!ok) return;
          int rest = kFull ? mask & ~(1 << t2) : mask & ~((2 << t2) - 1);
          if (rest == 0)
            clear_pending(y.s);
          else
            s8(y.s, o_pmask_, rest);
          finish(y, -1, out);
        });
      }
    }
  }

  // Canonical values for fields no future transition reads. The marked automaton also forgets
  // values no load will observe and closed views of addresses the thread no longer accesses.
  void canonicalize(std::string& s) const {
    for (int t = 1; t <= T_; ++t) {
      int q = g8(s, o_ctrl_ + t - 1);
      std::uint64_t live = live_regs_[t][q];
      for (int r = 0; r < R_; ++r)
        if (!((live >> r) & 1)) {
          s8(s, off_rv(t, r), 0);
          s8(s, off_rp(t, r), 1);
          s8(s, off_rm(t, r), 1);
        }
      for (int a = 0; a < A_; ++a) {
        if (!loads_ahead_[t][q][a]) {
          setk(s, off_lk(t, a), -1);
          for (int h = 1; h <= n_; ++h) {
            s8(s, off_ev(t, a, h), -1);
            setk(s, off_ek(t, a, h), -1);
            if constexpr (!kFull) {
              if (getk(s, off_mk(t, a, h)) >= 0) s8(s, off_mv(t, a, h), kAny);
              if (getk(s, off_gk(t, a, h)) >= 0) s8(s, off_gv(t, a, h), kAny);
            }
          }
        }
        if (!access_ahead_[t][q][a]) {
          s8(s, off_acomm(t, a), 1);
          if constexpr (!kFull)
            if (closed(s, t, a)) reset_view(s, t, a);
        }
      }
      if (!mem_ahead_[t][q]) s8(s, o_acomp_ + t - 1, 1);
      if (outgoing_[t][q].empty()) s8(s, o_assume_ + t - 1, 1);
    }
  }

  void reset_view(std::string& s, int t, int a) const {
    for (int h = 1; h <= n_; ++h) {
      s8(s, off_mv(t, a, h), h == 1 ? kAny : -1);
      setk(s, off_mk(t, a, h), h == 1 ? 0 : -1);
      s8(s, off_gv(t, a, h), h == 1 ? kAny : -1);
      setk(s, off_gk(t, a, h), h == 1 ? 0 : -1);
    }
  }

  // A view the marked automaton no longer propagates into: no load of the thread can observe a
  // further propagation, so dropping it keeps the computation valid and its trace unchanged.
  bool retired(const std::string& s, int t, int a) const {
    if constexpr (kFull) return false;
    return !loads_ahead_[t][g8(s, o_ctrl_ + t - 1)][a] && closed(s, t, a);
  }

  // Renumbers the keys of every address to multiples of kUnit, keeping their order, and drops
  // committed keys no longer referenced.
  void normalize(Work& w) const {
    std::string& s = w.s;
    for (int a = 0; a < A_; ++a) {
      auto ks = existing(s, a, {});
      if (static_cast<int>(ks.size()) > kMaxRanks) throw std::length_error("too many distinct coherence keys");
      std::uint8_t bits[4] = {};
      for (std::size_t r = 0; r < ks.size(); ++r)
        if (is_live(w, a, ks[r])) bits[r / 8] |= static_cast<std::uint8_t>(1u << (r % 8));
      std::array<std::uint8_t, 256> rank{};
      for (std::size_t r = 0; r < ks.size(); ++r) rank[ks[r]] = static_cast<std::uint8_t>(r);
      auto map = [&](int k) { return k < 0 ? k : rank[k] * kUnit; };
      auto fix = [&](int o) { setk(s, o, map(getk(s, o))); };
      for (int t = 1; t <= T_; ++t) {
        fix(off_lk(t, a));
        for (int h = 1; h <= n_; ++h) {
          fix(off_mk(t, a, h));
          fix(off_gk(t, a, h));
          fix(off_ek(t, a, h));
        }
      }
      for (std::size_t j = 0; j < profile_.size(); ++j) {
        int jj = static_cast<int>(j);
        if (g8(s, o_pea_ + jj) == a) fix(o_pek_ + jj * W);
        if (g8(s, o_pla_ + jj) == a) fix(o_plk_ + jj * W);
      }
      if (g8(s, o_pact_) && g8(s, o_pa_) == a) fix(o_pk_);
      std::memcpy(s.data() + o_live_ + a * 4, bits, 4);
    }
    w.fresh.clear();
  }

  bool hopeless(const std::string& s) const {
    for (std::size_t j = 0; j < profile_.size(); ++j) {
      int t = profile_[j];
      if (!markable(s, static_cast<int>(j), g8(s, o_ctrl_ + t - 1))) return true;
    }
    return false;
  }

  // No accepting state is reachable: a part must still end at a store that can no longer
  // propagate there, or more uncommitted keys are referenced than stores remain.
  bool dead(const Work& w) const {
    const std::string& s = w.s;
    bool pend = g8(s, o_pact_);
    int pa = g8(s, o_pa_), pk = getk(s, o_pk_), ph3 = g8(s, o_ph3_), pmask = g8(s, o_pmask_) & 0xff;
    for (int a = 0; a < A_; ++a) {
      for (int t = 1; t <= T_; ++t) {
        int last = 1, fk = getk(s, off_mk(t, a, 1));
        for (int h = 2; h <= n_; ++h) {
          int gk = getk(s, off_gk(t, a, h));
          if (gk < 0) continue;
          if (gk != fk && gk != 0 && is_live(w, a, gk) &&
              !(pend && pa == a && pk == gk && ((pmask >> t) & 1) && last >= ph3))
            return true;
          last = h;
          fk = getk(s, off_mk(t, a, h));
        }
      }
      int uncommitted = 0;
      for (int k : existing(s, a, {}))
        if (k != 0 && !is_live(w, a, k)) ++uncommitted;
      if (uncommitted) {
        int room = 0;
        for (int t = 1; t <= T_; ++t) room += stores_ahead_[t][g8(s, o_ctrl_ + t - 1)][a];
        if (uncommitted > room) return true;
      }
    }
    return false;
  }

  void finish(Work& x, int info, std::vector<Step>& out) const {
    if constexpr (!kFull)
      if (hopeless(x.s)) return;
    canonicalize(x.s);
    if constexpr (!kFull) {
      normalize(x);
      if (dead(x)) return;
    }
    out.push_back({std::move(x.labels), std::move(x.s), info});
  }
};

using FullMh = MultiheadedAutomaton<std::string, Event>;
using MarkedMh = MultiheadedAutomaton<std::string, MarkedEvent>;

template <class Sym>
MultiheadedAutomaton<std::string, Sym> wrap_generator(std::shared_ptr<const MhGenerator<Sym>> g) {
  MultiheadedAutomaton<std::string, Sym> m;
  m.heads = g->heads();
  m.initial = g->initial();
  m.successors = [g](const std::string& s) { return g->successors(s); };
  m.is_final = [g](const std::string& s) { return g->is_final(s); };
  m.guided = [g](const std::string& s, const typename MultiheadedAutomaton<std::string, Sym>::Guide& gd) {
    return g->successors(s, &gd);
  };
  return m;
}

// Automaton generating the normal-form computations of p with `heads` parts.
inline FullMh build_mh(const Program& p, int heads = 0) {
  return wrap_generator(std::make_shared<const MhGenerator<Event>>(p, heads));
}

// Marked automaton for one profile: writes loads and propagations, with one ENTER and one
// LEAVE marker per profile thread.
inline MarkedMh build_mh_marked(const Program& p, const std::vector<int>& profile, int heads = 0,
                                std::vector<std::vector<std::pair<int, int>>> marks = {}) {
  return wrap_generator(std::make_shared<const MhGenerator<MarkedEvent>>(p, heads, profile, std::move(marks)));
}

}  // namespace powrob
