// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <powrob/enumerate.hpp>
#include <powrob/fuzz.hpp>
#include <powrob/robust.hpp>

using namespace powrob;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Program litmus(const std::string& name) {
  std::ifstream in(std::string(POWROB_LITMUS_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

const char* kSigmaMp =
    "F 1 q0->q1:mem[&x] <- 1\nS 1 1 1 0\nP 1 1 1 0\nF 1 q1->q2:mem[&y] <- 1\nS 1 2 2 1\nP 1 1 2 1\nP 2 1 2 1\n"
    "F 2 q0->q1:r1 <- mem[&y]\nF 2 q1->q2:r2 <- mem[&x]\nL 2 1 1\nL 2 2 0\nC 2 2\nC 2 1\n";
const char* kGammaMp =
    "F 2 q0->q1:r1 <- mem[&y]\nF 2 q1->q2:r2 <- mem[&x]\nF 1 q0->q1:mem[&x] <- 1\nF 1 q1->q2:mem[&y] <- 1\n"
    "S 1 1 1 0\nP 1 1 1 0\nS 1 2 2 1\nP 1 1 2 1\nP 2 1 2 1\nL 2 1 1\nC 2 1\nL 2 2 0\nC 2 2\n";

const Node a{1, 1}, b{1, 2}, c{2, 1}, d{2, 2};

struct Check {
  bool pass = false;
  std::string detail;
};

Check mp_non_robust() {
  Program p = litmus("mp.lit");
  auto t0 = Clock::now();
  auto r = check_robustness(p);
  double s = seconds_since(t0);
  std::ostringstream msg;
  msg << verdict_name(r.verdict) << " in " << s << " s";
  if (r.verdict != Verdict::NonRobust || r.profile != std::vector<int>{1, 2} || !r.witness) return {false, msg.str()};
  Trace tr = trace_of(p, *r.witness);
  bool cycle = tr.po.count({a, b}) && tr.src.count({b, c}) && tr.po.count({c, d}) && tr.cf.count({d, a});
  msg << ", profile 1,2, cycle a-po->b-src->c-po->d-cf->a " << (cycle ? "present" : "missing");
  return {cycle && s < 10, msg.str()};
}

Check sigma_trace() {
  Program p = litmus("mp.lit");
  Computation sg = parse_computation(p, kSigmaMp);
  auto r = replay(p, sg);
  if (!r.ok || sg.size() != 13) return {false, "sigma does not replay: " + r.error};
  Trace tr = trace_of(p, sg);
  const Node sx = Node::init(0), sy = Node::init(1);
  bool eq = tr.nodes == std::vector<Node>{sx, sy, a, b, c, d} && tr.po == std::set<Arc>{{a, b}, {c, d}} &&
            tr.co == std::set<Arc>{{sx, a}, {sy, b}} && tr.src == std::set<Arc>{{b, c}, {sx, d}} &&
            tr.cf == std::set<Arc>{{d, a}};
  return {eq, eq ? "13 events replay; po, co, src, cf match" : "trace differs"};
}

Check gamma_normal_form() {
  Program p = litmus("mp.lit");
  Computation g = parse_computation(p, kGammaMp);
  std::vector<int> cuts{4, 6, 8, 9};
  bool rep = replay(p, g).ok;
  bool nf = is_normal_form(g, cuts);
  bool mem = mh_language_contains(build_mh(p), g, cuts);
  bool same = trace_of(p, g) == trace_of(p, parse_computation(p, kSigmaMp));
  std::ostringstream msg;
  msg << "replay " << rep << ", normal form " << nf << ", member " << mem << ", same trace " << same;
  return {rep && nf && mem && same, msg.str()};
}

Check mh_sampling() {
  Program p = litmus("mp.lit");
  auto m = build_mh(p);
  auto runs = sample_runs(m, 400, 1);
  std::set<Computation> words;
  int bad = 0;
  for (const auto& r : runs) {
    words.insert(r.word);
    if (!replay(p, r.word).ok) ++bad;
  }
  std::ostringstream msg;
  msg << words.size() << " distinct of " << runs.size() << " sampled, " << bad << " fail to replay";
  return {words.size() >= 100 && bad == 0, msg.str()};
}

Check mh_completeness() {
  const std::vector<std::string> suite{"mp.lit", "sb.lit",   "lb.lit", "mp_addr.lit", "disjoint.lit",
                                       "2p2w.lit", "corr.lit", "s.lit",  "r.lit",       "lb_data.lit"};
  std::size_t checked = 0, failures = 0;
  std::string first_failure;
  for (const auto& f : suite) {
    Program p = litmus(f);
    if (p.num_threads() != 2 || p.domain.size != 2 || !p.loop_free()) return {false, f + " is outside the suite's shape"};
    for (const auto& th : p.threads)
      if (th.instructions.size() > 2) return {false, f + " has a thread with more than 2 instructions"};
    auto m = build_mh(p);
    if (m.heads != 5) return {false, f + ": expected 5 heads"};
    std::set<Computation> seen;
    enumerate_computations(p, default_bounds(p), [&](const Computation& comp, const PowerState&) {
      if (!seen.insert(comp).second) return true;
      auto cuts = find_normal_form_split(comp, 5);
      if (!cuts) return true;
      ++checked;
      if (!mh_language_contains(m, comp, *cuts)) {
        if (!failures) first_failure = f + ":\n" + format_computation(p, comp);
        ++failures;
      }
      return true;
    });
  }
  std::ostringstream msg;
  msg << checked << " normal-form computations over 10 programs, " << failures << " not accepted";
  if (failures) msg << "; first:\n" << first_failure;
  return {checked > 0 && failures == 0, msg.str()};
}

Check oracle_agreement(std::vector<std::pair<Program, Verdict>>& decided) {
  auto corpus = random_corpus(42, 200);
  auto t0 = Clock::now();
  int agree = 0;
  std::string first;
  for (const auto& text : corpus) {
    Program p = parse_program(text);
    auto r = check_robustness(p);
    auto o = oracle_check(p, default_bounds(p));
    bool ok = (r.verdict == Verdict::Robust && o.verdict == OracleVerdict::Robust) ||
              (r.verdict == Verdict::NonRobust && o.verdict == OracleVerdict::NonRobust);
    if (ok) ++agree;
    else if (first.empty()) first = p.name;
    decided.push_back({std::move(p), r.verdict});
  }
  double s = seconds_since(t0);
  std::ostringstream msg;
  msg << agree << "/200 agree in " << s << " s";
  if (!first.empty()) msg << "; first disagreement " << first;
  return {agree == 200 && s < 1800, msg.str()};
}

std::vector<char> footprint(const Program& p, int t) {
  std::vector<char> out(p.domain.size, 0);
  for (const auto& in : p.thread(t).instructions)
    if (in.cmd.is_memory()) {
      auto f = possible_addresses(p, in.cmd);
      for (std::size_t i = 0; i < f.size() && i < out.size(); ++i) out[i] |= f[i];
    }
  return out;
}

bool disjoint_footprints(const Program& p) {
  for (int t = 1; t <= p.num_threads(); ++t)
    for (int u = t + 1; u <= p.num_threads(); ++u) {
      auto x = footprint(p, t), y = footprint(p, u);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] && y[i]) return false;
    }
  return true;
}

// Each thread works on its own variable only.
std::string disjoint_program(std::mt19937_64& rng, int k) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const char* vars[] = {"x", "y", "z"};
  int n = pick(2, 3);
  std::ostringstream out;
  out << "program DISJOINT_" << k << "\ndomain 3\nvars x y z\n";
  for (int t = 0; t < n; ++t) {
    out << "thread " << t + 1 << " {\n";
    int len = pick(1, 3);
    std::string last;  // most recently loaded register
    for (int i = 0; i < len; ++i) {
      out << "  q" << i << " -> q" << i + 1 << ": ";
      if (pick(0, 1)) {
        last = "r" + std::to_string(i + 1);
        out << last << " <- mem[&" << vars[t] << "]\n";
      } else {
        out << "mem[&" << vars[t] << "] <- " << (!last.empty() && pick(0, 1) ? last : std::to_string(pick(0, 1))) << "\n";
      }
    }
    out << "}\n";
  }
  return out.str();
}

Check trivial_robustness(const std::vector<std::pair<Program, Verdict>>& decided) {
  int single = 0, disjoint = 0, exceptions = 0;
  auto note = [&](Verdict v) {
    if (v != Verdict::Robust) ++exceptions;
  };
  for (const auto& [p, v] : decided) {
    if (p.num_threads() == 1) {
      ++single;
      note(v);
    } else if (disjoint_footprints(p)) {
      ++disjoint;
      note(v);
    }
  }
  for (const char* f : {"single_thread.lit", "disjoint.lit"}) {
    Program p = litmus(f);
    ++(p.num_threads() == 1 ? single : disjoint);
    note(check_robustness(p).verdict);
  }
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    Program p = parse_program(disjoint_program(rng, k));
    if (!disjoint_footprints(p)) {
      ++exceptions;
      continue;
    }
    ++disjoint;
    note(check_robustness(p).verdict);
  }
  std::ostringstream msg;
  msg << single << " single-thread and " << disjoint << " disjoint-footprint programs, " << exceptions << " not robust";
  return {exceptions == 0 && single > 0 && disjoint > 0, msg.str()};
}

using Toy = MultiheadedAutomaton<int, char>;

Toy random_toy(std::mt19937_64& rng, int states, int heads) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<std::vector<Toy::Step>> out(states);
  std::vector<char> fin(states);
  for (int s = 0; s < states; ++s) {
    fin[s] = pick(0, 2) == 0;
    int k = pick(1, 3);
    for (int i = 0; i < k; ++i) {
      Toy::Step st;
      int len = pick(0, 2);
      for (int l = 0; l < len; ++l) st.labels.push_back({pick(1, heads), static_cast<char>('a' + pick(0, 1))});
      st.next = pick(0, states - 1);
      out[s].push_back(st);
    }
  }
  fin[pick(0, states - 1)] = 1;
  Toy m;
  m.heads = heads;
  m.initial = 0;
  m.successors = [out](const int& s) { return out[s]; };
  m.is_final = [fin](const int& s) { return fin[s] != 0; };
  return m;
}

Nfa<char> random_nfa(std::mt19937_64& rng, int states) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Nfa<char> v;
  for (int q = 0; q < states; ++q) v.add_state(pick(0, 1) == 0);
  v.set_initial(0);
  for (int q = 0; q < states; ++q)
    for (char x : {'a', 'b'}) {
      int k = pick(0, 2);
      for (int i = 0; i < k; ++i) v.add_exact(q, x, pick(0, states - 1));
    }
  return v;
}

template <class M>
std::size_t reachable_states(const M& m) {
  std::unordered_set<typename M::state_type, typename M::hash_type> seen{m.initial};
  std::vector<typename M::state_type> stack{m.initial};
  while (!stack.empty()) {
    auto s = stack.back();
    stack.pop_back();
    for (auto& st : m.successors(s))
      if (seen.insert(st.next).second) stack.push_back(st.next);
  }
  return seen.size();
}

Check intersection_bound() {
  std::mt19937_64 rng(2024);
  int instances = 0, bound_fail = 0, lang_fail = 0;
  std::size_t words = 0;
  for (int qu = 1; qu <= 5; ++qu)
    for (int qv = 1; qv <= 3; ++qv)
      for (int n = 1; n <= 3; ++n)
        for (int rep = 0; rep < 2; ++rep) {
          Toy u = random_toy(rng, qu, n);
          Nfa<char> v = random_nfa(rng, qv);
          auto w = intersect_regular(u, v);
          std::size_t bound = static_cast<std::size_t>(qu);
          for (int i = 0; i < 2 * n; ++i) bound *= static_cast<std::size_t>(qv);
          if (reachable_states(w) > bound + 1) ++bound_fail;
          std::set<std::vector<char>> expect;
          for (const auto& word : enumerate_language(u, 6))
            if (v.accepts(word)) expect.insert(word);
          auto got = enumerate_language(w, 6);
          if (got != expect) ++lang_fail;
          words += expect.size();
          ++instances;
        }
  std::ostringstream msg;
  msg << instances << " instances, " << words << " words up to length 6; bound violations " << bound_fail
      << ", language mismatches " << lang_fail;
  return {bound_fail == 0 && lang_fail == 0, msg.str()};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int k, const char* what, const Check& o) {
    std::cout << "criterion " << k << " [" << what << "]: " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    if (!o.pass) ++failed;
  };
  auto guard = [](auto&& f) -> Check {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };
  std::vector<std::pair<Program, Verdict>> decided;
  report(1, "MP non-robust", guard(mp_non_robust));
  report(2, "sigma trace", guard(sigma_trace));
  report(3, "normal form gamma", guard(gamma_normal_form));
  report(4, "MH sampling", guard(mh_sampling));
  report(5, "MH completeness", guard(mh_completeness));
  report(6, "oracle agreement", guard([&] { return oracle_agreement(decided); }));
  report(7, "trivial robustness", guard([&] { return trivial_robustness(decided); }));
  report(8, "intersection bound", guard(intersection_bound));
  return failed ? 1 : 0;
}
