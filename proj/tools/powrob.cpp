#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include <powrob/fuzz.hpp>
#include <powrob/oracle.hpp>
#include <powrob/parse.hpp>
#include <powrob/robust.hpp>

using namespace powrob;
using nlohmann::json;

namespace {

constexpr int kRobust = 0, kNonRobust = 1, kError = 2;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Program load_program(const std::string& path) {
  try {
    return parse_program(slurp(path));
  } catch (const ParseError& e) {
    throw Failure(path + ":" + e.what());
  }
}

std::vector<int> parse_profile(const std::string& s, const Program& p) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int t = 0;
    try {
      t = std::stoi(item);
    } catch (const std::exception&) {
      throw Failure("bad profile entry '" + item + "'");
    }
    if (t < 1 || t > p.num_threads()) throw Failure("profile names thread " + item + " which does not exist");
    if (std::find(out.begin(), out.end(), t) != out.end()) throw Failure("profile repeats thread " + item);
    out.push_back(t);
  }
  if (out.empty()) throw Failure("empty profile");
  return out;
}

Bounds bounds_for(const Program& p, int bound) {
  if (bound >= 0) return Bounds{bound};
  if (!p.loop_free()) throw Failure("program has loops; --bound is required");
  return default_bounds(p);
}

int jobs_or_default(int jobs) {
  if (jobs > 0) return jobs;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string join(const std::vector<int>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + std::to_string(v[i]);
  return out;
}

// check ----------------------------------------------------------------------

json verdict_json(const Program& p, const RobustnessResult& r, double ms) {
  json j;
  j["program"] = p.name;
  j["verdict"] = verdict_name(r.verdict);
  j["profile"] = r.profile.empty() ? json(nullptr) : json(r.profile);
  j["witness_events"] = json::array();
  if (r.witness)
    for (const auto& e : *r.witness) j["witness_events"].push_back(format_event(p, e));
  else
    for (const auto& e : r.marked) j["witness_events"].push_back(format_marked(p, e));
  if (r.beautiful) {
    json c;
    c["entries"] = json::array();
    c["exits"] = json::array();
    for (const auto& n : r.beautiful->entries) c["entries"].push_back(node_name(p, n));
    for (const auto& n : r.beautiful->exits) c["exits"].push_back(node_name(p, n));
    c["hops"] = r.beautiful->hops;
    j["cycle"] = c;
  } else {
    j["cycle"] = nullptr;
  }
  if (r.cycle) j["hb_cycle"] = format_cycle(p, *r.cycle);
  std::size_t checked = 0;
  for (const auto& s : r.stats)
    if (s.outcome == "empty" || s.outcome == "nonempty" || s.outcome == "budget") ++checked;
  j["stats"] = {{"profiles_checked", checked},
                {"states_explored", r.total_states() + r.probe_states},
                {"wall_ms", static_cast<long long>(ms)},
                {"heads", r.heads}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

int cmd_check(const std::string& path, const std::string& format, std::size_t budget, const std::string& profile,
              int jobs, int heads) {
  Program p = load_program(path);
  CheckOptions opt;
  opt.budget = budget;
  opt.jobs = jobs_or_default(jobs);
  opt.heads = heads;
  if (!profile.empty()) opt.profile = parse_profile(profile, p);
  auto t0 = std::chrono::steady_clock::now();
  auto r = check_robustness(p, opt);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (format == "json") {
    std::cout << verdict_json(p, r, ms).dump(2) << "\n";
  } else {
    std::cout << p.name << ": " << verdict_name(r.verdict);
    if (r.verdict == Verdict::NonRobust) std::cout << " (profile " << join(r.profile) << ")";
    std::cout << "\n";
    if (r.witness) std::cout << "witness computation:\n" << format_computation(p, *r.witness);
    else if (!r.marked.empty()) {
      std::cout << "witness word:\n";
      for (const auto& e : r.marked) std::cout << format_marked(p, e) << "\n";
    }
    if (r.cycle) std::cout << "hb cycle: " << format_cycle(p, *r.cycle) << "\n";
    if (r.beautiful) {
      std::cout << "beautiful cycle:";
      for (std::size_t j = 0; j < r.beautiful->entries.size(); ++j)
        std::cout << " [" << node_name(p, r.beautiful->entries[j]) << ".." << node_name(p, r.beautiful->exits[j])
                  << "] -" << r.beautiful->hops[j] << "->";
      std::cout << "\n";
    }
    if (!r.note.empty()) std::cout << "note: " << r.note << "\n";
    std::cout << "heads " << r.heads << ", states " << r.total_states() + r.probe_states << ", " << static_cast<long long>(ms)
              << " ms\n";
  }
  switch (r.verdict) {
    case Verdict::Robust: return kRobust;
    case Verdict::NonRobust: return kNonRobust;
    default: return kError;
  }
}

// simulate ---------------------------------------------------------------------

int cmd_simulate(const std::string& path, const std::string& format, int bound, bool emit, bool show_outcomes) {
  Program p = load_program(path);
  Bounds b = bounds_for(p, bound);
  json j;
  j["program"] = p.name;
  j["bound"] = b.max_fetch;
  j["computations"] = to_string_u128(count_computations(p, b));
  if (emit) {
    j["emitted"] = json::array();
    enumerate_computations(p, b, [&](const Computation& c, const PowerState&) {
      j["emitted"].push_back(format_computation(p, c));
      return true;
    });
  }
  if (show_outcomes) {
    j["outcomes"] = json::array();
    for (const auto& o : outcomes(p, b)) j["outcomes"].push_back(format_outcome(p, o));
  }
  if (format == "json") {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << p.name << ": " << j["computations"].get<std::string>() << " computations (bound " << b.max_fetch << ")\n";
  if (emit)
    for (std::size_t i = 0; i < j["emitted"].size(); ++i)
      std::cout << "# computation " << i + 1 << "\n" << j["emitted"][i].get<std::string>();
  if (show_outcomes) {
    std::cout << "outcomes:\n";
    for (const auto& o : j["outcomes"]) std::cout << "  " << o.get<std::string>() << "\n";
  }
  return 0;
}

// trace / replay -----------------------------------------------------------------

Computation load_computation(const Program& p, const std::string& path) {
  try {
    return parse_computation(p, slurp(path));
  } catch (const FormatError& e) {
    throw Failure(path + ": " + e.what());
  }
}

int cmd_trace(const std::string& prog, const std::string& comp, const std::string& format, bool hb_cycle) {
  Program p = load_program(prog);
  Computation c = load_computation(p, comp);
  auto r = replay(p, c);
  if (!r.ok) {
    std::string where = r.position >= 0 ? "event " + std::to_string(r.position + 1) : "final state";
    throw Failure("computation does not replay at " + where + ": " + r.error);
  }
  Trace tr = trace_of_state(p, r.state);
  auto cyc = hb_cycle ? find_hb_cycle(tr) : std::nullopt;
  if (format == "json") {
    json j = trace_to_json(p, tr);
    if (hb_cycle) j["hb_cycle"] = cyc ? json(format_cycle(p, *cyc)) : json("acyclic");
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << trace_to_dot(p, tr);
    if (hb_cycle) std::cout << "// hb cycle: " << (cyc ? format_cycle(p, *cyc) : std::string("acyclic")) << "\n";
  }
  return 0;
}

int cmd_replay(const std::string& prog, const std::string& comp, const std::string& format) {
  Program p = load_program(prog);
  Computation c = load_computation(p, comp);
  auto r = replay(p, c);
  if (format == "json") {
    json j{{"program", p.name}, {"events", c.size()}, {"ok", r.ok}};
    if (!r.ok) {
      j["position"] = r.position >= 0 ? json(r.position + 1) : json(nullptr);
      j["error"] = r.error;
    }
    std::cout << j.dump(2) << "\n";
  } else if (r.ok) {
    std::cout << "ok: " << c.size() << " events replay to an accepted state\n";
  } else {
    std::cout << "rejected at " << (r.position >= 0 ? "event " + std::to_string(r.position + 1) : std::string("final state"))
              << ": " << r.error << "\n";
  }
  return r.ok ? 0 : kError;
}

// fuzz -----------------------------------------------------------------------------

int cmd_fuzz(std::uint64_t seed, int count, const FuzzOptions& fo, const std::string& format, std::size_t budget, int jobs,
             const std::string& out_dir) {
  auto corpus = random_corpus(seed, count, fo);
  struct Row {
    bool done = false;
    std::string name;
    Verdict decided = Verdict::Inconclusive;
    OracleVerdict oracle = OracleVerdict::Inconclusive;
    bool agree = false;
  };
  std::vector<Row> rows(corpus.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= corpus.size() || stop) return;
      Program p = parse_program(corpus[i]);
      CheckOptions opt;
      opt.budget = budget;
      auto x = cross_validate(p, opt);
      rows[i] = {true, p.name, x.decided, x.oracle, x.agree};
      if (!x.agree) stop = true;
    }
  };
  jobs = std::min<int>(jobs_or_default(jobs), std::max<std::size_t>(1, corpus.size()));
  std::vector<std::thread> pool;
  for (int k = 0; k < jobs; ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  // The report covers the prefix up to the first disagreement, so it does not depend on jobs.
  std::size_t upto = 0, agreed = 0;
  std::optional<std::size_t> failed;
  for (; upto < rows.size() && rows[upto].done; ++upto) {
    if (!rows[upto].agree) {
      failed = upto++;
      break;
    }
    ++agreed;
  }
  std::string written;
  if (failed) {
    std::filesystem::path f = std::filesystem::path(out_dir) / (rows[*failed].name + ".lit");
    std::ofstream(f) << corpus[*failed];
    written = f.string();
  }
  if (format == "json") {
    json j{{"seed", seed}, {"programs", count}, {"checked", upto}, {"agreed", agreed}, {"results", json::array()}};
    for (std::size_t i = 0; i < upto; ++i)
      j["results"].push_back({{"program", rows[i].name},
                              {"decided", verdict_name(rows[i].decided)},
                              {"oracle", verdict_name(rows[i].oracle)},
                              {"agree", rows[i].agree}});
    if (failed) j["failing_program"] = written;
    std::cout << j.dump(2) << "\n";
  } else {
    for (std::size_t i = 0; i < upto; ++i)
      std::cout << rows[i].name << " " << verdict_name(rows[i].decided) << " oracle " << verdict_name(rows[i].oracle)
                << (rows[i].agree ? "" : "  DISAGREE") << "\n";
    std::cout << agreed << "/" << count << " agree\n";
    if (failed) std::cout << "failing program written to " << written << "\n";
  }
  return failed ? kNonRobust : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness of finite concurrent programs against the Power memory model"};
  app.require_subcommand(1);
  std::string format, file, comp, profile, out_dir = ".";
  std::size_t budget = CheckOptions{}.budget;
  int jobs = 0, bound = -1, heads = 0, count = 200;
  std::uint64_t seed = 42;
  bool emit = false, show_outcomes = false, hb_cycle = false;
  FuzzOptions fo;

  auto* check = app.add_subcommand("check", "decide robustness (exit 0 robust, 1 non-robust, 2 error or budget)");
  check->add_option("program", file, "litmus file")->required();
  check->add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));
  check->add_option("--budget", budget, "explored states per profile (0 = unlimited)");
  check->add_option("--profile", profile, "check only this profile, e.g. 1,2");
  check->add_option("--jobs", jobs, "profiles checked in parallel (default: cores)");
  check->add_option("--heads", heads, "number of heads (default: derived from the program)");

  auto* simulate = app.add_subcommand("simulate", "enumerate Power computations");
  simulate->add_option("program", file, "litmus file")->required();
  simulate->add_option("--bound", bound, "fetches per thread (default: longest path; required with loops)");
  simulate->add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));
  simulate->add_flag("--emit", emit, "print every accepted computation");
  simulate->add_flag("--outcomes", show_outcomes, "print final register valuations");

  auto* trace = app.add_subcommand("trace", "trace of a computation");
  trace->add_option("program", file, "litmus file")->required();
  trace->add_option("computation", comp, "computation file")->required();
  trace->add_option("--format", format, "dot | json")->check(CLI::IsMember({"dot", "json"}));
  trace->add_flag("--hb-cycle", hb_cycle, "also print an hb cycle or \"acyclic\"");

  auto* replay_cmd = app.add_subcommand("replay", "check a computation against the semantics");
  replay_cmd->add_option("program", file, "litmus file")->required();
  replay_cmd->add_option("computation", comp, "computation file")->required();
  replay_cmd->add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));

  auto* fuzz = app.add_subcommand("fuzz", "compare the decision procedure with the oracle on random programs");
  fuzz->add_option("--seed", seed, "corpus seed");
  fuzz->add_option("--count", count, "number of programs");
  fuzz->add_option("--max-threads", fo.max_threads, "threads per program");
  fuzz->add_option("--max-instructions", fo.max_instructions, "instructions per thread");
  fuzz->add_option("--budget", budget, "explored states per profile");
  fuzz->add_option("--jobs", jobs, "programs checked in parallel (default: cores)");
  fuzz->add_option("--out", out_dir, "directory for a failing program");
  fuzz->add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kError;
  }
  try {
    if (check->parsed()) return cmd_check(file, format, budget, profile, jobs, heads);
    if (simulate->parsed()) return cmd_simulate(file, format, bound, emit, show_outcomes);
    if (trace->parsed()) return cmd_trace(file, comp, format, hb_cycle);
    if (replay_cmd->parsed()) return cmd_replay(file, comp, format);
    if (fuzz->parsed()) return cmd_fuzz(seed, count, fo, format, budget, jobs, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "powrob: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
