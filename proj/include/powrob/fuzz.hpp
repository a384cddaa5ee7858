#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "parse.hpp"

namespace powrob {

struct FuzzOptions {
  int max_threads = 3;
  int max_instructions = 3;  // per thread
  int domain = 2;
  double branch_chance = 0.1;   // an extra alternative transition out of a control state
  double reg_addr_chance = 0.2;  // loads/stores addressing through a register
};

// Seeded random loop-free program in litmus text. Same seed, same text.
inline std::string random_program_text(std::mt19937_64& rng, const FuzzOptions& o, const std::string& name) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double c) { return std::uniform_real_distribution<double>(0, 1)(rng) < c; };
  const char* vars[] = {"x", "y", "z", "w"};
  int nvars = std::min(o.domain, 4);
  std::ostringstream out;
  out << "program " << name << "\ndomain " << o.domain << "\nvars";
  for (int v = 0; v < nvars; ++v) out << ' ' << vars[v];
  out << "\n";
  int nthreads = pick(1, o.max_threads);
  for (int t = 1; t <= nthreads; ++t) {
    out << "thread " << t << " {\n";
    int len = pick(0, o.max_instructions);
    std::vector<std::string> defined;
    auto operand = [&]() -> std::string {
      if (!defined.empty() && chance(0.5)) return defined[pick(0, static_cast<int>(defined.size()) - 1)];
      return std::to_string(pick(0, o.domain - 1));
    };
    auto address = [&]() -> std::string {
      if (!defined.empty() && chance(o.reg_addr_chance)) return defined[pick(0, static_cast<int>(defined.size()) - 1)];
      return std::string("&") + vars[pick(0, nvars - 1)];
    };
    auto command = [&](int k) -> std::string {
      int kind = pick(0, 99);
      std::string r = "r" + std::to_string(k + 1);
      if (kind < 40) {
        std::string c = r + " <- mem[" + address() + "]";
        defined.push_back(r);
        return c;
      }
      if (kind < 80) return "mem[" + address() + "] <- " + operand();
      if (kind < 90 && !defined.empty()) {
        std::string e = operand() + " + " + operand();
        defined.push_back(r);
        return r + " <- " + e;
      }
      const char* ops[] = {" == ", " != "};
      return "assume(" + operand() + ops[pick(0, 1)] + std::to_string(pick(0, o.domain - 1)) + ")";
    };
    int emitted = 0;
    for (int k = 0; k < len; ++k) {
      if (emitted >= o.max_instructions) break;
      std::string c = command(k);
      out << "  q" << k << " -> q" << k + 1 << ": " << c << "\n";
      ++emitted;
      if (emitted < o.max_instructions && k + 1 < len && chance(o.branch_chance)) {
        // alternative that skips the next instruction
        out << "  q" << k << " -> q" << k + 2 << ": assume(" << operand() << " == " << pick(0, o.domain - 1) << ")\n";
        ++emitted;
      }
    }
    out << "}\n";
  }
  return out.str();
}

inline std::vector<std::string> random_corpus(std::uint64_t seed, int count, const FuzzOptions& o = {}) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (int i = 0; i < count; ++i) out.push_back(random_program_text(rng, o, "FUZZ_" + std::to_string(seed) + "_" + std::to_string(i)));
  return out;
}

}  // namespace powrob
