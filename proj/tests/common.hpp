#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <powrob/parse.hpp>
#include <powrob/power.hpp>

namespace testing_support {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline powrob::Program litmus(const std::string& name) {
  return powrob::parse_program(read_file(std::string(POWROB_LITMUS_DIR) + "/" + name));
}

// Message passing computation: a and b committed with keys 1 and 2, b reaches thread 2, c
// reads b and d reads the initial x.
inline const char* kSigmaMp =
    "F 1 q0->q1:mem[&x] <- 1\n"
    "S 1 1 1 0\n"
    "P 1 1 1 0\n"
    "F 1 q1->q2:mem[&y] <- 1\n"
    "S 1 2 2 1\n"
    "P 1 1 2 1\n"
    "P 2 1 2 1\n"
    "F 2 q0->q1:r1 <- mem[&y]\n"
    "F 2 q1->q2:r2 <- mem[&x]\n"
    "L 2 1 1\n"
    "L 2 2 0\n"
    "C 2 2\n"
    "C 2 1\n";

// The reshuffled normal-form computation with the same trace; parts split at 4, 6, 8, 9.
inline const char* kGammaMp =
    "F 2 q0->q1:r1 <- mem[&y]\n"
    "F 2 q1->q2:r2 <- mem[&x]\n"
    "F 1 q0->q1:mem[&x] <- 1\n"
    "F 1 q1->q2:mem[&y] <- 1\n"
    "S 1 1 1 0\n"
    "P 1 1 1 0\n"
    "S 1 2 2 1\n"
    "P 1 1 2 1\n"
    "P 2 1 2 1\n"
    "L 2 1 1\n"
    "C 2 1\n"
    "L 2 2 0\n"
    "C 2 2\n";

}  // namespace testing_support
