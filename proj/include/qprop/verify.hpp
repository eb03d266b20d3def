#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qprop/serialize.hpp"

namespace qprop {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0;      // worst residual / observed quantity
  double tolerance = 0;  // threshold the value was held against
  double seconds = 0;    // wall time spent on this check
  std::string note;
};

struct Report {
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

// Deterministic battery of structural and analytic invariants: continued
// fraction identities, tower structure, trace pullback consistency,
// conditional-expectation laws, Leibniz inequalities, the quotient sandwich,
// Kantorovich agreement, truncation/rescaling certificates, isometry
// acceptance and rejection, fusing, and a serialization round-trip.
// Same seed, same report, byte for byte.
Report run_verify_suite(std::uint64_t seed);

Json json_of(const Report& r);

}  // namespace qprop
