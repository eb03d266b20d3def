#pragma once

#include <cstddef>
#include <vector>

#include "qprop/errors.hpp"

namespace qprop {

// Dense two-phase primal simplex with Bland's rule for
//   max c.x  subject to  A x <= b,  x >= 0,
// with b of arbitrary sign.  Deterministic pivoting; sized for the small
// polytopes arising from commutative Lip-ball constraints.
struct LpResult {
  enum class Status { optimal, infeasible, unbounded } status;
  double value = 0;
  std::vector<double> x;
};

LpResult solve_lp(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                  const std::vector<double>& b);

}  // namespace qprop
