#pragma once

#include <stdexcept>
#include <string>

namespace qprop {

// Shape/dimension mismatches: wrong block count, incompatible embedding, ...
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Violated value precondition: non-unital embedding, weights off the simplex,
// element not self-adjoint within tolerance, quotient term out of range, ...
struct domain_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A certified computation could not reach the requested accuracy
// (e.g. a continued fraction too short to enclose its value tightly).
struct precision_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A structural hypothesis of a chained bound fails (family not fusing at the
// requested depth, member index below the fusing threshold, ...).
struct hypothesis_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or version-incompatible serialized input.
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qprop
