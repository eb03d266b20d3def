#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <vector>

#include "qprop/errors.hpp"

namespace qprop {

// Exact arithmetic backing everything structural: dimensions, multiplicities,
// continued-fraction convergents, weight sequences.  Values like q_n grow
// exponentially with the level, so fixed-width integers are not an option.
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline double to_double(const Rat& r) { return r.convert_to<double>(); }
inline double to_double(const Int& n) { return n.convert_to<double>(); }

// Canonical "p/q" form (always with the slash, lowest terms, sign on p).
inline std::string rat_to_string(const Rat& r) {
  return numerator(r).str() + "/" + denominator(r).str();
}

inline Rat rat_from_string(const std::string& s) {
  auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rat(Int(s));
    Int p(s.substr(0, slash));
    Int q(s.substr(slash + 1));
    if (q == 0) throw parse_error("rational with zero denominator: " + s);
    return Rat(p, q);
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception&) {
    throw parse_error("malformed rational: " + s);
  }
}

// Exact double -> rational (every finite double is a dyadic rational).
inline Rat rat_from_double(double x) { return Rat(x); }

}  // namespace qprop
