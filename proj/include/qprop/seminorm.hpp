#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "qprop/rng.hpp"
#include "qprop/trace.hpp"

namespace qprop {

// Which family of Lip-norms a spec realizes on the top level of its tower:
//   cond_exp:  L(x) = max_{m<N} ||x - E_m(x)|| / beta(m)   (exact evaluation)
//   quotient:  L(x) = max_{m<N} S_m(x) / beta(m),  S_m the distance from x
//              to the level-m image (solver-certified interval)
enum class LipKind { cond_exp, quotient };

struct LipSpec {
  Tower tower;
  std::size_t level = 0;             // N: Lip-norm lives on levels[N]
  LipKind kind = LipKind::cond_exp;
  std::optional<TraceWeights> trace; // at level N; required for cond_exp
  std::vector<Rat> beta;             // indices 0..N-1 used; all positive
};

LipSpec make_lip_spec(Tower tower, std::size_t level, LipKind kind,
                      std::optional<TraceWeights> trace, std::vector<Rat> beta);

struct SolverOptions {
  int max_iterations = 5000;
  double target_rel_gap = 1e-6;
  int dual_every = 20;  // iterations between dual lower-bound refreshes
};

// Certified best approximation S_m(x) = min { ||x - b|| : b in level image }.
struct QuotientResult {
  double value = 0;       // achieved distance (a true upper bound)
  double lower = 0;       // certified lower bound
  bool converged = false; // relative gap reached target
  double rel_gap = 0;
  int iterations = 0;
  BlockElement witness;   // feasible minimizer candidate, self-adjoint
};

// Projected subgradient descent over the self-adjoint real span of the
// level-m image: subgradient from the top spectral pair, Polyak steps against
// the running lower bound, multi-start from the expectation point and zero.
class QuotientSolver {
 public:
  QuotientSolver(const Tower& t, std::size_t onto_level, std::size_t from_level);

  QuotientResult solve(const BlockElement& x, const SolverOptions& opts = {}) const;

  const ConditionalExpectation& hs_projection() const { return hs_; }

 private:
  struct BasisElement {
    BlockElement image;    // alpha of the self-adjoint basis element
    double hs_norm2;
  };
  std::size_t onto_, from_;
  ConditionalExpectation hs_;  // uniform-trace expectation = HS projection
  std::vector<BasisElement> basis_;

  BlockElement assemble(const std::vector<double>& y) const;
  std::vector<double> to_coords(const BlockElement& coeffs) const;
  double dual_bound(const BlockElement& residual, double gap) const;
};

struct LipValue {
  double lower = 0;
  double upper = 0;
  bool converged = true;

  double value() const { return upper; }
};

// Evaluator caching the per-level expectations/solvers of one spec.
class LipEvaluator {
 public:
  explicit LipEvaluator(LipSpec spec, SolverOptions opts = {});

  const LipSpec& spec() const { return spec_; }
  std::size_t level() const { return spec_.level; }
  double beta(std::size_t m) const { return beta_dbl_[m]; }
  const Rat& beta_exact(std::size_t m) const { return spec_.beta[m]; }

  // Lip-norm of a self-adjoint element of the top level (tol_sa = 1e-10).
  LipValue value(const BlockElement& x) const;

  // ||x - E_m(x)|| for the spec trace (cond_exp kind only).
  double expectation_term(std::size_t m, const BlockElement& x) const;
  QuotientResult quotient_term(std::size_t m, const BlockElement& x) const;

  const ConditionalExpectation& expectation(std::size_t m) const;
  const QuotientSolver& solver(std::size_t m) const;

  // Random self-adjoint element at the top level, entries ~ N(0,1).
  BlockElement random_sa(CounterRng& rng) const;

  // Deterministic sample of the Lip unit ball: normalized Gaussian elements
  // augmented with 0, +/-1, scalar shifts and per-level image directions.
  // Feasibility uses the certified upper bound for the quotient kind.
  std::vector<BlockElement> sample_ball(std::size_t count, CounterRng& rng) const;

 private:
  LipSpec spec_;
  SolverOptions opts_;
  std::vector<double> beta_dbl_;
  std::vector<ConditionalExpectation> exps_;   // cond_exp kind, per m
  std::vector<QuotientSolver> solvers_;        // quotient kind, per m
};

// Quasi-Leibniz property check: for sampled self-adjoint pairs verifies
//   L(a o b), L({a,b}) <= C (||a|| L(b) + ||b|| L(a)) + D L(a) L(b) + slack.
// Quotient-kind values enter the left side by their certified upper bound
// and the right side by their certified lower bound.
struct LeibnizReport {
  bool passed = true;
  // Smallest slack-adjusted margin rhs + slack - lhs over all products
  // checked (negative = violation); +inf when no pairs were checked.
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t pairs = 0;
  std::size_t failures = 0;
};

LeibnizReport quasi_leibniz_check(const LipEvaluator& eval, double C, double D,
                                  std::size_t pairs, CounterRng& rng, double slack = 1e-7);

}  // namespace qprop
