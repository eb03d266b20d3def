#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qprop/lp.hpp"
#include "qprop/seminorm.hpp"

namespace qprop {

// Monge-Kantorovich distance between two tracial states for a spec whose
// top level is commutative (all blocks 1x1):
//   mk(phi, psi) = max { |phi(a) - psi(a)| : L(a) <= 1 },
// solved exactly as a linear program over the potential a (the Lip-ball of
// either kind is a polytope cut out by per-level fiber constraints).
struct KantorovichExact {
  double value = 0;
  std::vector<double> potential;  // optimal a, gauge-fixed by a_0 = 0
};

KantorovichExact kantorovich_commutative_exact(const LipEvaluator& eval,
                                               const TraceWeights& phi, const TraceWeights& psi);

// Certified lower bound for any spec: best witness among Lip-ball samples,
// improved by supergradient ascent with radial re-projection
// a -> a / max(1, L(a)); every iterate stays feasible, so the reported value
// never exceeds the true distance (up to evaluator tolerance).
struct KantorovichEstimate {
  double value = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  BlockElement witness;
};

KantorovichEstimate kantorovich_lower_bound(const LipEvaluator& eval, const TraceWeights& phi,
                                            const TraceWeights& psi, std::size_t samples,
                                            std::uint64_t seed);

// mk diameter bound 2 beta(0) (states agree on the unit; the rest of the
// ball lies within beta(0) of the scalars).
Rat diameter_upper_bound(const LipSpec& spec);

// Bridge seminorm with unit pivot on a common ambient algebra:
// || pi_a(a) - pi_b(b) ||.  The unit pivot makes the bridge height zero, so
// the bridge length is its reach.
double bridge_seminorm(const MultiplicityEmbedding& pi_a, const MultiplicityEmbedding& pi_b,
                       const BlockElement& a, const BlockElement& b);

// Certificate that the identity bridge between the level-m truncation and
// the full top level has reach at most beta(m): for sampled a with L(a)<=1,
// E_m(a) is a Lip-ball partner within beta(m).
struct BetaBoundCertificate {
  std::size_t level_m = 0;
  Rat claimed;                   // beta(m)
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double worst_ball_residual = 0;  // max over samples of L(E_m a) - 1
  double worst_norm_residual = 0;  // max over samples of ||a - E_m a|| - beta(m)
  double tolerance = 1e-9;
  bool verified = false;
};

BetaBoundCertificate beta_bound_certificate(const LipEvaluator& eval, std::size_t m,
                                            std::size_t samples, std::uint64_t seed);

// Empirical two-sided rescaling bound between two Lip-norms on the same
// algebra (towers agreeing through the spec level): on unit-sphere samples
// of a complement of the scalars,
//   m_s  = min over samples of min(l_member, l_limit),
//   eps  = max over samples of |l_member - l_limit| / m_s,
// and for sampled a = r b + t 1 the explicit rescaled partners are
// re-checked against both inequalities (member->limit and limit->member).
struct RescaleBound {
  double m_s = 0;
  double eps = 0;
  std::size_t sphere_samples = 0;
  std::size_t partner_samples = 0;
  std::uint64_t seed = 0;
  double worst_distance_margin = 0;  // min over rechecks of rhs - lhs (>= -tol)
  double worst_lip_margin = 0;
  double tolerance = 0;
  bool verified = false;
  bool empirical = true;  // sampled estimate, not a proof
};

RescaleBound rescaling_bridge_bound(const LipEvaluator& member, const LipEvaluator& limit,
                                    std::size_t sphere_samples, std::size_t partner_samples,
                                    std::uint64_t seed);

// Restriction of a spec to a lower level: tower prefix, beta prefix, and the
// exact pullback of its trace.
LipSpec truncate_spec(const LipSpec& spec, std::size_t level);

// Family of specs fusing to a limit, with a dominating weight sequence
// (B(n) >= beta(n) for every member, exact rational comparison).
struct FusingFamily {
  std::vector<LipSpec> members;
  LipSpec limit;
  std::vector<Rat> dominator;
};

struct ChainLevelTerm {
  std::size_t level = 0;
  Rat two_b;
  double bridge = 0;
  double total = 0;
};

struct ChainBound {
  std::size_t level = 0;   // N
  std::size_t member = 0;  // k
  std::size_t c_n = 0;     // fusing threshold at N
  Rat two_b;               // 2 B(N), exact
  double bridge = 0;       // rescaling term at level N
  double total = 0;
  double trace_distance = 0;  // weight distance of member vs limit at N
  std::vector<ChainLevelTerm> per_level;
  bool verified = false;
};

// Propinquity bound along the fusing chain: 2 B(N) plus the rescaling bridge
// between member k and the limit on the shared level-N algebra.  Hypotheses
// checked: fusing at N with k >= c_N, dominator covering every beta.
ChainBound propinquity_chain_bound(const FusingFamily& family, std::size_t level, std::size_t k,
                                   std::size_t sphere_samples, std::uint64_t seed);

// Tower isomorphism candidate: a block permutation per level (image index of
// each source block) and optional per-block unitaries at the top level.
struct IsometryMap {
  std::vector<std::vector<std::size_t>> perms;
  std::vector<CMatrix> top_unitaries;  // empty = identity
};

BlockElement apply_isometry(const IsometryMap& map, const BlockElement& x,
                            const AlgebraShape& target);

// Exact isometry onto the relabeled tower: the given block permutations per
// level (perms[n][j] = target index of source block j) together with the
// top-level permutation unitaries that align the nested layout of the source
// tower with the nested layout of the relabeled one.  Without those
// unitaries a relabeling is only unitarily equivalent, not equal, and the
// Lip-norms would disagree.
IsometryMap relabeling_isometry(const Tower& source,
                                const std::vector<std::vector<std::size_t>>& perms);

struct IsometryCertificate {
  bool structure_ok = false;
  bool beta_ok = false;
  bool trace_ok = false;
  double max_deviation = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  std::string failure;  // empty when verified
  bool verified = false;
};

// Quantum-isometry certificate: structural level match under the permutation,
// equal beta sequences, trace match (cond-exp kind, exact equality after
// permutation), then sampled agreement of the two Lip-norms through the map.
// The deviation tolerance can only be loosened from its default.
IsometryCertificate verify_quantum_isometry(const IsometryMap& map, const LipEvaluator& u,
                                            const LipEvaluator& v, std::size_t samples,
                                            std::uint64_t seed, double tolerance = 1e-8);

}  // namespace qprop
