#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "qprop/algebra.hpp"

namespace qprop {

// Unital injective *-homomorphism between block algebras, recorded by its
// multiplicity matrix: mult(j,i) copies of input block i sit inside output
// block j.  Unital: sum_i mult(j,i)*n_in(i) == n_out(j).  Injective: every
// input block lands somewhere (no zero column).
struct MultiplicityEmbedding {
  AlgebraShape in_shape;
  AlgebraShape out_shape;
  std::vector<Int> mult;  // row-major, out.blocks() x in.blocks()

  Int at(std::size_t j, std::size_t i) const { return mult[j * in_shape.blocks() + i]; }
};

MultiplicityEmbedding make_embedding(AlgebraShape in_shape, AlgebraShape out_shape,
                                     std::vector<Int> mult);
MultiplicityEmbedding identity_embedding(const AlgebraShape& s);

// Composite of e2 after e1 (multiplicity matrices multiply).
MultiplicityEmbedding compose(const MultiplicityEmbedding& e2, const MultiplicityEmbedding& e1);

// Realize the embedding on an element: output block j is the block-diagonal
// stack of mult(j,0) copies of x_0, then mult(j,1) copies of x_1, ...
BlockElement apply_embedding(const MultiplicityEmbedding& e, const BlockElement& x);

// Finite inductive-system data: level shapes plus one step embedding between
// each consecutive pair.
struct Tower {
  std::vector<AlgebraShape> levels;
  std::vector<MultiplicityEmbedding> steps;
  std::string label;

  std::size_t depth() const { return steps.size(); }  // levels.size() - 1
  const AlgebraShape& top() const { return levels.back(); }
};

Tower make_tower(std::vector<AlgebraShape> levels, std::vector<MultiplicityEmbedding> steps,
                 std::string label = "");

// Composite embedding from level m into level n (identity when m == n).
MultiplicityEmbedding compose_steps(const Tower& t, std::size_t m, std::size_t n);

// One copy of a level-m block inside a level-n block: which output block it
// lands in and at which diagonal offset.
struct CopyPlacement {
  std::size_t block = 0;
  std::size_t offset = 0;
};

// Placements of every copy of each level-m block inside level n when the
// step embeddings are applied one after another.  This is the layout that
// makes the level images a chain of subalgebras: the image of level m under
// the iterated steps sits inside the image of level m' for m <= m' <= n.
// Realizing the composite multiplicity matrix directly orders the copies
// differently (all copies of block 0 first), which is unitarily equivalent
// but breaks that chain.  The number of placements of block i inside block j
// always equals compose_steps(t, m, n).at(j, i).
std::vector<std::vector<CopyPlacement>> nested_placements(const Tower& t, std::size_t m,
                                                          std::size_t n);

// Realize the iterated step embeddings on an element of level m, producing
// the level-n element laid out per nested_placements.
BlockElement apply_steps(const Tower& t, std::size_t m, std::size_t n, const BlockElement& x);

// Continued fraction [a_0; a_1, a_2, ...] with a_0 = 0 and a_j >= 1, the
// expansion of an element of (0,1).  Convergents p_n/q_n satisfy
//   p_1 = a_0 a_1 + 1, q_1 = a_1,   p_0 = a_0, q_0 = 1,
//   (p_{n+1}, q_{n+1}) = a_{n+1} (p_n, q_n) + (p_{n-1}, q_{n-1}).
struct ContinuedFraction {
  std::vector<Int> quotients;

  std::size_t order() const { return quotients.size() - 1; }  // largest index n
};

ContinuedFraction make_cf(std::vector<Int> quotients);
ContinuedFraction golden_cf(std::size_t terms);  // (0, 1, 1, ..., 1)

struct Convergents {
  std::vector<Int> p, q;  // indices 0..order
};

Convergents convergents(const ContinuedFraction& cf);

// Exact open interval enclosing every irrational with this quotient prefix,
// from the last two convergents; width 1/(q_{K-1} q_K).
struct RatInterval {
  Rat lo, hi;

  Rat width() const { return hi - lo; }
  Rat mid() const { return (lo + hi) / 2; }
  bool contains(const Rat& x) const { return lo <= x && x <= hi; }
};

RatInterval cf_enclosure(const ContinuedFraction& cf);

// Exact Euclidean expansion of a rational in (0,1); the result reproduces x
// exactly.  Throws precision_error if more than max_terms quotients appear.
ContinuedFraction cf_expand(const Rat& x, std::size_t max_terms = 256);

// Effros-Shen tower for the continued fraction, levels 0..depth:
// level 0 = (1), level n = (q_n, q_{n-1}); step n >= 1 has multiplicity
// [[a_{n+1}, 1], [1, 0]], step 0 is the unique unital map from (1).
Tower effros_shen_tower(const ContinuedFraction& cf, std::size_t depth);

// Default weight sequence for an Effros-Shen tower:
// beta(0) = 1, beta(n) = 1/(q_n^2 + q_{n-1}^2).
std::vector<Rat> effros_shen_beta(const ContinuedFraction& cf, std::size_t depth);

// UHF tower: levels (1), (m_1), (m_1 m_2), ..., single-block steps.
Tower uhf_tower(const std::vector<Int>& multipliers);

// Baire-space comparison of quotient sequences: 2^(-i) at the first index i
// of disagreement; equal sequences give 0; agreement that runs out of the
// shorter sequence is reported as indistinguishable at that depth, because a
// finite prefix cannot witness equality of the underlying points.
enum class BaireKind { equal, distinct, indistinguishable };

struct BaireResult {
  BaireKind kind;
  double distance;         // 2^-i when distinct, 0 when equal, NaN otherwise
  std::size_t depth;       // first disagreement, or common prefix length
};

BaireResult baire_distance(const std::vector<Int>& xs, const std::vector<Int>& ys);

// Fusing sequence of a family against its limit: c[N] is the least k0 <= K
// (K = members.size()-1) such that every member k >= k0 matches the limit in
// level shapes 0..N and step matrices 0..N-1.  Throws hypothesis_error
// naming the first level where no such k0 exists.
std::vector<std::size_t> fusing_sequence(const std::vector<Tower>& members, const Tower& limit,
                                         std::size_t max_level);

// Shape/step agreement of two towers through level n.
bool towers_agree(const Tower& a, const Tower& b, std::size_t level);

}  // namespace qprop
