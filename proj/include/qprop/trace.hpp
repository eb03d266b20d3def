#pragma once

#include <cstddef>
#include <vector>

#include "qprop/tower.hpp"

namespace qprop {

// Tracial state as convex block weights: tau(x) = sum_j lambda_j tr(x_j),
// tr the normalized trace of the block.  Faithful iff every weight is
// strictly positive.
struct TraceWeights {
  AlgebraShape shape;
  std::vector<double> lambda;
};

// Validates simplex conditions: nonnegative, sum within 1e-12 of 1.
TraceWeights make_trace(AlgebraShape shape, std::vector<double> lambda);

// Normalized matrix trace of the enveloping M(sum n_k), lambda_j = n_j/sum.
TraceWeights uniform_trace(const AlgebraShape& shape);

bool is_faithful(const TraceWeights& w, double threshold = 1e-12);

cx eval_trace(const TraceWeights& w, const BlockElement& x);

// l1 distance of weight vectors; bounds |tau1(b) - tau2(b)| <= dist * ||b||.
double weight_distance(const TraceWeights& w1, const TraceWeights& w2);

// Pullback along an embedding: the input-level trace representing
// tau_out after applying the embedding,
//   lambda_in(i) = sum_j lambda_out(j) * mult(j,i) * n_in(i) / n_out(j).
// The rational overload is exact and composes contravariantly with
// embedding composition as an identity of rationals.
std::vector<Rat> pullback_weights_exact(const MultiplicityEmbedding& e,
                                        const std::vector<Rat>& lambda_out);
TraceWeights pullback_trace(const MultiplicityEmbedding& e, const TraceWeights& w_out);

// Effros-Shen trace weights at a level: (t, 1-t) with
//   t(theta, n) = (-1)^(n-1) q_n (theta q_{n-1} - p_{n-1}),
// theta represented by the rational midpoint of the prefix enclosure.  The
// interval image is certified to lie inside (0,1); if the quotient list is
// too short to certify that, a precision_error asks for more terms.
struct EffrosShenTrace {
  TraceWeights weights;   // (t, 1-t) on shape (q_n, q_{n-1})
  Rat t_mid;              // exact weight at the enclosure midpoint
  RatInterval t_range;    // exact interval image of the enclosure
  Rat half_width;         // (t_range.hi - t_range.lo)/2
};

EffrosShenTrace effros_shen_trace(const ContinuedFraction& cf, std::size_t level);

// Exact midpoint weights (t, 1-t) used by consistency checks.
std::vector<Rat> effros_shen_weights_exact(const ContinuedFraction& cf, std::size_t level);

// Trace-preserving conditional expectation from level n onto the image of
// level m inside it:  E(x) = sum_e tau(alpha(e)* x)/tau(alpha(e* e)) alpha(e)
// over the matrix units e of level m, alpha the composite embedding.
class ConditionalExpectation {
 public:
  ConditionalExpectation(const Tower& t, std::size_t from_level, std::size_t onto_level,
                         const TraceWeights& w);

  // E(x) for x at the from-level.
  BlockElement apply(const BlockElement& x) const;
  // Coefficient element y at the onto-level with E(x) = alpha(y).
  BlockElement coefficients(const BlockElement& x) const;
  BlockElement push(const BlockElement& y) const;  // alpha(y)

  std::size_t from_level() const { return from_; }
  std::size_t onto_level() const { return onto_; }
  const AlgebraShape& domain_shape() const { return top_shape_; }
  const AlgebraShape& image_shape() const { return sub_shape_; }
  const MultiplicityEmbedding& embedding() const { return alpha_; }

 private:
  struct Slot {
    std::size_t block, row, col;
  };
  std::size_t from_, onto_;
  AlgebraShape top_shape_, sub_shape_;
  MultiplicityEmbedding alpha_;
  std::vector<std::vector<CopyPlacement>> places_;  // nested layout of each sub-block
  std::vector<UnitIndex> units_;
  std::vector<std::vector<Slot>> positions_;  // 1-entries of alpha(e) per unit
  std::vector<double> site_weight_;           // lambda_j / n_j per top block j
  std::vector<double> denom_;                 // tau(alpha(e* e)) per unit
};

}  // namespace qprop
