#include "qprop/trace.hpp"

#include <cmath>

namespace qprop {

TraceWeights make_trace(AlgebraShape shape, std::vector<double> lambda) {
  if (lambda.size() != shape.blocks())
    throw shape_error("trace weight count must match block count");
  double sum = 0;
  for (double l : lambda) {
    if (!(l >= 0)) throw domain_error("trace weights must be nonnegative");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw domain_error("trace weights must sum to 1 within 1e-12");
  return TraceWeights{std::move(shape), std::move(lambda)};
}

TraceWeights uniform_trace(const AlgebraShape& shape) {
  Int total = 0;
  for (const Int& d : shape.dims) total += d;
  std::vector<double> lambda;
  lambda.reserve(shape.blocks());
  for (const Int& d : shape.dims) lambda.push_back(to_double(Rat(d, total)));
  // Renormalize the rounding residue onto the last weight so the simplex
  // condition holds exactly enough for make_trace.
  double sum = 0;
  for (double l : lambda) sum += l;
  lambda.back() += 1.0 - sum;
  return make_trace(shape, std::move(lambda));
}

bool is_faithful(const TraceWeights& w, double threshold) {
  for (double l : w.lambda)
    if (l <= threshold) return false;
  return true;
}

cx eval_trace(const TraceWeights& w, const BlockElement& x) {
  if (x.shape != w.shape) throw shape_error("element shape does not match trace");
  cx s(0, 0);
  for (std::size_t j = 0; j < x.blocks.size(); ++j) {
    const std::size_t n = x.blocks[j].dim();
    if (n == 0) continue;
    s += (w.lambda[j] / static_cast<double>(n)) * x.blocks[j].trace();
  }
  return s;
}

double weight_distance(const TraceWeights& w1, const TraceWeights& w2) {
  if (w1.shape != w2.shape) throw shape_error("weight_distance needs a common shape");
  double d = 0;
  for (std::size_t j = 0; j < w1.lambda.size(); ++j) d += std::abs(w1.lambda[j] - w2.lambda[j]);
  return d;
}

std::vector<Rat> pullback_weights_exact(const MultiplicityEmbedding& e,
                                        const std::vector<Rat>& lambda_out) {
  if (lambda_out.size() != e.out_shape.blocks())
    throw shape_error("pullback weights must match the output shape");
  const std::size_t cols = e.in_shape.blocks();
  std::vector<Rat> in(cols, Rat(0));
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = 0; j < e.out_shape.blocks(); ++j) {
      const Int& m = e.mult[j * cols + i];
      if (m == 0) continue;
      in[i] += lambda_out[j] * Rat(m * e.in_shape.dims[i], e.out_shape.dims[j]);
    }
  return in;
}

TraceWeights pullback_trace(const MultiplicityEmbedding& e, const TraceWeights& w_out) {
  if (w_out.shape != e.out_shape) throw shape_error("trace shape does not match embedding");
  std::vector<Rat> exact;
  exact.reserve(w_out.lambda.size());
  for (double l : w_out.lambda) exact.push_back(rat_from_double(l));
  const std::vector<Rat> in = pullback_weights_exact(e, exact);
  std::vector<double> lambda;
  lambda.reserve(in.size());
  for (const Rat& r : in) lambda.push_back(to_double(r));
  double sum = 0;
  for (double l : lambda) sum += l;
  lambda.back() += 1.0 - sum;
  return make_trace(e.in_shape, std::move(lambda));
}

namespace {

// t(theta, n) = (-1)^(n-1) q_n (theta q_{n-1} - p_{n-1}), affine in theta.
Rat t_weight(const Convergents& c, std::size_t n, const Rat& theta) {
  Rat t = Rat(c.q[n]) * (theta * Rat(c.q[n - 1]) - Rat(c.p[n - 1]));
  if (n % 2 == 0) t = -t;
  return t;
}

}  // namespace

std::vector<Rat> effros_shen_weights_exact(const ContinuedFraction& cf, std::size_t level) {
  if (level == 0) return {Rat(1)};
  if (level + 1 > cf.quotients.size())
    throw domain_error("continued fraction too short for trace at level " +
                       std::to_string(level));
  const Convergents c = convergents(cf);
  const Rat theta = cf_enclosure(cf).mid();
  const Rat t = t_weight(c, level, theta);
  return {t, Rat(1) - t};
}

EffrosShenTrace effros_shen_trace(const ContinuedFraction& cf, std::size_t level) {
  if (level == 0) {
    EffrosShenTrace out;
    out.weights = make_trace(make_shape({Int(1)}), {1.0});
    out.t_mid = 1;
    out.t_range = RatInterval{Rat(1), Rat(1)};
    out.half_width = 0;
    return out;
  }
  if (level + 1 > cf.quotients.size())
    throw domain_error("continued fraction too short for trace at level " +
                       std::to_string(level));
  const Convergents c = convergents(cf);
  const RatInterval theta = cf_enclosure(cf);
  Rat t_lo = t_weight(c, level, theta.lo);
  Rat t_hi = t_weight(c, level, theta.hi);
  if (t_lo > t_hi) std::swap(t_lo, t_hi);
  if (!(t_lo > 0 && t_hi < 1))
    throw precision_error(
        "cannot certify the level-" + std::to_string(level) +
        " trace weight inside (0,1); extend the continued fraction");
  EffrosShenTrace out;
  out.t_mid = t_weight(c, level, theta.mid());
  out.t_range = RatInterval{t_lo, t_hi};
  out.half_width = (t_hi - t_lo) / 2;
  const double t = to_double(out.t_mid);
  out.weights = make_trace(make_shape({c.q[level], c.q[level - 1]}), {t, 1.0 - t});
  return out;
}

ConditionalExpectation::ConditionalExpectation(const Tower& t, std::size_t from_level,
                                               std::size_t onto_level, const TraceWeights& w)
    : from_(from_level), onto_(onto_level) {
  if (onto_level > from_level || from_level >= t.levels.size())
    throw shape_error("conditional expectation needs onto_level <= from_level <= depth");
  if (w.shape != t.levels[from_level])
    throw shape_error("trace weights must live at the from-level");
  if (!is_faithful(w))
    throw domain_error("conditional expectation needs a faithful trace");
  top_shape_ = t.levels[from_level];
  sub_shape_ = t.levels[onto_level];
  alpha_ = compose_steps(t, onto_level, from_level);
  // The nested layout (iterated steps) rather than the composite-matrix
  // layout: only it makes the expectations onto successive levels nest.
  places_ = nested_placements(t, onto_level, from_level);

  const std::vector<std::size_t> top_dims = top_shape_.dense_dims();
  std::vector<double> block_weight(top_dims.size());
  for (std::size_t j = 0; j < top_dims.size(); ++j)
    block_weight[j] = w.lambda[j] / static_cast<double>(top_dims[j]);

  units_ = unit_indices(sub_shape_);
  positions_.resize(units_.size());
  denom_.resize(units_.size());
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const UnitIndex e = units_[u];
    double den = 0;
    for (const CopyPlacement& p : places_[e.block]) {
      positions_[u].push_back({p.block, p.offset + e.row, p.offset + e.col});
      den += block_weight[p.block];
    }
    denom_[u] = den;  // tau(alpha(e* e)); faithful trace + injectivity => > 0
    if (!(den > 0)) throw domain_error("degenerate conditional expectation denominator");
  }
  site_weight_ = std::move(block_weight);
}

BlockElement ConditionalExpectation::coefficients(const BlockElement& x) const {
  if (x.shape != top_shape_) throw shape_error("element is not at the from-level");
  BlockElement y = BlockElement::zero(sub_shape_);
  for (std::size_t u = 0; u < units_.size(); ++u) {
    cx num(0, 0);
    for (const Slot& s : positions_[u])
      num += site_weight_[s.block] * x.blocks[s.block](s.row, s.col);
    y.blocks[units_[u].block](units_[u].row, units_[u].col) = num / denom_[u];
  }
  return y;
}

BlockElement ConditionalExpectation::push(const BlockElement& y) const {
  if (y.shape != sub_shape_) throw shape_error("element is not at the onto-level");
  BlockElement out = BlockElement::zero(top_shape_);
  for (std::size_t i = 0; i < places_.size(); ++i) {
    const CMatrix& b = y.blocks[i];
    const std::size_t d = b.dim();
    for (const CopyPlacement& p : places_[i])
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t s = 0; s < d; ++s)
          out.blocks[p.block](p.offset + r, p.offset + s) = b(r, s);
  }
  return out;
}

BlockElement ConditionalExpectation::apply(const BlockElement& x) const {
  return push(coefficients(x));
}

}  // namespace qprop
