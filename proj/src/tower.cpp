#include "qprop/tower.hpp"

#include <algorithm>
#include <limits>

namespace qprop {

MultiplicityEmbedding make_embedding(AlgebraShape in_shape, AlgebraShape out_shape,
                                     std::vector<Int> mult) {
  const std::size_t rows = out_shape.blocks(), cols = in_shape.blocks();
  if (mult.size() != rows * cols)
    throw shape_error("multiplicity matrix must be out.blocks() x in.blocks()");
  for (const Int& m : mult)
    if (m < 0) throw domain_error("multiplicities must be nonnegative");
  for (std::size_t j = 0; j < rows; ++j) {
    Int total = 0;
    for (std::size_t i = 0; i < cols; ++i) total += mult[j * cols + i] * in_shape.dims[i];
    if (total != out_shape.dims[j])
      throw domain_error("embedding not unital at output block " + std::to_string(j) + ": " +
                         total.str() + " != " + out_shape.dims[j].str());
  }
  for (std::size_t i = 0; i < cols; ++i) {
    bool hit = false;
    for (std::size_t j = 0; j < rows && !hit; ++j) hit = mult[j * cols + i] > 0;
    if (!hit)
      throw domain_error("embedding not injective: input block " + std::to_string(i) +
                         " has zero column");
  }
  return MultiplicityEmbedding{std::move(in_shape), std::move(out_shape), std::move(mult)};
}

MultiplicityEmbedding identity_embedding(const AlgebraShape& s) {
  const std::size_t n = s.blocks();
  std::vector<Int> mult(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) mult[i * n + i] = 1;
  return MultiplicityEmbedding{s, s, std::move(mult)};
}

MultiplicityEmbedding compose(const MultiplicityEmbedding& e2, const MultiplicityEmbedding& e1) {
  if (e2.in_shape != e1.out_shape) throw shape_error("embedding composition mismatch");
  const std::size_t rows = e2.out_shape.blocks();
  const std::size_t mid = e2.in_shape.blocks();
  const std::size_t cols = e1.in_shape.blocks();
  std::vector<Int> mult(rows * cols, 0);
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t l = 0; l < mid; ++l) {
      const Int& m2 = e2.mult[j * mid + l];
      if (m2 == 0) continue;
      for (std::size_t i = 0; i < cols; ++i) mult[j * cols + i] += m2 * e1.mult[l * cols + i];
    }
  return MultiplicityEmbedding{e1.in_shape, e2.out_shape, std::move(mult)};
}

BlockElement apply_embedding(const MultiplicityEmbedding& e, const BlockElement& x) {
  if (x.shape != e.in_shape) throw shape_error("element shape does not match embedding input");
  BlockElement out = BlockElement::zero(e.out_shape);
  const std::size_t cols = e.in_shape.blocks();
  for (std::size_t j = 0; j < e.out_shape.blocks(); ++j) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < cols; ++i) {
      const std::size_t copies = e.mult[j * cols + i].convert_to<std::size_t>();
      const CMatrix& b = x.blocks[i];
      const std::size_t d = b.dim();
      for (std::size_t c = 0; c < copies; ++c) {
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t s = 0; s < d; ++s) out.blocks[j](offset + r, offset + s) = b(r, s);
        offset += d;
      }
    }
  }
  return out;
}

Tower make_tower(std::vector<AlgebraShape> levels, std::vector<MultiplicityEmbedding> steps,
                 std::string label) {
  if (levels.empty()) throw shape_error("tower needs at least one level");
  if (steps.size() + 1 != levels.size())
    throw shape_error("tower needs exactly one step between consecutive levels");
  for (std::size_t n = 0; n < steps.size(); ++n) {
    if (steps[n].in_shape != levels[n] || steps[n].out_shape != levels[n + 1])
      throw shape_error("step " + std::to_string(n) + " does not connect its levels");
  }
  return Tower{std::move(levels), std::move(steps), std::move(label)};
}

MultiplicityEmbedding compose_steps(const Tower& t, std::size_t m, std::size_t n) {
  if (m > n || n >= t.levels.size()) throw shape_error("compose_steps: bad level range");
  MultiplicityEmbedding acc = identity_embedding(t.levels[m]);
  for (std::size_t k = m; k < n; ++k) acc = compose(t.steps[k], acc);
  return acc;
}

std::vector<std::vector<CopyPlacement>> nested_placements(const Tower& t, std::size_t m,
                                                          std::size_t n) {
  if (m > n || n >= t.levels.size()) throw shape_error("nested_placements: bad level range");
  std::vector<std::vector<CopyPlacement>> cur(t.levels[m].blocks());
  for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = {CopyPlacement{i, 0}};
  for (std::size_t lv = m; lv < n; ++lv) {
    const MultiplicityEmbedding& e = t.steps[lv];
    const std::vector<std::size_t> in_dims = t.levels[lv].dense_dims();
    const std::size_t in_blocks = t.levels[lv].blocks();
    std::vector<std::vector<CopyPlacement>> next(cur.size());
    for (std::size_t j = 0; j < t.levels[lv + 1].blocks(); ++j) {
      std::size_t off = 0;
      for (std::size_t i2 = 0; i2 < in_blocks; ++i2) {
        const std::size_t copies = e.mult[j * in_blocks + i2].convert_to<std::size_t>();
        for (std::size_t c = 0; c < copies; ++c) {
          for (std::size_t i = 0; i < cur.size(); ++i)
            for (const CopyPlacement& p : cur[i])
              if (p.block == i2) next[i].push_back(CopyPlacement{j, off + p.offset});
          off += in_dims[i2];
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

BlockElement apply_steps(const Tower& t, std::size_t m, std::size_t n, const BlockElement& x) {
  if (m > n || n >= t.levels.size()) throw shape_error("apply_steps: bad level range");
  if (x.shape != t.levels[m]) throw shape_error("element shape does not match level m");
  const std::vector<std::vector<CopyPlacement>> places = nested_placements(t, m, n);
  BlockElement out = BlockElement::zero(t.levels[n]);
  for (std::size_t i = 0; i < places.size(); ++i) {
    const CMatrix& b = x.blocks[i];
    const std::size_t d = b.dim();
    for (const CopyPlacement& p : places[i])
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t s = 0; s < d; ++s) out.blocks[p.block](p.offset + r, p.offset + s) = b(r, s);
  }
  return out;
}

ContinuedFraction make_cf(std::vector<Int> quotients) {
  if (quotients.empty()) throw domain_error("continued fraction needs at least a_0");
  if (quotients[0] != 0) throw domain_error("a_0 must be 0 (values lie in (0,1))");
  for (std::size_t j = 1; j < quotients.size(); ++j)
    if (quotients[j] < 1) throw domain_error("partial quotients a_j (j>=1) must be >= 1");
  return ContinuedFraction{std::move(quotients)};
}

ContinuedFraction golden_cf(std::size_t terms) {
  if (terms < 2) throw domain_error("golden continued fraction needs at least two quotients");
  std::vector<Int> a(terms, 1);
  a[0] = 0;
  return ContinuedFraction{std::move(a)};
}

Convergents convergents(const ContinuedFraction& cf) {
  const auto& a = cf.quotients;
  Convergents c;
  c.p.resize(a.size());
  c.q.resize(a.size());
  c.p[0] = a[0];
  c.q[0] = 1;
  if (a.size() > 1) {
    c.p[1] = a[0] * a[1] + 1;
    c.q[1] = a[1];
    for (std::size_t n = 2; n < a.size(); ++n) {
      c.p[n] = a[n] * c.p[n - 1] + c.p[n - 2];
      c.q[n] = a[n] * c.q[n - 1] + c.q[n - 2];
    }
  }
  return c;
}

RatInterval cf_enclosure(const ContinuedFraction& cf) {
  if (cf.quotients.size() < 2)
    throw precision_error("need at least two quotients to enclose the value");
  const Convergents c = convergents(cf);
  const std::size_t k = cf.order();
  Rat a(c.p[k - 1], c.q[k - 1]);
  Rat b(c.p[k], c.q[k]);
  if (a > b) std::swap(a, b);
  return RatInterval{a, b};
}

ContinuedFraction cf_expand(const Rat& x, std::size_t max_terms) {
  if (x <= 0 || x >= 1) throw domain_error("cf_expand needs a rational in (0,1)");
  std::vector<Int> a{0};
  Int num = numerator(x), den = denominator(x);
  // Euclidean algorithm on 1/x: quotient list of den/num, num/rem, ...
  while (num != 0) {
    if (a.size() > max_terms)
      throw precision_error("continued fraction expansion exceeds max_terms");
    Int quot = den / num;
    Int rem = den % num;
    a.push_back(quot);
    den = num;
    num = rem;
  }
  return ContinuedFraction{std::move(a)};
}

Tower effros_shen_tower(const ContinuedFraction& cf, std::size_t depth) {
  if (depth + 1 > cf.quotients.size())
    throw domain_error("continued fraction too short for requested depth " +
                       std::to_string(depth));
  const Convergents c = convergents(cf);
  std::vector<AlgebraShape> levels;
  levels.push_back(make_shape({Int(1)}));
  for (std::size_t n = 1; n <= depth; ++n) levels.push_back(make_shape({c.q[n], c.q[n - 1]}));
  std::vector<MultiplicityEmbedding> steps;
  if (depth >= 1) steps.push_back(make_embedding(levels[0], levels[1], {c.q[1], c.q[0]}));
  for (std::size_t n = 1; n < depth; ++n)
    steps.push_back(
        make_embedding(levels[n], levels[n + 1], {cf.quotients[n + 1], Int(1), Int(1), Int(0)}));
  Tower t = make_tower(std::move(levels), std::move(steps), "effros-shen");
  return t;
}

std::vector<Rat> effros_shen_beta(const ContinuedFraction& cf, std::size_t depth) {
  if (depth + 1 > cf.quotients.size())
    throw domain_error("continued fraction too short for beta at depth " + std::to_string(depth));
  const Convergents c = convergents(cf);
  std::vector<Rat> beta;
  beta.emplace_back(1);
  for (std::size_t n = 1; n <= depth; ++n)
    beta.emplace_back(Int(1), c.q[n] * c.q[n] + c.q[n - 1] * c.q[n - 1]);
  return beta;
}

Tower uhf_tower(const std::vector<Int>& multipliers) {
  for (const Int& m : multipliers)
    if (m < 1) throw domain_error("UHF multipliers must be >= 1");
  std::vector<AlgebraShape> levels;
  std::vector<MultiplicityEmbedding> steps;
  Int dim = 1;
  levels.push_back(make_shape({dim}));
  for (const Int& m : multipliers) {
    Int next = dim * m;
    levels.push_back(make_shape({next}));
    steps.push_back(make_embedding(levels[levels.size() - 2], levels.back(), {m}));
    dim = next;
  }
  return make_tower(std::move(levels), std::move(steps), "uhf");
}

BaireResult baire_distance(const std::vector<Int>& xs, const std::vector<Int>& ys) {
  if (xs.empty() || ys.empty()) throw domain_error("baire_distance needs nonempty sequences");
  const std::size_t common = std::min(xs.size(), ys.size());
  for (std::size_t i = 0; i < common; ++i)
    if (xs[i] != ys[i])
      return BaireResult{BaireKind::distinct, std::ldexp(1.0, -static_cast<int>(i)), i};
  if (xs.size() == ys.size()) return BaireResult{BaireKind::equal, 0.0, common};
  return BaireResult{BaireKind::indistinguishable, std::numeric_limits<double>::quiet_NaN(),
                     common};
}

bool towers_agree(const Tower& a, const Tower& b, std::size_t level) {
  if (a.depth() < level || b.depth() < level) return false;
  for (std::size_t n = 0; n <= level; ++n)
    if (a.levels[n] != b.levels[n]) return false;
  for (std::size_t n = 0; n + 1 <= level; ++n)
    if (a.steps[n].mult != b.steps[n].mult) return false;
  return true;
}

std::vector<std::size_t> fusing_sequence(const std::vector<Tower>& members, const Tower& limit,
                                         std::size_t max_level) {
  if (members.empty()) throw domain_error("fusing_sequence needs at least one member");
  if (limit.depth() < max_level)
    throw hypothesis_error("limit tower shallower than requested fusing level");
  const std::size_t K = members.size() - 1;
  std::vector<std::size_t> c;
  c.reserve(max_level + 1);
  for (std::size_t N = 0; N <= max_level; ++N) {
    // least k0 such that all members k >= k0 agree with the limit through N
    std::size_t k0 = K + 1;
    for (std::size_t k = K + 1; k-- > 0;) {
      if (towers_agree(members[k], limit, N))
        k0 = k;
      else
        break;
    }
    if (k0 == K + 1)
      throw hypothesis_error("family does not fuse at level " + std::to_string(N) +
                             " within its horizon");
    c.push_back(k0);
  }
  return c;
}

}  // namespace qprop
