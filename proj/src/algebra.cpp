#include "qprop/algebra.hpp"

#include <algorithm>
#include <cmath>

namespace qprop {

namespace {
constexpr std::size_t kMaxDenseDim = 4096;
}

Int AlgebraShape::unit_count() const {
  Int c = 0;
  for (const Int& d : dims) c += d * d;
  return c;
}

bool AlgebraShape::materializable() const {
  for (const Int& d : dims)
    if (d > kMaxDenseDim) return false;
  return true;
}

std::vector<std::size_t> AlgebraShape::dense_dims() const {
  std::vector<std::size_t> out;
  out.reserve(dims.size());
  for (const Int& d : dims) {
    if (d > kMaxDenseDim)
      throw shape_error("block dimension " + d.str() + " too large to materialize");
    out.push_back(d.convert_to<std::size_t>());
  }
  return out;
}

AlgebraShape make_shape(std::vector<Int> dims) {
  if (dims.empty()) throw shape_error("algebra shape needs at least one block");
  for (const Int& d : dims)
    if (d < 1) throw shape_error("block dimensions must be positive");
  return AlgebraShape{std::move(dims)};
}

BlockElement BlockElement::zero(const AlgebraShape& s) {
  BlockElement x;
  x.shape = s;
  for (std::size_t d : s.dense_dims()) x.blocks.emplace_back(d);
  return x;
}

BlockElement BlockElement::identity(const AlgebraShape& s) {
  BlockElement x;
  x.shape = s;
  for (std::size_t d : s.dense_dims()) x.blocks.push_back(CMatrix::identity(d));
  return x;
}

BlockElement& BlockElement::operator+=(const BlockElement& o) {
  if (shape != o.shape) throw shape_error("shape mismatch in +");
  for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] += o.blocks[k];
  return *this;
}

BlockElement& BlockElement::operator-=(const BlockElement& o) {
  if (shape != o.shape) throw shape_error("shape mismatch in -");
  for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k] -= o.blocks[k];
  return *this;
}

BlockElement& BlockElement::operator*=(cx z) {
  for (auto& b : blocks) b *= z;
  return *this;
}

BlockElement BlockElement::adjoint() const {
  BlockElement r;
  r.shape = shape;
  r.blocks.reserve(blocks.size());
  for (const auto& b : blocks) r.blocks.push_back(b.adjoint());
  return r;
}

BlockElement mul(const BlockElement& a, const BlockElement& b) {
  if (a.shape != b.shape) throw shape_error("shape mismatch in *");
  BlockElement r;
  r.shape = a.shape;
  r.blocks.reserve(a.blocks.size());
  for (std::size_t k = 0; k < a.blocks.size(); ++k)
    r.blocks.push_back(mul(a.blocks[k], b.blocks[k]));
  return r;
}

BlockElement jordan(const BlockElement& a, const BlockElement& b) {
  BlockElement ab = mul(a, b);
  BlockElement ba = mul(b, a);
  return cx(0.5, 0) * (ab + ba);
}

BlockElement lie(const BlockElement& a, const BlockElement& b) {
  BlockElement ab = mul(a, b);
  BlockElement ba = mul(b, a);
  return cx(0, -0.5) * (ab - ba);
}

BlockElement sa_projection(const BlockElement& x) {
  return cx(0.5, 0) * (x + x.adjoint());
}

double op_norm(const BlockElement& x) {
  double m = 0;
  for (const auto& b : x.blocks) m = std::max(m, operator_norm(b));
  return m;
}

double sa_defect(const BlockElement& x) {
  double m = 0;
  for (const auto& b : x.blocks) {
    const std::size_t n = b.dim();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        m = std::max(m, std::abs(b(i, j) - std::conj(b(j, i))));
  }
  return m;
}

bool is_self_adjoint(const BlockElement& x, double tol) { return sa_defect(x) <= tol; }

cx hs_inner(const BlockElement& a, const BlockElement& b) {
  if (a.shape != b.shape) throw shape_error("shape mismatch in hs_inner");
  cx s(0, 0);
  for (std::size_t k = 0; k < a.blocks.size(); ++k) {
    const auto& x = a.blocks[k];
    const auto& y = b.blocks[k];
    for (std::size_t i = 0; i < x.data().size(); ++i) s += std::conj(x.data()[i]) * y.data()[i];
  }
  return s;
}

BlockElement matrix_unit(const AlgebraShape& s, std::size_t k, std::size_t j, std::size_t m) {
  BlockElement x = BlockElement::zero(s);
  if (k >= x.blocks.size()) throw shape_error("matrix unit block index out of range");
  if (j >= x.blocks[k].dim() || m >= x.blocks[k].dim())
    throw shape_error("matrix unit entry out of range");
  x.blocks[k](j, m) = 1.0;
  return x;
}

std::vector<UnitIndex> unit_indices(const AlgebraShape& s) {
  const std::vector<std::size_t> dd = s.dense_dims();
  std::vector<UnitIndex> out;
  for (std::size_t k = 0; k < dd.size(); ++k)
    for (std::size_t j = 0; j < dd[k]; ++j)
      for (std::size_t m = 0; m < dd[k]; ++m) out.push_back({k, j, m});
  return out;
}

}  // namespace qprop
