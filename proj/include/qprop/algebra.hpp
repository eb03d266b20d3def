#pragma once

#include <cstddef>
#include <vector>

#include "qprop/matrix.hpp"
#include "qprop/rational.hpp"

namespace qprop {

// Shape of a finite-dimensional algebra: the ordered block dimensions of
// M(n_0) + M(n_1) + ... .  Dimensions are exact integers because deep
// tower levels outgrow any fixed-width type long before they stop being
// structurally meaningful (shape checks, multiplicity arithmetic).
struct AlgebraShape {
  std::vector<Int> dims;

  std::size_t blocks() const { return dims.size(); }
  bool operator==(const AlgebraShape& o) const { return dims == o.dims; }
  bool operator!=(const AlgebraShape& o) const { return !(*this == o); }

  // Number of matrix units, sum of n_k^2 (exact).
  Int unit_count() const;

  // True when every block is small enough to hold as a dense matrix.
  bool materializable() const;
  // Block dimensions as machine integers; throws shape_error when too large.
  std::vector<std::size_t> dense_dims() const;
};

AlgebraShape make_shape(std::vector<Int> dims);  // validates dims >= 1

// Element of the block algebra: one dense matrix per block.
struct BlockElement {
  AlgebraShape shape;
  std::vector<CMatrix> blocks;

  static BlockElement zero(const AlgebraShape& s);
  static BlockElement identity(const AlgebraShape& s);

  BlockElement& operator+=(const BlockElement& o);
  BlockElement& operator-=(const BlockElement& o);
  BlockElement& operator*=(cx z);
  friend BlockElement operator+(BlockElement a, const BlockElement& b) { return a += b; }
  friend BlockElement operator-(BlockElement a, const BlockElement& b) { return a -= b; }
  friend BlockElement operator*(cx z, BlockElement a) { return a *= z; }

  BlockElement adjoint() const;
};

BlockElement mul(const BlockElement& a, const BlockElement& b);

// Jordan product (ab+ba)/2 and Lie product (ab-ba)/(2i); both map pairs of
// self-adjoint elements to self-adjoint elements.
BlockElement jordan(const BlockElement& a, const BlockElement& b);
BlockElement lie(const BlockElement& a, const BlockElement& b);

// (x + x*)/2
BlockElement sa_projection(const BlockElement& x);

// max over blocks of the spectral norm (sqrt of top eigenvalue of x_k* x_k)
double op_norm(const BlockElement& x);

// max over blocks and entries of |x - x*|; self-adjointness test metric
double sa_defect(const BlockElement& x);
bool is_self_adjoint(const BlockElement& x, double tol = 1e-10);

// Unweighted Hilbert-Schmidt pairing sum_k Tr(a_k^H b_k).
cx hs_inner(const BlockElement& a, const BlockElement& b);

// Matrix unit e_{k,j,m}: 1 in entry (j,m) of block k, zero elsewhere.
BlockElement matrix_unit(const AlgebraShape& s, std::size_t k, std::size_t j, std::size_t m);

struct UnitIndex {
  std::size_t block, row, col;
};

// All matrix units of the shape in lexicographic (block, row, col) order.
std::vector<UnitIndex> unit_indices(const AlgebraShape& s);

}  // namespace qprop
