#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "qprop/errors.hpp"

namespace qprop {

using cx = std::complex<double>;

// Dense square complex matrix, row-major.  Blocks of the algebras handled
// here are small (a few dozen rows at most), so simplicity wins over BLAS.
class CMatrix {
 public:
  CMatrix() : n_(0) {}
  explicit CMatrix(std::size_t n) : n_(n), a_(n * n, cx(0, 0)) {}

  static CMatrix identity(std::size_t n) {
    CMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t dim() const { return n_; }
  cx& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  const cx& operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  const std::vector<cx>& data() const { return a_; }
  std::vector<cx>& data() { return a_; }

  CMatrix& operator+=(const CMatrix& o);
  CMatrix& operator-=(const CMatrix& o);
  CMatrix& operator*=(cx z);

  friend CMatrix operator+(CMatrix a, const CMatrix& b) { return a += b; }
  friend CMatrix operator-(CMatrix a, const CMatrix& b) { return a -= b; }
  friend CMatrix operator*(cx z, CMatrix a) { return a *= z; }

  CMatrix adjoint() const;
  cx trace() const;
  double frobenius() const;

 private:
  std::size_t n_;
  std::vector<cx> a_;
};

CMatrix mul(const CMatrix& a, const CMatrix& b);

// Spectral decomposition of a Hermitian matrix by cyclic Jacobi rotations:
// deterministic sweep order, convergence when the off-diagonal Frobenius
// mass drops below 1e-14 (sweep-capped).  Eigenvalues ascending; columns of
// `vectors` are the matching orthonormal eigenvectors when requested.
struct EigResult {
  std::vector<double> values;
  CMatrix vectors;     // empty unless want_vectors
  double off_mass = 0; // residual off-diagonal mass at termination
};

EigResult hermitian_eigen(const CMatrix& h, bool want_vectors = false);

// Operator (spectral) norm via sqrt of the top eigenvalue of a^H a.
double operator_norm(const CMatrix& a);

}  // namespace qprop
