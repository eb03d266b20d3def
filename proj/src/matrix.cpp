#include "qprop/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qprop {

CMatrix& CMatrix::operator+=(const CMatrix& o) {
  if (o.n_ != n_) throw shape_error("matrix dimension mismatch in +");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& o) {
  if (o.n_ != n_) throw shape_error("matrix dimension mismatch in -");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

CMatrix& CMatrix::operator*=(cx z) {
  for (auto& v : a_) v *= z;
  return *this;
}

CMatrix CMatrix::adjoint() const {
  CMatrix r(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) r(j, i) = std::conj((*this)(i, j));
  return r;
}

cx CMatrix::trace() const {
  cx t(0, 0);
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double CMatrix::frobenius() const {
  double s = 0;
  for (const auto& v : a_) s += std::norm(v);
  return std::sqrt(s);
}

CMatrix mul(const CMatrix& a, const CMatrix& b) {
  if (a.dim() != b.dim()) throw shape_error("matrix dimension mismatch in *");
  const std::size_t n = a.dim();
  CMatrix r(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const cx aik = a(i, k);
      if (aik == cx(0, 0)) continue;
      for (std::size_t j = 0; j < n; ++j) r(i, j) += aik * b(k, j);
    }
  return r;
}

namespace {

double off_diag_mass(const CMatrix& m) {
  double s = 0;
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j)
      if (i != j) s += std::norm(m(i, j));
  return std::sqrt(s);
}

}  // namespace

EigResult hermitian_eigen(const CMatrix& h, bool want_vectors) {
  const std::size_t n = h.dim();
  // Defensive symmetrization; callers pass Hermitian data but rounding in
  // products can leave ~1e-16 skew that would otherwise never converge out.
  CMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(i, j) = 0.5 * (h(i, j) + std::conj(h(j, i)));

  CMatrix v;
  if (want_vectors) v = CMatrix::identity(n);

  constexpr double kOffTol = 1e-14;
  constexpr int kMaxSweeps = 64;
  double off = off_diag_mass(a);
  for (int sweep = 0; sweep < kMaxSweeps && off > kOffTol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const cx apq = a(p, q);
        const double r = std::abs(apq);
        if (r == 0) continue;
        // Phase rotation makes a(p,q) real, then a real Jacobi rotation
        // annihilates it; the product is the unitary accumulated into v.
        const cx u = apq / r;        // a(p,q) = r * u
        const cx ub = std::conj(u);
        for (std::size_t i = 0; i < n; ++i) {
          if (i == q) continue;
          a(i, q) *= ub;
          a(q, i) *= u;
        }
        if (want_vectors)
          for (std::size_t i = 0; i < n; ++i) v(i, q) *= ub;

        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2 * r);
        const double t = (tau >= 0) ? 1.0 / (tau + std::sqrt(1 + tau * tau))
                                    : 1.0 / (tau - std::sqrt(1 + tau * tau));
        const double c = 1.0 / std::sqrt(1 + t * t);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const cx aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const cx api = a(p, i), aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        a(p, q) = a(q, p) = 0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        if (want_vectors)
          for (std::size_t i = 0; i < n; ++i) {
            const cx vip = v(i, p), viq = v(i, q);
            v(i, p) = c * vip - s * viq;
            v(i, q) = s * vip + c * viq;
          }
      }
    off = off_diag_mass(a);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a(i, i).real() < a(j, j).real();
  });

  EigResult res;
  res.values.resize(n);
  res.off_mass = off;
  for (std::size_t k = 0; k < n; ++k) res.values[k] = a(order[k], order[k]).real();
  if (want_vectors) {
    res.vectors = CMatrix(n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) res.vectors(i, k) = v(i, order[k]);
  }
  return res;
}

double operator_norm(const CMatrix& a) {
  const std::size_t n = a.dim();
  if (n == 0) return 0;
  if (n == 1) return std::abs(a(0, 0));
  const CMatrix h = mul(a.adjoint(), a);
  const EigResult e = hermitian_eigen(h);
  const double top = e.values.empty() ? 0.0 : e.values.back();
  return std::sqrt(std::max(0.0, top));
}

}  // namespace qprop
