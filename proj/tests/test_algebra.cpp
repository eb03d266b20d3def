#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "qprop/algebra.hpp"
#include "qprop/errors.hpp"
#include "qprop/rng.hpp"

using namespace qprop;

namespace {

CMatrix random_matrix(std::size_t n, CounterRng& rng) {
  CMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = cx(rng.gaussian(), rng.gaussian());
  return m;
}

CMatrix random_hermitian(std::size_t n, CounterRng& rng) {
  CMatrix m = random_matrix(n, rng);
  CMatrix h = m + m.adjoint();
  h *= cx(0.5, 0);
  return h;
}

// Unitary built as a product of complex plane rotations; unitarity holds by
// construction, independently of any eigensolver.
CMatrix random_unitary(std::size_t n, CounterRng& rng) {
  CMatrix u = CMatrix::identity(n);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) {
      const double th = rng.uniform(0.0, 6.283185307179586);
      const double ph = rng.uniform(0.0, 6.283185307179586);
      const cx c(std::cos(th), 0), s = std::polar(std::sin(th), ph);
      CMatrix g = CMatrix::identity(n);
      g(p, p) = c;
      g(p, q) = s;
      g(q, p) = -std::conj(s);
      g(q, q) = std::conj(c);
      u = mul(g, u);
    }
  return u;
}

BlockElement random_sa_element(const AlgebraShape& s, CounterRng& rng) {
  BlockElement x = BlockElement::zero(s);
  const std::vector<std::size_t> dims = s.dense_dims();
  for (std::size_t k = 0; k < dims.size(); ++k) x.blocks[k] = random_hermitian(dims[k], rng);
  return x;
}

// Power iteration on a^H a: an operator-norm oracle that shares no code with
// the Jacobi eigensolver.
double op_norm_power(const CMatrix& a, std::size_t iters = 600) {
  const std::size_t n = a.dim();
  if (n == 0) return 0;
  const CMatrix g = mul(a.adjoint(), a);
  std::vector<cx> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = cx(1.0 / std::sqrt(double(n)), 0.3 * double(i + 1));
  double lam = 0;
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<cx> w(n, cx(0, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += g(i, j) * v[j];
    double nrm = 0;
    for (const cx& z : w) nrm += std::norm(z);
    nrm = std::sqrt(nrm);
    if (nrm == 0) return 0;
    for (cx& z : w) z /= nrm;
    lam = nrm;
    v = std::move(w);
  }
  return std::sqrt(lam);
}

}  // namespace

TEST_CASE("shape validation and exact unit counts") {
  CHECK_THROWS_AS(make_shape({}), shape_error);
  CHECK_THROWS_AS(make_shape({Int(2), Int(0)}), shape_error);
  CHECK_THROWS_AS(make_shape({Int(-1)}), shape_error);

  const AlgebraShape s = make_shape({Int(2), Int(3)});
  CHECK(s.blocks() == 2);
  CHECK(s.unit_count() == Int(13));  // 4 + 9
  CHECK(s.materializable());
  CHECK(s.dense_dims() == std::vector<std::size_t>{2, 3});

  // Dimensions beyond dense storage stay representable exactly.
  const AlgebraShape big = make_shape({Int("1208925819614629174706176")});  // 2^80
  CHECK(big.unit_count() == Int("1461501637330902918203684832716283019655932542976"));
  CHECK(!big.materializable());
  CHECK_THROWS_AS(big.dense_dims(), shape_error);
}

TEST_CASE("matrix adjoint, trace, frobenius on known values") {
  CMatrix m(2);
  m(0, 0) = cx(1, 2);
  m(0, 1) = cx(0, -3);
  m(1, 0) = cx(4, 0);
  m(1, 1) = cx(-1, 1);

  const CMatrix a = m.adjoint();
  CHECK(a(0, 0) == cx(1, -2));
  CHECK(a(1, 0) == cx(0, 3));
  CHECK(a(0, 1) == cx(4, 0));
  CHECK(a(1, 1) == cx(-1, -1));

  CHECK(m.trace() == cx(0, 3));
  CHECK(m.frobenius() == doctest::Approx(std::sqrt(1 + 4 + 9 + 16 + 1 + 1)).epsilon(1e-14));
}

TEST_CASE("hermitian eigensolver recovers a planted spectrum") {
  CounterRng rng(11, 1);
  for (std::size_t n : {2u, 3u, 5u, 8u}) {
    const std::vector<double> planted = [&] {
      std::vector<double> d(n);
      for (double& v : d) v = rng.uniform(-5.0, 5.0);
      std::sort(d.begin(), d.end());
      return d;
    }();
    const CMatrix u = random_unitary(n, rng);
    CMatrix d(n);
    for (std::size_t i = 0; i < n; ++i) d(i, i) = planted[i];
    const CMatrix h = mul(mul(u, d), u.adjoint());

    const EigResult e = hermitian_eigen(h, true);
    REQUIRE(e.values.size() == n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(e.values[i] == doctest::Approx(planted[i]).epsilon(1e-10));

    // Eigenvectors reconstruct the matrix.
    CMatrix d2(n);
    for (std::size_t i = 0; i < n; ++i) d2(i, i) = e.values[i];
    const CMatrix back = mul(mul(e.vectors, d2), e.vectors.adjoint());
    CHECK((back - h).frobenius() <= 1e-10 * (1 + h.frobenius()));
  }
}

TEST_CASE("2x2 hermitian eigenvalues match the closed form") {
  CounterRng rng(12, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(-3, 3), c = rng.uniform(-3, 3);
    const cx b(rng.uniform(-3, 3), rng.uniform(-3, 3));
    CMatrix h(2);
    h(0, 0) = a;
    h(0, 1) = b;
    h(1, 0) = std::conj(b);
    h(1, 1) = c;
    const double disc = std::sqrt((a - c) * (a - c) + 4 * std::norm(b));
    const EigResult e = hermitian_eigen(h);
    CHECK(e.values[0] == doctest::Approx((a + c - disc) / 2).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx((a + c + disc) / 2).epsilon(1e-12));
  }
}

TEST_CASE("operator norm: known values and power-iteration oracle") {
  CMatrix r(2);  // rank-one, singular value 2
  r(0, 1) = cx(2, 0);
  CHECK(operator_norm(r) == doctest::Approx(2.0).epsilon(1e-12));

  CMatrix d(3);
  d(0, 0) = cx(-4, 0);
  d(1, 1) = cx(1, 0);
  d(2, 2) = cx(3, 0);
  CHECK(operator_norm(d) == doctest::Approx(4.0).epsilon(1e-12));

  CounterRng rng(13, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix m = random_matrix(2 + trial % 4, rng);
    CHECK(operator_norm(m) == doctest::Approx(op_norm_power(m)).epsilon(1e-8));
  }
}

TEST_CASE("block element arithmetic and block-wise operator norm") {
  const AlgebraShape s = make_shape({Int(2), Int(3)});
  CounterRng rng(14, 4);
  const BlockElement a = random_sa_element(s, rng);
  const BlockElement b = random_sa_element(s, rng);

  BlockElement sum = a + b;
  BlockElement back = sum - b;
  for (std::size_t k = 0; k < s.blocks(); ++k)
    CHECK((back.blocks[k] - a.blocks[k]).frobenius() <= 1e-13);

  double blockwise = 0;
  for (const CMatrix& blk : a.blocks) blockwise = std::max(blockwise, operator_norm(blk));
  CHECK(op_norm(a) == doctest::Approx(blockwise).epsilon(1e-13));

  CHECK(op_norm(BlockElement::identity(s)) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(op_norm(BlockElement::zero(s)) == 0.0);
}

TEST_CASE("jordan and lie products: symmetry, units, and reassembly") {
  const AlgebraShape s = make_shape({Int(3), Int(2)});
  CounterRng rng(15, 5);
  const BlockElement a = random_sa_element(s, rng);
  const BlockElement b = random_sa_element(s, rng);
  const BlockElement one = BlockElement::identity(s);

  CHECK(is_self_adjoint(jordan(a, b), 1e-12));
  CHECK(is_self_adjoint(lie(a, b), 1e-12));
  CHECK(op_norm(jordan(a, one) - a) <= 1e-13);
  CHECK(op_norm(lie(a, a)) <= 1e-13);
  CHECK(op_norm(jordan(a, b) - jordan(b, a)) <= 1e-13);
  CHECK(op_norm(lie(a, b) + lie(b, a)) <= 1e-13);

  // ab = a o b + i {a,b} reassembles the ordinary product.
  const BlockElement recon = jordan(a, b) + cx(0, 1) * lie(a, b);
  CHECK(op_norm(recon - mul(a, b)) <= 1e-12);
}

TEST_CASE("self-adjoint projection is idempotent and fixes hermitian input") {
  const AlgebraShape s = make_shape({Int(2), Int(2)});
  CounterRng rng(16, 6);
  BlockElement x = BlockElement::zero(s);
  for (std::size_t k = 0; k < 2; ++k) x.blocks[k] = random_matrix(2, rng);

  const BlockElement p = sa_projection(x);
  CHECK(is_self_adjoint(p, 1e-13));
  CHECK(op_norm(sa_projection(p) - p) <= 1e-13);

  const BlockElement h = random_sa_element(s, rng);
  CHECK(op_norm(sa_projection(h) - h) <= 1e-13);
  CHECK(sa_defect(h) <= 1e-13);
  CHECK(!is_self_adjoint(x, 1e-6));  // random complex input is not hermitian
}

TEST_CASE("matrix units enumerate in (block, row, col) order") {
  const AlgebraShape s = make_shape({Int(2), Int(1)});
  const std::vector<UnitIndex> idx = unit_indices(s);
  REQUIRE(idx.size() == 5);  // 4 + 1
  CHECK(idx[0].block == 0);
  CHECK(idx[0].row == 0);
  CHECK(idx[0].col == 0);
  CHECK(idx[1].col == 1);
  CHECK(idx[4].block == 1);

  // e_{k,j,m} e_{k,m,l} = e_{k,j,l} spot check through mul.
  const BlockElement e01 = matrix_unit(s, 0, 0, 1);
  const BlockElement e11 = matrix_unit(s, 0, 1, 1);
  CHECK(op_norm(mul(e01, e11) - e01) <= 1e-15);
  CHECK(op_norm(mul(e11, e01)) <= 1e-15);
}

TEST_CASE("hilbert-schmidt pairing is sesquilinear and positive") {
  const AlgebraShape s = make_shape({Int(2), Int(3)});
  CounterRng rng(17, 7);
  const BlockElement a = random_sa_element(s, rng);
  const BlockElement b = random_sa_element(s, rng);

  const cx ab = hs_inner(a, b);
  const cx ba = hs_inner(b, a);
  CHECK(std::abs(ab - std::conj(ba)) <= 1e-12);
  CHECK(hs_inner(a, a).real() >= 0);
  CHECK(std::abs(hs_inner(a, a).imag()) <= 1e-12);

  BlockElement scaled = b;
  scaled *= cx(2, 1);
  CHECK(std::abs(hs_inner(a, scaled) - cx(2, 1) * ab) <= 1e-12);
}
