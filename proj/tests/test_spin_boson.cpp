#include "dicke/errors.hpp"
#include "dicke/spin_boson.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dicke;

namespace {

Operator boson_identity(int n_max) {
  return Operator::identity(Space::boson(n_max + 1));
}

Operator spin_identity(int n_atoms) {
  return Operator::identity(Space::spin(n_atoms + 1));
}

}  // namespace

TEST_CASE("spin ladder for N=2 has S_z = diag(-1, 0, 1)") {
  const SpinOps s = build_spin_ops(2);
  DenseMatrix expected = DenseMatrix::Zero(3, 3);
  expected(0, 0) = -1.0;
  expected(2, 2) = 1.0;
  CHECK(oracle::max_abs(s.sz.dense() - expected) == 0.0);
}

TEST_CASE("su(2) commutators and Casimir on the Dicke ladder") {
  for (int n : {1, 2, 10, 100}) {
    CAPTURE(n);
    const SpinOps s = build_spin_ops(n);
    const cplx i(0.0, 1.0);
    CHECK(max_abs_diff(commutator(s.sx, s.sy), i * s.sz) < 1e-10);
    CHECK(max_abs_diff(commutator(s.sy, s.sz), i * s.sx) < 1e-10);
    CHECK(max_abs_diff(commutator(s.sz, s.sx), i * s.sy) < 1e-10);
    const double j = 0.5 * n;
    const Operator casimir = s.sx * s.sx + s.sy * s.sy + s.sz * s.sz;
    CHECK(max_abs_diff(casimir, j * (j + 1) * spin_identity(n)) < 1e-10);
    CHECK(max_abs_diff(s.s2, j * (j + 1) * spin_identity(n)) == 0.0);
    CHECK(s.sx.hermitian());
    CHECK(s.sy.hermitian());
    CHECK(s.sz.hermitian());
  }
  const SpinOps s10 = build_spin_ops(10);
  CHECK(max_abs_diff(s10.s2, 30.0 * spin_identity(10)) == 0.0);
}

TEST_CASE("spin operators match the dense ladder oracle") {
  for (int n : {1, 3, 7}) {
    const SpinOps s = build_spin_ops(n);
    const oracle::Spin o = oracle::spin(n);
    CHECK(oracle::max_abs(s.sx.dense() - o.sx) < 1e-14);
    CHECK(oracle::max_abs(s.sy.dense() - o.sy) < 1e-14);
    CHECK(oracle::max_abs(s.sz.dense() - o.sz) < 1e-14);
  }
}

TEST_CASE("invalid sizes are rejected") {
  CHECK_THROWS_AS(build_spin_ops(0), InvalidArgument);
  CHECK_THROWS_AS(build_spin_ops(-3), InvalidArgument);
  CHECK_THROWS_AS(build_boson_ops(-1), InvalidArgument);
  CHECK_THROWS_AS(HilbertDims(0, 3), InvalidArgument);
}

TEST_CASE("truncated boson operators") {
  const BosonOps b1 = build_boson_ops(1);
  DenseMatrix a = DenseMatrix::Zero(2, 2);
  a(0, 1) = 1.0;
  CHECK(oracle::max_abs(b1.a.dense() - a) == 0.0);

  for (int n_max : {0, 1, 4, 20}) {
    CAPTURE(n_max);
    const BosonOps b = build_boson_ops(n_max);
    const DenseMatrix c = commutator(b.a, b.adag).dense();
    for (int k = 0; k < n_max; ++k) CHECK(std::abs(c(k, k) - 1.0) < 1e-12);
    // hard truncation: a^dagger |n_max> = 0 leaves -n_max on the corner
    CHECK(std::abs(c(n_max, n_max) + static_cast<double>(n_max)) < 1e-12);
    DenseMatrix off = c;
    off.diagonal().setZero();
    CHECK(oracle::max_abs(off) < 1e-12);
    CHECK(oracle::max_abs(b.adag.dense().col(n_max)) == 0.0);
  }
  CHECK(build_boson_ops(4).x.hermitian());
  CHECK(build_boson_ops(4).x.hermiticity_deviation() == 0.0);
}

TEST_CASE("tensor products respect the composite ordering") {
  const SpinOps s = build_spin_ops(2);
  const BosonOps b = build_boson_ops(2);
  const Operator sz_i = tensor(s.sz, boson_identity(2));
  const Operator i_n = tensor(spin_identity(2), b.n);
  CHECK(max_abs_diff(sz_i * i_n, i_n * sz_i) == 0.0);

  const HilbertDims dims(2, 2);
  CHECK(max_abs_diff(tensor(spin_identity(2), boson_identity(2)),
                     Operator::identity(Space::composite(dims))) == 0.0);

  const Operator sx_x = tensor(s.sx, b.x);
  const oracle::Mat ref = oracle::kron(oracle::spin(2).sx, oracle::boson(2).x);
  CHECK(oracle::max_abs(sx_x.dense() - ref) < 1e-14);
  CHECK(std::abs(sx_x.max_norm() - s.sx.max_norm() * b.x.max_norm()) < 1e-14);

  CHECK_THROWS_AS(tensor(b.x, s.sx), DimensionMismatch);
  CHECK_THROWS_AS(sz_i + tensor(build_spin_ops(1).sz, boson_identity(2)),
                  DimensionMismatch);
}

TEST_CASE("initial state is the coherent spin state with an empty cavity") {
  const HilbertDims d10(10, 6);
  const StateVector psi = initial_state(d10);
  const SpinMoments m = moments(psi, build_spin_ops(10));
  CHECK(m.mean(2) == doctest::Approx(-5.0).epsilon(1e-14));
  CHECK(std::abs(m.mean(0)) < 1e-14);
  CHECK(std::abs(m.mean(1)) < 1e-14);
  CHECK(psi.photon_number() == 0.0);
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(0, 0) = expected(1, 1) = 2.5;
  CHECK((m.cov - expected).cwiseAbs().maxCoeff() < 1e-12);

  const SpinMoments m100 = moments(initial_state(HilbertDims(100, 0)),
                                   build_spin_ops(100));
  CHECK(m100.cov(0, 0) == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(m100.cov(1, 1) == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("operator functions by spectral calculus") {
  const BosonOps b = build_boson_ops(12);
  const Operator x = b.x;
  CHECK(max_abs_diff(operator_function([](double v) { return cplx(v); }, x),
                     x) < 1e-12);
  const Operator one = operator_function(
      [](double v) { return std::exp(cplx(0.0, 0.0 * v)); }, x);
  CHECK(max_abs_diff(one, boson_identity(12)) < 1e-12);

  const auto c = operator_function([](double v) { return cplx(std::cos(0.3 * v)); }, x);
  const auto s = operator_function([](double v) { return cplx(std::sin(0.3 * v)); }, x);
  CHECK(max_abs_diff(c * c + s * s, boson_identity(12)) < 1e-10);

  // polynomial f agrees with the explicit polynomial
  const Operator poly = operator_function(
      [](double v) { return cplx(v * v * v - 2.0 * v + 1.0); }, x);
  const Operator explicit_poly = x * x * x - 2.0 * x + boson_identity(12);
  CHECK(max_abs_diff(poly, explicit_poly) < 1e-9);

  // shared spectrum reproduces the same function
  const Operator cached = b.x_spectrum.get().apply(
      [](double v) { return cplx(std::cos(0.3 * v)); });
  CHECK(max_abs_diff(cached, c) < 1e-12);

  const Operator non_hermitian(Space::boson(13), b.a.matrix(), false);
  CHECK_THROWS_AS(
      operator_function([](double v) { return cplx(v); }, non_hermitian),
      InvalidArgument);
}

TEST_CASE("moments match a brute-force dense evaluation") {
  std::mt19937 rng(7);
  for (auto [n, nm] : {std::pair{2, 2}, std::pair{2, 0}, std::pair{3, 4}}) {
    const HilbertDims dims(n, nm);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector v = oracle::random_state(dims.total_dim(), rng);
      const StateVector psi(dims, v);
      const SpinMoments m = moments(psi, build_spin_ops(n));
      const oracle::Moments ref = oracle::moments(v, n, nm);
      CHECK((m.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((m.cov - ref.cov).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff() < 1e-14);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m.cov);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
      CHECK(m.cov.trace() >= 0.0);
      const double j = 0.5 * n;
      CHECK(m.casimir == doctest::Approx(j * (j + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("state norms are guarded") {
  const HilbertDims dims(2, 1);
  Vector v = Vector::Zero(dims.total_dim());
  v(0) = 1.0 + 1e-6;
  CHECK_THROWS_AS(StateVector(dims, v), StaleState);
  CHECK_NOTHROW(StateVector(dims, v, 1e-5));
  CHECK_THROWS_AS(StateVector(dims, Vector::Zero(3)), DimensionMismatch);
  const StateVector loose(dims, v, 1e-5);
  CHECK_NOTHROW(moments(loose, build_spin_ops(2)));
  CHECK_THROWS_AS(StateVector::normalized(dims, Vector::Zero(dims.total_dim())),
                  InvalidArgument);
  CHECK(StateVector::normalized(dims, 3.0 * v).norm() ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("reduced spin density of a product state") {
  const HilbertDims dims(3, 2);
  std::mt19937 rng(3);
  const Vector spin = oracle::random_state(4, rng);
  const Vector bos = oracle::random_state(3, rng);
  Vector prod(12);
  for (int s = 0; s < 4; ++s)
    for (int n = 0; n < 3; ++n) prod(dims.index(s, n)) = spin(s) * bos(n);
  const StateVector psi(dims, prod);
  const DenseMatrix rho = psi.reduced_spin_density();
  CHECK(oracle::max_abs(rho - spin * spin.adjoint()) < 1e-14);
  const double nb = bos.cwiseAbs2().dot(Eigen::Vector3d(0, 1, 2));
  CHECK(psi.photon_number() == doctest::Approx(nb).epsilon(1e-13));
}
