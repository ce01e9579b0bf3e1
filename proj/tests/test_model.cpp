#include "dicke/analytic.hpp"
#include "dicke/errors.hpp"
#include "dicke/model.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace dicke;
using oracle::Mat;

namespace {

constexpr double kPi = std::numbers::pi;

double commutator_norm(const Operator& a, const Operator& b) {
  return commutator(a, b).max_norm();
}

std::vector<double> sorted_eigenvalues(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  std::vector<double> v(es.eigenvalues().data(),
                        es.eigenvalues().data() + es.eigenvalues().size());
  return v;
}

// U^dagger H U - i U^dagger dU/dt with U from the dense generator and dU/dt
// by a central difference.
Mat gauge_oracle(double dp, double w0, double gd, double w, int n, int nm,
                 double t) {
  const oracle::Spin s = oracle::spin(n);
  const oracle::Boson b = oracle::boson(nm);
  const Mat gen = oracle::kron(s.sx, b.x);
  const double chi = gd / (w * std::sqrt(static_cast<double>(n)));
  const auto u = [&](double tt) {
    return oracle::function_of(gen, [&](double e) {
      return std::exp(std::complex<double>(0.0, -chi * std::sin(w * tt) * e));
    });
  };
  const Mat h = oracle::h_static(dp, w0, gd * std::cos(w * t), n, nm);
  const double step = 1e-6 / w;
  const Mat du = (u(t + step) - u(t - step)) / (2.0 * step);
  const Mat ut = u(t);
  return ut.adjoint() * h * ut - std::complex<double>(0.0, 1.0) * ut.adjoint() * du;
}

}  // namespace

TEST_CASE("static Hamiltonian spectrum without coupling") {
  const StaticParams p{1.3, 1.0, 0.0, 4};
  const DickeSpace space(HilbertDims(4, 5));
  const Operator h = h_static(p, space);
  CHECK(h.hermitian());
  std::vector<double> expected;
  for (int k = 0; k <= 5; ++k)
    for (int m = -2; m <= 2; ++m) expected.push_back(1.3 * k + m);
  std::sort(expected.begin(), expected.end());
  const auto got = sorted_eigenvalues(h.dense());
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("static Hamiltonian matches the dense Kronecker oracle") {
  const StaticParams p{1.0, 1.0, 0.5, 2};
  const DickeSpace space(HilbertDims(2, 4));
  const Operator h = h_static(p, space);
  const Mat ref = oracle::h_static(1.0, 1.0, 0.5, 2, 4);
  CHECK(oracle::max_abs(h.dense() - ref) < 1e-14);
  CHECK(sorted_eigenvalues(h.dense()).front() ==
        doctest::Approx(sorted_eigenvalues(ref).front()).epsilon(1e-12));
  CHECK_THROWS_AS(h_static(StaticParams{1.0, 1.0, 0.5, 3}, space),
                  DimensionMismatch);
  CHECK_THROWS_AS(h_static(StaticParams{-1.0, 1.0, 0.5, 2}, space), Instability);
}

TEST_CASE("parity symmetry of every Dicke Hamiltonian") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int n : {1, 2, 5}) {
    const DickeSpace space(HilbertDims(n, 6));
    const Operator pi = space.parity();
    CHECK(max_abs_diff(pi * pi, space.identity()) < 1e-12);
    for (int trial = 0; trial < 3; ++trial) {
      const StaticParams p{u(rng), 0.2 + u(rng), u(rng), n};
      const DriveParams d{u(rng), 1.0 + u(rng)};
      CHECK(commutator_norm(h_static(p, space), pi) < 1e-9);
      CHECK(commutator_norm(h_driven(p, d, u(rng), space), pi) < 1e-9);
      CHECK(commutator_norm(h_effective(p, d, space), pi) < 1e-9);
      CHECK(commutator_norm(h_transformed(p, d, u(rng), space), pi) < 1e-9);
    }
  }
}

TEST_CASE("drive waveform") {
  const DriveParams d{2.5, 4.0};
  CHECK(g_of_t(d, 0.0) == 2.5);
  CHECK(std::abs(g_of_t(d, kPi / 8.0)) < 1e-15);
  CHECK(g_of_t(d, kPi / 4.0) == doctest::Approx(-2.5).epsilon(1e-15));
  CHECK(d.chi(4) == doctest::Approx(2.5 / 8.0).epsilon(1e-15));
  CHECK_THROWS_AS(DriveParams({1.0, 0.0}).validate(), InvalidArgument);
}

TEST_CASE("driven Hamiltonian limits") {
  const DickeSpace space(HilbertDims(3, 5));
  const StaticParams p{1.0, 1.0, 0.0, 3};
  const DriveParams d{3.0, 7.0};
  StaticParams pg = p;
  pg.g = 3.0;
  CHECK(max_abs_diff(h_driven(p, d, 0.0, space), h_static(pg, space)) < 1e-14);
  CHECK(max_abs_diff(h_driven(p, d, kPi / 14.0, space), h_static(p, space)) <
        1e-14);
  const DrivenDicke model(p, d, space);
  for (double t : {0.0, 0.1, 0.37, 1.9}) {
    const Operator h = model.at(t);
    CHECK(h.hermitian());
    CHECK(h.hermiticity_deviation() < 1e-10);
    CHECK(max_abs_diff(h, h_driven(p, d, t, space)) < 1e-13);
  }
}

TEST_CASE("rotating-frame unitary") {
  const DickeSpace space(HilbertDims(2, 8));
  const DriveParams d{5.0, 10.0};
  CHECK(max_abs_diff(rotating_unitary(d, 0.0, space), space.identity()) < 1e-12);
  CHECK(max_abs_diff(rotating_unitary(d, kPi / 10.0, space), space.identity()) <
        1e-10);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int k = 0; k < 20; ++k) {
    const Operator uu = rotating_unitary(d, u(rng), space);
    CHECK(max_abs_diff(uu * uu.adjoint(), space.identity()) < 1e-10);
  }
}

TEST_CASE("transformed Hamiltonian at t = 0 and hermiticity") {
  const DickeSpace space(HilbertDims(2, 8));
  const StaticParams p{1.0, 1.0, 0.0, 2};
  const DriveParams d{5.0, 10.0};
  CHECK(max_abs_diff(h_transformed(p, d, 0.0, space),
                     p.delta_p * space.number() + p.omega_0 * space.sz()) <
        1e-13);
  CHECK(max_abs_diff(h_transformed(p, d, kPi / d.omega, space),
                     p.delta_p * space.number() + p.omega_0 * space.sz()) <
        1e-12);
  for (double t : {0.03, 0.2, 0.51})
    CHECK(h_transformed(p, d, t, space).hermiticity_deviation() < 1e-10);
}

TEST_CASE("gauge identity for a weak drive on the full truncated space") {
  const int n = 2, nm = 8;
  const DickeSpace space(HilbertDims(n, nm));
  const StaticParams p{1.0, 1.0, 0.0, n};
  const DriveParams d{0.01, 10.0};
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi / d.omega);
  for (int k = 0; k < 20; ++k) {
    const double t = u(rng);
    const Mat ref = gauge_oracle(1.0, 1.0, d.g_d, d.omega, n, nm, t);
    CHECK(oracle::max_abs(h_transformed(p, d, t, space).dense() - ref) < 1e-5);
  }
}

TEST_CASE("gauge residual at strong drive is the cavity truncation term") {
  // The atom and drive parts of the closed form are exact under truncation;
  // only U^dagger n U departs from n + i theta (a - a^dagger) S_x + theta^2 S_x^2,
  // because [a, a^dagger] != 1 on the last Fock state.
  const int n = 2, nm = 8;
  const DickeSpace space(HilbertDims(n, nm));
  const StaticParams p{1.0, 1.0, 0.0, n};
  const DriveParams d{5.0, 10.0};
  const oracle::Spin s = oracle::spin(n);
  const oracle::Boson b = oracle::boson(nm);
  const Mat id_b = oracle::identity(nm + 1);
  const Mat gen = oracle::kron(s.sx, b.x);
  const Mat num = oracle::kron(oracle::identity(n + 1), b.n);
  const Mat p_sx = oracle::kron(s.sx, b.a - b.a.adjoint());
  const Mat sx2 = oracle::kron(s.sx * s.sx, id_b);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi / d.omega);
  double worst_full = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double t = u(rng);
    const double theta = d.chi(n) * std::sin(d.omega * t);
    const Mat ut = oracle::function_of(gen, [&](double e) {
      return std::exp(std::complex<double>(0.0, -theta * e));
    });
    const Mat exact_cavity = ut.adjoint() * num * ut;
    const Mat closed_cavity =
        num + std::complex<double>(0.0, theta) * p_sx + theta * theta * sx2;
    const Mat ref = gauge_oracle(1.0, 1.0, d.g_d, d.omega, n, nm, t);
    const Mat hu = h_transformed(p, d, t, space).dense();
    CHECK(oracle::max_abs(hu - ref + p.delta_p * (exact_cavity - closed_cavity)) <
          1e-5);
    worst_full = std::max(worst_full, oracle::max_abs(hu - ref));
  }
  // the truncation term is not small at this cutoff
  CHECK(worst_full > 1e-2);
}

TEST_CASE("gauge identity holds on low Fock states given cutoff headroom") {
  const int n = 2, nm = 40, block = 9;
  const DickeSpace space(HilbertDims(n, nm));
  const StaticParams p{1.0, 1.0, 0.0, n};
  const DriveParams d{5.0, 10.0};
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi / d.omega);
  for (int k = 0; k < 5; ++k) {
    const double t = u(rng);
    const Mat diff =
        h_transformed(p, d, t, space).dense() -
        gauge_oracle(1.0, 1.0, d.g_d, d.omega, n, nm, t);
    double worst = 0.0;
    for (int s1 = 0; s1 <= n; ++s1)
      for (int s2 = 0; s2 <= n; ++s2)
        for (int k1 = 0; k1 < block; ++k1)
          for (int k2 = 0; k2 < block; ++k2)
            worst = std::max(worst, std::abs(diff(s1 * (nm + 1) + k1,
                                                  s2 * (nm + 1) + k2)));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("Fourier components of the rotating-frame Hamiltonian") {
  const int n = 2, nm = 8;
  const DickeSpace space(HilbertDims(n, nm));
  const StaticParams p{1.0, 1.0, 0.0, n};
  const DriveParams d{6.0, 10.0};
  const Operator h0 = fourier_component(0, p, d, space);
  const Operator h1 = fourier_component(1, p, d, space);
  const Operator hm1 = fourier_component(-1, p, d, space);
  CHECK(max_abs_diff(h0, h_effective(p, d, space)) == 0.0);
  CHECK(max_abs_diff(hm1, h1.adjoint()) < 1e-10);
  CHECK_THROWS_AS(fourier_component(2, p, d, space), UnsupportedOrder);
  CHECK_THROWS_AS(fourier_component(-3, p, d, space), UnsupportedOrder);

  // independent periodic trapezoid over sampled H_u(t)
  const int nodes = 128;
  const double period = 2.0 * kPi / d.omega;
  for (int order : {-1, 0, 1}) {
    CAPTURE(order);
    Mat acc = Mat::Zero(space.dims().total_dim(), space.dims().total_dim());
    for (int k = 0; k < nodes; ++k) {
      const double t = period * k / nodes;
      acc += h_transformed(p, d, t, space).dense() *
             std::exp(std::complex<double>(0.0, -order * d.omega * t));
    }
    acc /= static_cast<double>(nodes);
    const Mat closed = fourier_component(order, p, d, space).dense();
    CHECK(oracle::max_abs(closed - acc) / oracle::max_abs(closed) < 1e-6);
    const Operator lib = fourier_component_quadrature(order, p, d, space, 64);
    CHECK(max_abs_diff(lib, fourier_component(order, p, d, space)) /
              oracle::max_abs(closed) <
          1e-6);
  }

  const DriveParams off{0.0, 10.0};
  CHECK(fourier_component(1, p, off, space).max_norm() < 1e-15);
  CHECK(fourier_component(-1, p, off, space).max_norm() < 1e-15);
  CHECK(max_abs_diff(fourier_component(0, p, off, space),
                     space.number() + space.sz()) < 1e-14);
}

TEST_CASE("effective Hamiltonian matches a dense Bessel oracle") {
  const int n = 3, nm = 6;
  const DickeSpace space(HilbertDims(n, nm));
  const StaticParams p{1.2, 0.8, 0.0, n};
  const DriveParams d{9.0, 11.0};
  const double q = q_of(p.delta_p, d.g_d, d.omega);
  const double chi = d.g_d / (d.omega * std::sqrt(3.0));
  const oracle::Spin s = oracle::spin(n);
  const oracle::Boson b = oracle::boson(nm);
  const Mat j0 = oracle::function_of(
      b.x, [&](double x) { return std::complex<double>(std::cyl_bessel_j(0.0, std::abs(chi * x))); });
  const Mat ref = (q / n) * oracle::kron(s.sx * s.sx, oracle::identity(nm + 1)) +
                  p.delta_p * oracle::kron(oracle::identity(n + 1), b.n) +
                  p.omega_0 * oracle::kron(s.sz, j0);
  const Operator h = h_effective(p, d, space);
  CHECK(h.hermitian());
  CHECK(oracle::max_abs(h.dense() - ref) < 1e-12);
  CHECK(max_abs_diff(h_effective(p, DriveParams{0.0, 11.0}, space),
                     1.2 * space.number() + 0.8 * space.sz()) < 1e-14);
  CHECK(q_of(1.0, 20.0, 20.0) == doctest::Approx(0.5));
}

TEST_CASE("large-N effective Hamiltonian") {
  const Operator h0 = h_effective_large_n(1.0, 0.0, 4);
  CHECK(h0.dim() == 5);
  const auto e0 = sorted_eigenvalues(h0.dense());
  for (int k = 0; k < 5; ++k) CHECK(e0[k] == doctest::Approx(k - 2.0));

  const Operator h2 = h_effective_large_n(0.7, 1.9, 2);
  const oracle::Spin s = oracle::spin(2);
  const Mat ref = (1.9 / 2.0) * s.sx * s.sx + 0.7 * s.sz;
  CHECK(h2.dim() == 3);
  CHECK(oracle::max_abs(h2.dense() - ref) < 1e-14);
  const auto a = sorted_eigenvalues(h2.dense());
  const auto r = sorted_eigenvalues(ref);
  for (int k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(r[k]).epsilon(1e-12));

  // omega_0 = 0: S_x eigenbasis, spectrum q m^2 / N
  const auto ex = sorted_eigenvalues(h_effective_large_n(0.0, 3.0, 4).dense());
  std::vector<double> expected;
  for (int m = -2; m <= 2; ++m) expected.push_back(3.0 * m * m / 4.0);
  std::sort(expected.begin(), expected.end());
  for (int k = 0; k < 5; ++k)
    CHECK(ex[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  CHECK_THROWS_AS(h_effective_large_n(1.0, -0.1, 4), InvalidArgument);
}

TEST_CASE("microscopic parameter mapping") {
  MicroscopicParams mp;
  mp.g1 = mp.g2 = 1.0;
  mp.Omega_1 = mp.Omega_2 = 10.0;
  mp.Delta_1 = mp.Delta_2 = 100.0;
  mp.delta_c = 0.5;
  mp.omega_b = 3.0;
  mp.omega_b_prime = 2.0;
  mp.n_atoms = 100;
  const StaticParams p = from_microscopic(mp);
  CHECK(p.g == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.delta_p == doctest::Approx(0.5 + 100.0 / 100.0).epsilon(1e-14));
  CHECK(p.omega_0 == doctest::Approx(1.0));
  CHECK(p.n_atoms == 100);

  MicroscopicParams edge = mp;
  edge.delta_c = -100.0 * 1.0 / 100.0;
  CHECK(from_microscopic(edge).delta_p == doctest::Approx(0.0));

  MicroscopicParams unstable = mp;
  unstable.delta_c = -2.0;
  CHECK_THROWS_AS(from_microscopic(unstable), Instability);

  MicroscopicParams mismatch = mp;
  mismatch.g2 = 1.1;
  CHECK_THROWS_AS(from_microscopic(mismatch), InvalidConfiguration);
  MicroscopicParams rabi = mp;
  rabi.Omega_2 = 11.0;
  CHECK_THROWS_AS(from_microscopic(rabi), InvalidConfiguration);
  MicroscopicParams zero = mp;
  zero.Delta_1 = 0.0;
  CHECK_THROWS_AS(from_microscopic(zero), InvalidConfiguration);

  // consistent asymmetric couplings pass
  MicroscopicParams asym = mp;
  asym.g2 = 2.0;
  asym.Delta_2 = 400.0;  // g2^2/Delta2 = 0.01
  asym.Omega_2 = 20.0;   // g2 Omega2 / Delta2 = 0.1
  CHECK_NOTHROW(from_microscopic(asym));
}
