#pragma once

// Independent dense reference implementations used as test oracles. Nothing
// here calls into the library's operator builders.

#include "dicke/spin_boson.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

struct Spin {
  Mat sx, sy, sz;
};

// Dicke ladder from the m-basis matrix elements of S_+.
inline Spin spin(int n_atoms) {
  const double j = 0.5 * n_atoms;
  const int d = n_atoms + 1;
  Mat sp = Mat::Zero(d, d), sz = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double m = -j + k;
    sz(k, k) = m;
    if (k + 1 < d) sp(k + 1, k) = std::sqrt(j * (j + 1) - m * (m + 1));
  }
  const Mat sm = sp.adjoint();
  return {(sp + sm) / 2.0, (sp - sm) / cplx(0.0, 2.0), sz};
}

struct Boson {
  Mat a, n, x;
};

inline Boson boson(int n_max) {
  const int d = n_max + 1;
  Mat a = Mat::Zero(d, d);
  for (int k = 1; k < d; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  Mat n = a.adjoint() * a;
  return {a, n, a + a.adjoint()};
}

// f(A) for hermitian A by a dense eigensolver.
inline Mat function_of(const Mat& a, const std::function<cplx(double)>& f) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  Vec fl(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) fl(i) = f(es.eigenvalues()(i));
  return es.eigenvectors() * fl.asDiagonal() * es.eigenvectors().adjoint();
}

inline Mat identity(Eigen::Index d) { return Mat::Identity(d, d); }

// Static Dicke Hamiltonian assembled from the dense factors.
inline Mat h_static(double dp, double w0, double g, int n_atoms, int n_max) {
  const Spin s = spin(n_atoms);
  const Boson b = boson(n_max);
  const Eigen::Index ds = n_atoms + 1, db = n_max + 1;
  return dp * kron(identity(ds), b.n) + w0 * kron(s.sz, identity(db)) +
         (g / std::sqrt(static_cast<double>(n_atoms))) * kron(s.sx, b.x);
}

inline Mat expm_hermitian(const Mat& h, double t) {
  return function_of(h, [t](double e) { return std::exp(cplx(0.0, -e * t)); });
}

inline cplx expect(const Mat& op, const Vec& psi) {
  return psi.dot(op * psi);
}

struct Moments {
  Eigen::Vector3d mean;
  Eigen::Matrix3d cov;
};

// Brute-force first and symmetrized second moments on the composite space.
inline Moments moments(const Vec& psi, int n_atoms, int n_max) {
  const Spin s = spin(n_atoms);
  const Mat id = identity(n_max + 1);
  const Mat ops[3] = {kron(s.sx, id), kron(s.sy, id), kron(s.sz, id)};
  Moments m;
  for (int a = 0; a < 3; ++a) m.mean(a) = expect(ops[a], psi).real();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      m.cov(a, b) =
          0.5 * expect(ops[a] * ops[b] + ops[b] * ops[a], psi).real() -
          m.mean(a) * m.mean(b);
  return m;
}

// Classical fixed-step RK4 for i dpsi/dt = H(t) psi.
inline Vec rk4(const std::function<Mat(double)>& h, Vec psi, double t_end,
               int steps) {
  const double dt = t_end / steps;
  const cplx mi(0.0, -1.0);
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const Mat h0 = h(t), hm = h(t + 0.5 * dt), h1 = h(t + dt);
    const Vec k1 = mi * (h0 * psi);
    const Vec k2 = mi * (hm * (psi + 0.5 * dt * k1));
    const Vec k3 = mi * (hm * (psi + 0.5 * dt * k2));
    const Vec k4 = mi * (h1 * (psi + dt * k3));
    psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return psi;
}

inline Vec random_state(Eigen::Index d, std::mt19937& rng) {
  std::normal_distribution<double> n;
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = cplx(n(rng), n(rng));
  return v / v.norm();
}

inline double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace oracle
