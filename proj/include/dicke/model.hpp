#pragma once

#include "dicke/spin_boson.hpp"

#include <memory>
#include <mutex>
#include <optional>

namespace dicke {

// Frequencies are in units of omega_0 unless a caller rescales them.
struct StaticParams {
  double delta_p = 1.0;
  double omega_0 = 1.0;
  double g = 0.0;
  int n_atoms = 1;

  // delta_p >= 0 (negative is unstable), omega_0 > 0, N >= 1.
  void validate() const;
};

struct DriveParams {
  double g_d = 0.0;
  double omega = 1.0;

  double chi(int n_atoms) const;
  void validate() const;
};

struct MicroscopicParams {
  double g1 = 0.0, g2 = 0.0;
  double Omega_1 = 0.0, Omega_2 = 0.0;
  double Delta_1 = 0.0, Delta_2 = 0.0;
  double delta_c = 0.0;
  double omega_b = 0.0, omega_b_prime = 0.0;
  int n_atoms = 1;
};

// Composite spin (x) boson space with the embedded operators every
// Hamiltonian needs. Immutable after construction; the generator
// eigendecomposition is computed on first use.
class DickeSpace {
 public:
  explicit DickeSpace(HilbertDims dims);

  const HilbertDims& dims() const noexcept { return dims_; }
  const SpinOps& spin() const noexcept { return spin_; }
  const BosonOps& boson() const noexcept { return boson_; }
  Space space() const { return Space::composite(dims_); }

  Operator embed_spin(const Operator& spin_op) const;
  Operator embed_boson(const Operator& boson_op) const;

  const Operator& sx() const noexcept { return sx_; }
  const Operator& sy() const noexcept { return sy_; }
  const Operator& sz() const noexcept { return sz_; }
  const Operator& sx2() const noexcept { return sx2_; }
  const Operator& number() const noexcept { return n_; }
  // (a^dagger + a) S_x
  const Operator& x_sx() const noexcept { return x_sx_; }
  // (a - a^dagger) S_x
  const Operator& p_sx() const noexcept { return p_sx_; }
  const Operator& identity() const noexcept { return id_; }

  // exp[i pi (a^dagger a + S_z + N/2)]
  Operator parity() const;

  // Spectral decomposition of (a^dagger + a) S_x, computed on first use.
  const SpectralDecomposition& x_sx_spectrum() const;

 private:
  HilbertDims dims_;
  SpinOps spin_;
  BosonOps boson_;
  Operator sx_, sy_, sz_, sx2_, n_, x_sx_, p_sx_, id_;
  CachedSpectrum x_sx_spectrum_;
};

Operator h_static(const StaticParams& p, const DickeSpace& space);

double g_of_t(const DriveParams& d, double t);

// Static part taken from p (p.g is ignored).
Operator h_driven(const StaticParams& p, const DriveParams& d, double t,
                  const DickeSpace& space);

// H(t) = H_0 + g_d cos(wt) (a^dagger + a) S_x / sqrt(N), with H_0 and the
// coupling assembled once.
class DrivenDicke {
 public:
  DrivenDicke(const StaticParams& p, const DriveParams& d,
              const DickeSpace& space);
  Operator at(double t) const;
  double omega() const noexcept { return drive_.omega; }

 private:
  DriveParams drive_;
  Operator h0_;
  Operator coupling_;
};

// U(t) = exp[-i chi sin(wt) (a^dagger + a) S_x]
Operator rotating_unitary(const DriveParams& d, double t,
                          const DickeSpace& space);

// Rotating-frame Hamiltonian U^dagger H U - i U^dagger dU/dt in closed form.
Operator h_transformed(const StaticParams& p, const DriveParams& d, double t,
                       const DickeSpace& space);

// Fourier components h_n of the rotating-frame Hamiltonian for |n| <= 1.
// Throws UnsupportedOrder for |n| >= 2.
Operator fourier_component(int n, const StaticParams& p, const DriveParams& d,
                           const DickeSpace& space);

// (1/T) int_0^T H_u(t) e^{-i n w t} dt by the periodic trapezoid rule. Any n.
// Intended as an independent check of fourier_component.
Operator fourier_component_quadrature(int n, const StaticParams& p,
                                      const DriveParams& d,
                                      const DickeSpace& space, int nodes = 128);

// H_e = (q/N) S_x^2 + delta_p a^dagger a + omega_0 J0[chi (a^dagger + a)] S_z
Operator h_effective(const StaticParams& p, const DriveParams& d,
                     const DickeSpace& space);

// (q/N) S_x^2 + omega_0 S_z on the spin ladder alone.
Operator h_effective_large_n(double omega_0, double q, int n_atoms);

// Static parameters from the four-level microscopic couplings. g is the
// static collective coupling sqrt(N) g1 Omega_1 / Delta_1.
StaticParams from_microscopic(const MicroscopicParams& mp,
                              double rel_tol = 1e-6);

}  // namespace dicke
