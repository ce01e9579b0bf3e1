#pragma once

#include "dicke/spin_boson.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dicke {

enum class Method { midpoint_exponential, rk4 };

struct IntegratorConfig {
  double dt = 0.01;  // base step, units 1/omega_0
  Method method = Method::midpoint_exponential;
  double norm_tol = 1e-8;
  int steps_per_drive_period = 64;
  std::size_t max_steps = 100'000'000;
  // Per-step accuracy of the Krylov exponential action (2-norm).
  double krylov_tol = 1e-12;
  int krylov_max_dim = 40;
  // Above this dimension the exponential action uses Krylov instead of a
  // dense eigendecomposition of the instantaneous Hamiltonian.
  Index dense_exp_max_dim = 64;

  void validate() const;
};

enum class StaticMethod { automatic, dense, krylov, chebyshev };

struct EvolveOptions {
  bool store_states = false;
  double norm_tol = 1e-8;
  // automatic: dense eigendecomposition up to dense_eig_max_dim, Chebyshev
  // above.
  StaticMethod method = StaticMethod::automatic;
  Index dense_eig_max_dim = 1600;
  double krylov_tol = 1e-12;
  int krylov_max_dim = 40;
  double chebyshev_tol = 1e-13;
  // Evolve inside the parity sector of psi0 when H and psi0 allow it.
  bool use_parity_sector = true;
  // Keep the state at the first sample at or past each multiple of this
  // interval (0 disables).
  double checkpoint_every = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SpinMoments> moments;
  std::vector<double> photon_number;
  std::vector<StateVector> states;  // filled only when requested
  std::vector<double> checkpoint_times;
  std::vector<StateVector> checkpoints;
};

// psi <- exp(-i H tau) psi by Lanczos with full reorthogonalization, splitting
// tau whenever the Krylov dimension is insufficient for tol. Returns the
// number of matrix-vector products used.
std::size_t expmv_lanczos(const SparseMatrix& h, Vector& psi, double tau,
                          double tol, int max_dim);

using RealSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SpectralBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Gershgorin enclosure of the spectrum of a hermitian matrix.
SpectralBounds gershgorin_bounds(const SparseMatrix& h);
SpectralBounds gershgorin_bounds(const RealSparseMatrix& h);

// psi <- exp(-i H tau) psi by a Chebyshev expansion on [lo, hi]; the series
// is cut once the Bessel coefficients fall below tol. Returns the number of
// matrix-vector products.
std::size_t expmv_chebyshev(const SparseMatrix& h, SpectralBounds b,
                            Vector& psi, double tau, double tol);
std::size_t expmv_chebyshev(const RealSparseMatrix& h, SpectralBounds b,
                            Vector& psi, double tau, double tol);

// psi(t) = exp(-iH(t - t0)) psi0 at every sample time (times strictly
// increasing, >= t0).
Trajectory evolve_static(const Operator& h, const StateVector& psi0,
                         std::span<const double> t_samples,
                         const EvolveOptions& opt = {}, double t0 = 0.0);

using HamiltonianProvider = std::function<Operator(double)>;

struct DrivenHamiltonian {
  HamiltonianProvider at;
  double drive_omega = 0.0;  // sets the step bound; 0 means undriven
};

// Fixed step h = min(dt, (2 pi / omega) / steps_per_drive_period) on the grid
// t_k = k h. Samples off the grid branch from the last grid state with a
// partial step, so each sample is independent of the others requested.
// Midpoint exponential advances psi <- exp(-i H(t + h/2) h) psi. Norms are
// never renormalized: drift beyond norm_tol throws NormDrift.
Trajectory evolve_driven(const DrivenHamiltonian& h, const StateVector& psi0,
                         std::span<const double> t_samples,
                         const IntegratorConfig& cfg,
                         bool store_states = false);

struct ConvergenceReport {
  int n_max = 0;
  int n_max_check = 0;
  double max_change = 0.0;
  bool converged = false;
};

// A squeezing trace on a fixed time grid as a function of the Fock cutoff.
// NaN entries mark samples without a defined mean-spin direction.
struct ConvergenceScenario {
  std::function<std::vector<double>(int n_max)> xi_trace;
};

struct ConvergenceConfig {
  int increment = 5;
  double threshold = 1e-4;
};

// Reruns the scenario at n_max and n_max + increment and compares traces.
ConvergenceReport check_fock_convergence(const ConvergenceScenario& scenario,
                                         int n_max,
                                         const ConvergenceConfig& cfg = {});

// Smallest cutoff start, start + step, ... (<= limit) that passes the check.
ConvergenceReport find_converged_cutoff(const ConvergenceScenario& scenario,
                                        int start, int step, int limit,
                                        const ConvergenceConfig& cfg = {});

}  // namespace dicke
