#pragma once

#include "dicke/model.hpp"
#include "dicke/propagator.hpp"
#include "dicke/spin_boson.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace dicke {

struct SqueezeSample {
  double t = 0.0;
  double xi_sq = 0.0;
  double db = 0.0;  // -10 log10(xi_sq); +inf when xi_sq == 0
  double mean_spin_len = 0.0;
};

// Smallest mean-spin length accepted as a direction: 1e-6 * N / 2.
double default_spin_epsilon(int n_atoms);

// Unit vectors (n1, n2) perpendicular to n0: n1 = normalize(e_z x n0), or
// normalize(e_x x n0) near the poles; n2 = n0 x n1.
std::pair<Eigen::Vector3d, Eigen::Vector3d> perpendicular_basis(
    const Eigen::Vector3d& n0);

// xi_R^2 = N lambda_min(Gamma) / |<S>|^2 with Gamma the covariance restricted
// to the plane perpendicular to <S>. Throws UndefinedDirection when
// |<S>| <= eps (eps < 0 selects the default).
SqueezeSample xi_squared(const SpinMoments& m, int n_atoms, double t = 0.0,
                         double eps = -1.0);

struct MsfResult {
  double xi_m_sq = 1.0;
  double t_star = 0.0;
  std::vector<SqueezeSample> samples;   // valid samples, time ordered
  std::vector<double> excluded_times;   // |<S>| <= eps
  bool refined = false;
};

// Moments at the requested times (strictly increasing).
using MomentSource =
    std::function<std::vector<SpinMoments>(std::span<const double>)>;

using TrajectorySource = std::function<Trajectory(std::span<const double>)>;

// Static evolution from psi0. With opt.checkpoint_every > 0, states kept along
// the way let later requests resume from the nearest earlier checkpoint.
TrajectorySource static_trajectory_source(Operator h, StateVector psi0,
                                          EvolveOptions opt);

MomentSource moments_of(TrajectorySource source);

struct ScanSettings {
  double horizon = 0.0;  // T_max
  double coarse_dt = 0.05;
  bool refine = true;
  double eps = -1.0;
};

// Coarse grid 0, dt, 2dt, ... <= T_max; with refine, a dt/10 grid on
// [t* - dt, t* + dt] around the coarse minimum. The result is the minimum over
// all valid samples. Throws NoValidSample if every sample is excluded.
MsfResult msf_scan(const MomentSource& source, int n_atoms,
                   const ScanSettings& s);

// max(4 pi / eta, 20 * 2 pi / omega) with eta = sqrt(omega_0 (omega_0 + q));
// omega <= 0 drops the drive term.
double default_horizon(double omega_0, double q, double omega);

struct UndrivenPoint {
  double g = 0.0;
  double xi_m_sq = 1.0;
  int n_max = 0;
};

// Fock cutoff for the static model large enough to hold the coherent
// displacement 2 g sqrt(N) / (2 delta_p) reached by the extreme S_x sectors.
int static_cutoff_estimate(double g, const StaticParams& p, double horizon);

// MSF of the static model along g, from |S_z=-N/2>|0>. dims.fock_cutoff() is a
// floor; each point uses max(floor, static_cutoff_estimate).
std::vector<UndrivenPoint> undriven_msf_curve(std::span<const double> g_values,
                                              const StaticParams& p,
                                              const HilbertDims& dims,
                                              const ScanSettings& scan,
                                              const EvolveOptions& opt = {});

}  // namespace dicke
