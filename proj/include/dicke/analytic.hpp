#pragma once

#include "dicke/model.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dicke {

// Drive-induced repulsive interaction q = delta_p g_d^2 / (2 omega^2).
double q_of(double delta_p, double g_d, double omega);

// Frozen-spin treatment of (q/N) S_x^2 + omega_0 S_z around S_z = -N/2.
class FrozenSpinParams {
 public:
  static constexpr double kDefaultValidityRatio = 0.1;

  // validity holds iff q < validity_ratio * N * omega_0
  FrozenSpinParams(double omega_0, double q, int n_atoms,
                   double validity_ratio = kDefaultValidityRatio);

  double omega_0() const noexcept { return omega_0_; }
  double q() const noexcept { return q_; }
  int n_atoms() const noexcept { return n_atoms_; }
  // sqrt(omega_0 (omega_0 + q))
  double eta() const noexcept { return eta_; }
  bool valid() const noexcept { return valid_; }

 private:
  double omega_0_;
  double q_;
  int n_atoms_;
  double eta_;
  bool valid_;
};

struct SpinVariances {
  double var_x;
  double var_y;
};

SpinVariances frozen_spin_variances(const FrozenSpinParams& fp, double t);

// t_n = (2n + 1) pi / (2 eta), n = 0 .. n_terms-1
std::vector<double> optimal_times(const FrozenSpinParams& fp, int n_terms);

// xi_M^2 = omega_0^2 / eta^2 = 1 / (1 + q/omega_0). N only enters through
// the validity flag.
double msf_analytic(const FrozenSpinParams& fp);

// -10 log10(xi^2); throws InvalidArgument for xi^2 <= 0.
double db(double xi_sq);

struct ExperimentInputs {
  // Angular frequencies in rad/s (or any consistent unit).
  double delta_p = 0.0;
  double g_d = 0.0;
  double omega = 0.0;
  double omega_0 = 0.0;
  int n_atoms = 1;
  double gamma = 0.0;  // atom decay rate, 0 = not given
  std::optional<double> kappa;  // cavity decay, metadata only
  // Values printed alongside the recomputation; reported, never adopted.
  std::optional<double> quoted_q;
  std::optional<double> quoted_t_min;
  double high_frequency_ratio = 10.0;
  double validity_ratio = FrozenSpinParams::kDefaultValidityRatio;
};

struct ExperimentReport {
  ExperimentInputs inputs;
  double q = 0.0;
  double q_over_omega_0 = 0.0;
  double eta = 0.0;
  double xi_m_sq = 0.0;
  double squeezing_db = 0.0;
  double t_opt = 0.0;          // pi / (2 eta)
  double t_drive_quarter = 0.0;  // pi / (2 omega)
  std::optional<double> tau_atom;  // 1 / gamma
  bool within_decay_time = false;  // t_opt << tau_atom (factor 10)
  bool high_frequency_ok = false;
  bool frozen_spin_valid = false;
  std::vector<std::string> warnings;
  std::vector<std::string> discrepancies;
};

ExperimentReport experiment_report(const ExperimentInputs& in);

// Microscopic couplings with Omega_1 read as the drive amplitude Omega_d, so
// that g_d = sqrt(N) g1 Omega_d / Delta_1.
ExperimentReport experiment_report(const MicroscopicParams& mp, double omega,
                                   double gamma);

}  // namespace dicke
