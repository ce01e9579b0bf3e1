#include "dicke/analytic.hpp"

#include "dicke/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dicke {

double q_of(double delta_p, double g_d, double omega) {
  if (omega == 0.0) throw InvalidArgument("q: drive frequency must be non-zero");
  if (delta_p < 0.0)
    throw Instability("delta_p < 0: the system becomes unstable");
  return delta_p * g_d * g_d / (2.0 * omega * omega);
}

FrozenSpinParams::FrozenSpinParams(double omega_0, double q, int n_atoms,
                                   double validity_ratio)
    : omega_0_(omega_0), q_(q), n_atoms_(n_atoms) {
  if (!(omega_0 > 0.0)) throw InvalidArgument("omega_0 must be > 0");
  if (q < 0.0) throw InvalidArgument("q must be >= 0");
  if (n_atoms < 1) throw InvalidArgument("N must be >= 1");
  eta_ = std::sqrt(omega_0 * (omega_0 + q));
  valid_ = q < validity_ratio * n_atoms * omega_0;
}

namespace {

void require_valid(const FrozenSpinParams& fp) {
  if (!fp.valid())
    throw OutOfRegime("frozen-spin result needs q << N omega_0");
}

}  // namespace

SpinVariances frozen_spin_variances(const FrozenSpinParams& fp, double t) {
  require_valid(fp);
  const double quarter_n = 0.25 * fp.n_atoms();
  const double c = std::cos(fp.eta() * t);
  const double s = std::sin(fp.eta() * t);
  const double r = fp.omega_0() / fp.eta();
  return {quarter_n * (c * c + r * r * s * s),
          quarter_n * (c * c + s * s / (r * r))};
}

std::vector<double> optimal_times(const FrozenSpinParams& fp, int n_terms) {
  if (n_terms < 1) throw InvalidArgument("n_terms must be >= 1");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(n_terms));
  for (int n = 0; n < n_terms; ++n)
    times.push_back((2.0 * n + 1.0) * std::numbers::pi / (2.0 * fp.eta()));
  return times;
}

double msf_analytic(const FrozenSpinParams& fp) {
  require_valid(fp);
  return 1.0 / (1.0 + fp.q() / fp.omega_0());
}

double db(double xi_sq) {
  if (!(xi_sq > 0.0)) throw InvalidArgument("dB needs xi^2 > 0");
  return -10.0 * std::log10(xi_sq);
}

ExperimentReport experiment_report(const ExperimentInputs& in) {
  ExperimentReport r;
  r.inputs = in;
  r.q = q_of(in.delta_p, in.g_d, in.omega);
  r.q_over_omega_0 = r.q / in.omega_0;
  r.eta = std::sqrt(in.omega_0 * (in.omega_0 + r.q));
  r.xi_m_sq = 1.0 / (1.0 + r.q_over_omega_0);
  r.squeezing_db = db(r.xi_m_sq);
  r.t_opt = std::numbers::pi / (2.0 * r.eta);
  r.t_drive_quarter = std::numbers::pi / (2.0 * in.omega);

  r.high_frequency_ok =
      in.omega >= in.high_frequency_ratio * std::max(in.delta_p, in.omega_0);
  r.frozen_spin_valid =
      r.q < in.validity_ratio * static_cast<double>(in.n_atoms) * in.omega_0;

  std::ostringstream msg;
  if (!r.high_frequency_ok) {
    msg << "high-frequency condition violated: omega/max(delta_p, omega_0) = "
        << in.omega / std::max(in.delta_p, in.omega_0) << " < "
        << in.high_frequency_ratio;
    r.warnings.push_back(msg.str());
    msg.str("");
  }
  if (!r.frozen_spin_valid) {
    msg << "frozen-spin validity violated: q/(N omega_0) = "
        << r.q_over_omega_0 / in.n_atoms << " >= " << in.validity_ratio;
    r.warnings.push_back(msg.str());
    msg.str("");
  }
  if (in.gamma > 0.0) {
    r.tau_atom = 1.0 / in.gamma;
    r.within_decay_time = 10.0 * r.t_opt <= *r.tau_atom;
    if (!r.within_decay_time) {
      msg << "optimal time " << r.t_opt << " is not << atom decay time "
          << *r.tau_atom;
      r.warnings.push_back(msg.str());
      msg.str("");
    }
  }
  const auto differs = [](double a, double b) {
    return std::abs(a - b) > 1e-3 * std::max(std::abs(a), std::abs(b));
  };
  if (in.quoted_q && differs(*in.quoted_q, r.q)) {
    msg << "quoted q = " << *in.quoted_q << " differs from recomputed q = "
        << r.q << " (ratio " << *in.quoted_q / r.q << ")";
    r.discrepancies.push_back(msg.str());
    msg.str("");
  }
  if (in.quoted_t_min) {
    if (differs(*in.quoted_t_min, r.t_drive_quarter)) {
      msg << "quoted shortest time " << *in.quoted_t_min
          << " differs from pi/(2 omega) = " << r.t_drive_quarter;
      r.discrepancies.push_back(msg.str());
      msg.str("");
    }
    if (differs(*in.quoted_t_min, r.t_opt)) {
      msg << "quoted shortest time " << *in.quoted_t_min
          << " differs from the variance minimum pi/(2 eta) = " << r.t_opt;
      r.discrepancies.push_back(msg.str());
      msg.str("");
    }
  }
  return r;
}

ExperimentReport experiment_report(const MicroscopicParams& mp, double omega,
                                   double gamma) {
  const StaticParams sp = from_microscopic(mp);
  ExperimentInputs in;
  in.delta_p = sp.delta_p;
  in.omega_0 = sp.omega_0;
  in.g_d = sp.g;
  in.omega = omega;
  in.n_atoms = mp.n_atoms;
  in.gamma = gamma;
  return experiment_report(in);
}

}  // namespace dicke
