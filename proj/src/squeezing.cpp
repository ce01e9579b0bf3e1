#include "dicke/squeezing.hpp"

#include "dicke/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>

namespace dicke {

double default_spin_epsilon(int n_atoms) { return 1e-6 * 0.5 * n_atoms; }

std::pair<Eigen::Vector3d, Eigen::Vector3d> perpendicular_basis(
    const Eigen::Vector3d& n0) {
  Eigen::Vector3d n1 = Eigen::Vector3d::UnitZ().cross(n0);
  if (n1.norm() < 1e-8) n1 = Eigen::Vector3d::UnitX().cross(n0);
  n1.normalize();
  return {n1, n0.cross(n1)};
}

SqueezeSample xi_squared(const SpinMoments& m, int n_atoms, double t,
                         double eps) {
  if (eps < 0.0) eps = default_spin_epsilon(n_atoms);
  const double len = m.mean.norm();
  if (!(len > eps))
    throw UndefinedDirection("mean spin length " + std::to_string(len) +
                             " too small to define a direction");
  const Eigen::Vector3d n0 = m.mean / len;
  const auto [n1, n2] = perpendicular_basis(n0);
  const double a = n1.dot(m.cov * n1);
  const double b = n2.dot(m.cov * n2);
  const double c = n1.dot(m.cov * n2);
  const double half_diff = 0.5 * (a - b);
  const double lam_min =
      std::max(0.0, 0.5 * (a + b) - std::hypot(half_diff, c));

  SqueezeSample s;
  s.t = t;
  s.mean_spin_len = len;
  s.xi_sq = n_atoms * lam_min / (len * len);
  s.db = s.xi_sq > 0.0 ? -10.0 * std::log10(s.xi_sq)
                       : std::numeric_limits<double>::infinity();
  return s;
}

namespace {

void collect(const std::vector<double>& times,
             const std::vector<SpinMoments>& ms, int n_atoms, double eps,
             MsfResult& out) {
  if (ms.size() != times.size())
    throw InvalidArgument("moment source returned the wrong sample count");
  for (std::size_t i = 0; i < times.size(); ++i) {
    try {
      out.samples.push_back(xi_squared(ms[i], n_atoms, times[i], eps));
    } catch (const UndefinedDirection&) {
      out.excluded_times.push_back(times[i]);
    }
  }
}

void take_minimum(MsfResult& r) {
  if (r.samples.empty())
    throw NoValidSample("no sample with a defined mean-spin direction");
  const auto best = std::min_element(
      r.samples.begin(), r.samples.end(),
      [](const SqueezeSample& a, const SqueezeSample& b) {
        return a.xi_sq < b.xi_sq;
      });
  r.xi_m_sq = best->xi_sq;
  r.t_star = best->t;
}

}  // namespace

TrajectorySource static_trajectory_source(Operator h, StateVector psi0,
                                          EvolveOptions opt) {
  struct Store {
    Operator h;
    EvolveOptions opt;
    std::map<double, StateVector> checkpoints;
  };
  auto store = std::make_shared<Store>(Store{std::move(h), opt, {}});
  store->checkpoints.emplace(0.0, std::move(psi0));
  return [store](std::span<const double> t) {
    if (t.empty()) return Trajectory{};
    auto it = store->checkpoints.upper_bound(t.front());
    --it;  // t >= 0 always finds the initial entry
    Trajectory tr = evolve_static(store->h, it->second, t, store->opt,
                                  it->first);
    for (std::size_t i = 0; i < tr.checkpoints.size(); ++i)
      store->checkpoints.emplace(tr.checkpoint_times[i],
                                 std::move(tr.checkpoints[i]));
    tr.checkpoint_times.clear();
    tr.checkpoints.clear();
    return tr;
  };
}

MomentSource moments_of(TrajectorySource source) {
  return [source = std::move(source)](std::span<const double> t) {
    return source(t).moments;
  };
}

MsfResult msf_scan(const MomentSource& source, int n_atoms,
                   const ScanSettings& s) {
  if (!(s.horizon > 0.0)) throw InvalidArgument("scan horizon must be > 0");
  if (!(s.coarse_dt > 0.0)) throw InvalidArgument("coarse_dt must be > 0");

  const auto count =
      static_cast<std::size_t>(std::floor(s.horizon / s.coarse_dt + 1e-9));
  std::vector<double> coarse(count + 1);
  for (std::size_t k = 0; k <= count; ++k)
    coarse[k] = static_cast<double>(k) * s.coarse_dt;

  MsfResult r;
  collect(coarse, source(coarse), n_atoms, s.eps, r);
  take_minimum(r);
  if (!s.refine) return r;

  const double fine_dt = s.coarse_dt / 10.0;
  const double lo = std::max(0.0, r.t_star - s.coarse_dt);
  const double hi = std::min(s.horizon, r.t_star + s.coarse_dt);
  std::vector<double> fine;
  for (int i = 0;; ++i) {
    const double t = lo + i * fine_dt;
    if (t > hi + 1e-9 * fine_dt) break;
    const double k = std::round(t / s.coarse_dt);
    if (std::abs(t - k * s.coarse_dt) <= 1e-9 * s.coarse_dt) continue;
    fine.push_back(t);
  }
  if (!fine.empty()) collect(fine, source(fine), n_atoms, s.eps, r);
  std::stable_sort(r.samples.begin(), r.samples.end(),
                   [](const SqueezeSample& a, const SqueezeSample& b) {
                     return a.t < b.t;
                   });
  std::sort(r.excluded_times.begin(), r.excluded_times.end());
  take_minimum(r);
  r.refined = true;
  return r;
}

double default_horizon(double omega_0, double q, double omega) {
  const double eta = std::sqrt(omega_0 * (omega_0 + q));
  double t = 4.0 * std::numbers::pi / eta;
  if (omega > 0.0) t = std::max(t, 20.0 * 2.0 * std::numbers::pi / omega);
  return t;
}

int static_cutoff_estimate(double g, const StaticParams& p, double horizon) {
  const double lam = std::abs(g) / std::sqrt(static_cast<double>(p.n_atoms));
  // forced-oscillator amplitude |alpha| <= lam |m| |1 - e^{-i delta_p t}| /
  // delta_p, bounded by lam |m| t when delta_p -> 0
  const double reach =
      p.delta_p > 0.0 ? std::min(2.0 / p.delta_p, horizon) : horizon;
  const double alpha = lam * 0.5 * p.n_atoms * reach;
  return static_cast<int>(std::ceil((alpha + 4.0) * (alpha + 4.0))) + 10;
}

std::vector<UndrivenPoint> undriven_msf_curve(std::span<const double> g_values,
                                              const StaticParams& p,
                                              const HilbertDims& dims,
                                              const ScanSettings& scan,
                                              const EvolveOptions& opt) {
  if (dims.n_atoms() != p.n_atoms)
    throw DimensionMismatch("undriven curve: dims do not match N");
  std::vector<UndrivenPoint> out;
  out.reserve(g_values.size());
  for (double g : g_values) {
    if (g < 0.0) throw InvalidArgument("coupling grid must be >= 0");
    StaticParams pg = p;
    pg.g = g;
    const int n_max = std::max(dims.fock_cutoff(),
                               static_cutoff_estimate(g, pg, scan.horizon));
    const DickeSpace space(HilbertDims(p.n_atoms, n_max));
    EvolveOptions o = opt;
    if (o.checkpoint_every <= 0.0) o.checkpoint_every = scan.horizon / 16.0;
    const MomentSource source = moments_of(static_trajectory_source(
        h_static(pg, space), initial_state(space.dims()), o));
    out.push_back({g, msf_scan(source, p.n_atoms, scan).xi_m_sq, n_max});
  }
  return out;
}

}  // namespace dicke
