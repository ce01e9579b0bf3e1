#include "dicke/propagator.hpp"

#include "dicke/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace dicke {

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidArgument("integrator dt must be > 0");
  if (steps_per_drive_period < 16)
    throw InvalidArgument("steps_per_drive_period must be >= 16");
  if (!(norm_tol > 0.0)) throw InvalidArgument("norm_tol must be > 0");
  if (krylov_max_dim < 2) throw InvalidArgument("krylov_max_dim must be >= 2");
}

// ---------------------------------------------------------------------------
// Krylov exponential action

namespace {

// exp(-i h T) e_1 for the symmetric tridiagonal T = tridiag(beta, alpha, beta).
Vector small_exp_first_column(const Eigen::VectorXd& alpha,
                              const Eigen::VectorXd& beta, Index m,
                              double h) {
  if (m == 1) {
    Vector y(1);
    y(0) = std::exp(cplx(0.0, -h * alpha(0)));
    return y;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  Eigen::VectorXd d = alpha.head(m);
  Eigen::VectorXd e = beta.head(m - 1);
  es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
  const Eigen::MatrixXd& q = es.eigenvectors();
  Vector phase(m);
  for (Index i = 0; i < m; ++i)
    phase(i) = std::exp(cplx(0.0, -h * es.eigenvalues()(i))) * q(0, i);
  return q.cast<cplx>() * phase;
}

}  // namespace

std::size_t expmv_lanczos(const SparseMatrix& h, Vector& psi, double tau,
                          double tol, int max_dim) {
  // Beyond this size the plain three-term recurrence is used; reorthogonal-
  // ization would cost far more than the sparse products.
  constexpr Index kFullReorthMaxDim = 4096;
  const Index n = psi.size();
  if (h.rows() != n || h.cols() != n)
    throw DimensionMismatch("expmv: operator/vector dimension mismatch");
  if (tau == 0.0) return 0;
  const Index mmax = std::min<Index>(max_dim, n);
  const bool full_reorth = n <= kFullReorthMaxDim;

  DenseMatrix v(n, mmax + 1);
  Eigen::VectorXd alpha(mmax), beta(mmax);
  std::size_t matvecs = 0;
  double remaining = tau;

  while (remaining != 0.0) {
    const double beta0 = psi.norm();
    if (beta0 == 0.0) return matvecs;
    v.col(0) = psi / beta0;
    Index m = 0;
    bool exact = false;
    for (Index j = 0; j < mmax; ++j) {
      Vector w = h * v.col(j);
      ++matvecs;
      alpha(j) = v.col(j).dot(w).real();
      if (full_reorth) {
        // two passes of classical Gram-Schmidt against the whole basis
        for (int pass = 0; pass < 2; ++pass) {
          const Vector c = v.leftCols(j + 1).adjoint() * w;
          w.noalias() -= v.leftCols(j + 1) * c;
        }
      } else {
        w -= alpha(j) * v.col(j);
        if (j > 0) w -= beta(j - 1) * v.col(j - 1);
      }
      beta(j) = w.norm();
      m = j + 1;
      const double scale = std::abs(alpha(j)) + (j > 0 ? beta(j - 1) : 0.0);
      if (beta(j) <= 1e-13 * std::max(scale, 1e-300)) {
        exact = true;  // invariant subspace
        break;
      }
      v.col(j + 1) = w / beta(j);
      if (j >= 2) {
        const Vector y = small_exp_first_column(alpha, beta, m, remaining);
        if (beta0 * beta(j) * std::abs(y(m - 1)) < tol) break;
      }
    }

    double step = remaining;
    Vector y = small_exp_first_column(alpha, beta, m, step);
    if (!exact) {
      while (beta0 * beta(m - 1) * std::abs(y(m - 1)) >= tol) {
        step *= 0.5;
        if (std::abs(step) < 1e-300)
          throw NumericalFailure("expmv: step size underflow");
        y = small_exp_first_column(alpha, beta, m, step);
      }
    }
    psi = beta0 * (v.leftCols(m) * y);
    remaining = (step == remaining) ? 0.0 : remaining - step;
  }
  return matvecs;
}

// ---------------------------------------------------------------------------
// Chebyshev exponential action

namespace {

template <class Mat>
SpectralBounds gershgorin_impl(const Mat& h) {
  SpectralBounds b{std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
  for (Index i = 0; i < h.outerSize(); ++i) {
    double centre = 0.0, radius = 0.0;
    for (typename Mat::InnerIterator it(h, i); it; ++it) {
      if (it.index() == i)
        centre = std::real(it.value());
      else
        radius += std::abs(it.value());
    }
    b.lo = std::min(b.lo, centre - radius);
    b.hi = std::max(b.hi, centre + radius);
  }
  if (h.outerSize() == 0) b = {0.0, 0.0};
  return b;
}

// J_0(z) ... J_kmax(z) for z >= 0 by Miller's backward recurrence, normalized
// with J_0 + 2 sum J_2k = 1.
std::vector<double> bessel_sequence(double z, int kmax) {
  std::vector<double> j(static_cast<std::size_t>(kmax) + 1, 0.0);
  if (z == 0.0) {
    j[0] = 1.0;
    return j;
  }
  int start = kmax + 20 + static_cast<int>(std::sqrt(40.0 * (kmax + 1)));
  if (start % 2 != 0) ++start;
  double next = 0.0, cur = 1e-300, norm = 0.0;
  for (int k = start; k > 0; --k) {
    if (k <= kmax) j[static_cast<std::size_t>(k)] = cur;
    if (k % 2 == 0) norm += 2.0 * cur;
    const double prev = (2.0 * k / z) * cur - next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > 1e250) {
      const double s = 1e-250;
      cur *= s;
      next *= s;
      norm *= s;
      for (int i = k; i <= kmax; ++i) j[static_cast<std::size_t>(i)] *= s;
    }
  }
  j[0] = cur;
  norm += cur;
  for (double& v : j) v /= norm;
  return j;
}

// Plain products; std::complex multiplication otherwise goes through the
// slow inf/nan-recovering library routine.
inline cplx mul(double a, cplx b) { return {a * b.real(), a * b.imag()}; }
inline cplx mul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

template <class Mat>
std::size_t chebyshev_impl(const Mat& h, SpectralBounds b, Vector& psi,
                           double tau, double tol) {
  const Index n = psi.size();
  if (h.rows() != n || h.cols() != n)
    throw DimensionMismatch("expmv: operator/vector dimension mismatch");
  if (!(b.hi >= b.lo)) throw InvalidArgument("expmv: empty spectral interval");
  if (tau == 0.0) return 0;
  const double centre = 0.5 * (b.hi + b.lo);
  // a slightly widened interval keeps the scaled spectrum inside [-1, 1]
  const double radius = 0.5 * (b.hi - b.lo) * (1.0 + 1e-10) + 1e-300;
  const cplx global = std::exp(cplx(0.0, -centre * tau));
  const double z = radius * std::abs(tau);
  const double sgn = tau > 0.0 ? 1.0 : -1.0;

  const int kmax = static_cast<int>(std::ceil(z + 12.0 * std::cbrt(z) + 40.0));
  const std::vector<double> jk = bessel_sequence(z, kmax);
  int kcut = kmax;
  for (int k = static_cast<int>(z) + 1; k <= kmax; ++k) {
    if (2.0 * std::abs(jk[static_cast<std::size_t>(k)]) < tol) {
      kcut = k;
      break;
    }
  }

  const double inv_r = 1.0 / radius;
  using Scalar = typename Mat::Scalar;
  const auto* outer = h.outerIndexPtr();
  const auto* inner = h.innerIndexPtr();
  const Scalar* val = h.valuePtr();
  // out = f (H - centre) v / r - g w ; acc += a out, in one sweep
  const auto sweep = [&](const Vector& v, const Vector* w, double f,
                         Vector& out, cplx a, Vector& acc_v) {
    const cplx* vp = v.data();
    const cplx* wp = w ? w->data() : nullptr;
    cplx* op = out.data();
    cplx* ap = acc_v.data();
    const double fr = f * inv_r;
    for (Index i = 0; i < n; ++i) {
      cplx s = -centre * vp[i];
      for (auto p = outer[i]; p < outer[i + 1]; ++p)
        s += mul(val[p], vp[inner[p]]);
      cplx r = fr * s;
      if (wp) r -= wp[i];
      op[i] = r;
      ap[i] += mul(a, r);
    }
  };
  // exp(-i sgn z x) = J_0(z) + 2 sum_k (-i sgn)^k J_k(z) T_k(x)
  const cplx unit(0.0, -sgn);
  Vector prev = psi, cur(n), next(n);
  Vector acc = jk[0] * psi;
  std::size_t matvecs = 0;
  cplx phase = unit;
  if (kcut >= 2) {
    sweep(prev, nullptr, 1.0, cur, 2.0 * jk[1] * phase, acc);
    ++matvecs;
  }
  for (int k = 2; k < kcut; ++k) {
    phase *= unit;
    sweep(cur, &prev, 2.0, next,
          2.0 * jk[static_cast<std::size_t>(k)] * phase, acc);
    ++matvecs;
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  psi = global * acc;
  return matvecs;
}

}  // namespace

SpectralBounds gershgorin_bounds(const SparseMatrix& h) {
  return gershgorin_impl(h);
}

SpectralBounds gershgorin_bounds(const RealSparseMatrix& h) {
  return gershgorin_impl(h);
}

std::size_t expmv_chebyshev(const SparseMatrix& h, SpectralBounds b,
                            Vector& psi, double tau, double tol) {
  return chebyshev_impl(h, b, psi, tau, tol);
}

std::size_t expmv_chebyshev(const RealSparseMatrix& h, SpectralBounds b,
                            Vector& psi, double tau, double tol) {
  return chebyshev_impl(h, b, psi, tau, tol);
}

// ---------------------------------------------------------------------------

namespace {

void require_samples(std::span<const double> t, double t0 = 0.0) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || t[i] < t0)
      throw InvalidArgument("sample times must be finite and >= the start");
    if (i > 0 && !(t[i] > t[i - 1]))
      throw InvalidArgument("sample times must be strictly increasing");
  }
}

class Recorder {
 public:
  Recorder(const HilbertDims& dims, double norm_tol, bool store)
      : dims_(dims), ops_(build_spin_ops(dims.n_atoms())),
        norm_tol_(norm_tol), store_(store) {}

  void record(double t, const Vector& amps, std::size_t step) {
    check_norm(t, amps, step);
    StateVector s(dims_, amps, norm_tol_);
    traj_.times.push_back(t);
    traj_.moments.push_back(moments(s, ops_));
    traj_.photon_number.push_back(s.photon_number());
    if (store_) traj_.states.push_back(std::move(s));
  }

  void check_norm(double t, const Vector& amps, std::size_t step) const {
    const double nrm = amps.norm();
    if (!(std::abs(nrm - 1.0) < norm_tol_))
      throw NormDrift({t, step, nrm, norm_tol_});
  }

  void checkpoint(double t, const Vector& amps) {
    traj_.checkpoint_times.push_back(t);
    traj_.checkpoints.emplace_back(dims_, amps, norm_tol_);
  }

  Trajectory take() { return std::move(traj_); }

 private:
  HilbertDims dims_;
  SpinOps ops_;
  double norm_tol_;
  bool store_;
  Trajectory traj_;
};

void apply_dense_exp(const Operator& h, Vector& psi, double tau) {
  if (h.is_real()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense().real());
    const Eigen::MatrixXd& v = es.eigenvectors();
    Vector c = v.transpose().cast<cplx>() * psi;
    for (Index i = 0; i < c.size(); ++i)
      c(i) *= std::exp(cplx(0.0, -tau * es.eigenvalues()(i)));
    psi = v.cast<cplx>() * c;
  } else {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h.dense());
    const DenseMatrix& v = es.eigenvectors();
    Vector c = v.adjoint() * psi;
    for (Index i = 0; i < c.size(); ++i)
      c(i) *= std::exp(cplx(0.0, -tau * es.eigenvalues()(i)));
    psi = v * c;
  }
}

}  // namespace

namespace {

// Indices of the parity sector that contains psi0, or empty when psi0 mixes
// sectors or H couples them.
std::vector<Index> parity_sector(const SparseMatrix& h, const Vector& psi0,
                                 Index boson_dim) {
  const auto parity = [boson_dim](Index i) {
    return ((i / boson_dim) + (i % boson_dim)) % 2;
  };
  Index sector = -1;
  for (Index i = 0; i < psi0.size(); ++i) {
    if (psi0(i) == cplx(0.0)) continue;
    if (sector == -1)
      sector = parity(i);
    else if (parity(i) != sector)
      return {};
  }
  if (sector == -1) return {};
  for (Index i = 0; i < h.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(h, i); it; ++it)
      if (it.value() != cplx(0.0) && parity(i) != parity(it.index()))
        return {};
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(psi0.size() / 2 + 1));
  for (Index i = 0; i < psi0.size(); ++i)
    if (parity(i) == sector) idx.push_back(i);
  return idx;
}

SparseMatrix restrict_matrix(const SparseMatrix& h,
                             const std::vector<Index>& idx) {
  std::vector<Index> pos(static_cast<std::size_t>(h.rows()), -1);
  for (std::size_t k = 0; k < idx.size(); ++k)
    pos[static_cast<std::size_t>(idx[k])] = static_cast<Index>(k);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(h.nonZeros()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (SparseMatrix::InnerIterator it(h, idx[k]); it; ++it) {
      const Index c = pos[static_cast<std::size_t>(it.index())];
      if (c >= 0) trip.emplace_back(static_cast<Index>(k), c, it.value());
    }
  const auto n = static_cast<Index>(idx.size());
  SparseMatrix r(n, n);
  r.setFromTriplets(trip.begin(), trip.end());
  return r;
}

}  // namespace

Trajectory evolve_static(const Operator& h, const StateVector& psi0,
                         std::span<const double> t_samples,
                         const EvolveOptions& opt, double t0) {
  if (!h.hermitian())
    throw InvalidArgument("evolve_static needs a hermitian Hamiltonian");
  if (h.dim() != psi0.dims().total_dim())
    throw DimensionMismatch("evolve_static: Hamiltonian/state mismatch");
  if (!std::isfinite(t0)) throw InvalidArgument("start time must be finite");
  require_samples(t_samples, t0);

  Recorder rec(psi0.dims(), opt.norm_tol, opt.store_states);
  double next_checkpoint =
      opt.checkpoint_every > 0.0 ? t0 : std::numeric_limits<double>::infinity();
  const auto record = [&](double t, const Vector& amps, std::size_t k) {
    rec.record(t, amps, k);
    if (t >= next_checkpoint) {
      rec.checkpoint(t, amps);
      next_checkpoint =
          (std::floor(t / opt.checkpoint_every) + 1.0) * opt.checkpoint_every;
    }
  };
  const Index dim = h.dim();
  StaticMethod method = opt.method;
  if (method == StaticMethod::automatic)
    method = dim <= opt.dense_eig_max_dim ? StaticMethod::dense
                                          : StaticMethod::chebyshev;

  if (method == StaticMethod::dense) {
    const bool real = h.is_real();
    Eigen::VectorXd lam;
    DenseMatrix vec;
    if (real) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense().real());
      lam = es.eigenvalues();
      vec = es.eigenvectors().cast<cplx>();
    } else {
      Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h.dense());
      lam = es.eigenvalues();
      vec = es.eigenvectors();
    }
    const Vector c = vec.adjoint() * psi0.amplitudes();
    std::size_t k = 0;
    for (double t : t_samples) {
      Vector ct(c.size());
      for (Index i = 0; i < c.size(); ++i)
        ct(i) = std::exp(cplx(0.0, -lam(i) * (t - t0))) * c(i);
      record(t, vec * ct, k++);
    }
    return rec.take();
  }

  std::vector<Index> idx;
  if (opt.use_parity_sector)
    idx = parity_sector(h.matrix(), psi0.amplitudes(),
                        psi0.dims().boson_dim());
  const bool reduced = !idx.empty();
  const SparseMatrix hm = reduced ? restrict_matrix(h.matrix(), idx)
                                  : h.matrix();
  Vector psi(hm.rows());
  if (reduced) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      psi(static_cast<Index>(k)) = psi0.amplitudes()(idx[k]);
  } else {
    psi = psi0.amplitudes();
  }
  const auto full = [&](const Vector& v) {
    if (!reduced) return v;
    Vector out = Vector::Zero(dim);
    for (std::size_t k = 0; k < idx.size(); ++k)
      out(idx[k]) = v(static_cast<Index>(k));
    return out;
  };

  const bool real = h.is_real();
  RealSparseMatrix hr;
  SpectralBounds bounds;
  if (real) {
    hr = hm.real();
    bounds = gershgorin_bounds(hr);
  } else {
    bounds = gershgorin_bounds(hm);
  }
  double now = t0;
  std::size_t k = 0;
  for (double t : t_samples) {
    const double tau = t - now;
    if (method == StaticMethod::krylov)
      expmv_lanczos(hm, psi, tau, opt.krylov_tol, opt.krylov_max_dim);
    else if (real)
      expmv_chebyshev(hr, bounds, psi, tau, opt.chebyshev_tol);
    else
      expmv_chebyshev(hm, bounds, psi, tau, opt.chebyshev_tol);
    now = t;
    record(t, full(psi), k++);
  }
  return rec.take();
}

Trajectory evolve_driven(const DrivenHamiltonian& h, const StateVector& psi0,
                         std::span<const double> t_samples,
                         const IntegratorConfig& cfg, bool store_states) {
  cfg.validate();
  require_samples(t_samples);
  if (!h.at) throw InvalidArgument("evolve_driven: empty Hamiltonian provider");

  double step = cfg.dt;
  if (h.drive_omega > 0.0)
    step = std::min(step, 2.0 * std::numbers::pi / h.drive_omega /
                              cfg.steps_per_drive_period);
  if (!t_samples.empty()) {
    const double n_steps = std::ceil(t_samples.back() / step);
    if (n_steps > static_cast<double>(cfg.max_steps))
      throw StepOverflow("evolve_driven: " + std::to_string(n_steps) +
                         " steps exceed the limit of " +
                         std::to_string(cfg.max_steps));
  }

  const Index dim = psi0.dims().total_dim();
  const auto hamiltonian = [&](double t) {
    Operator op = h.at(t);
    if (op.dim() != dim)
      throw DimensionMismatch("evolve_driven: Hamiltonian/state mismatch");
    if (!op.hermitian())
      throw InvalidArgument("evolve_driven: provider returned a non-hermitian "
                            "operator");
    return op;
  };

  const auto advance = [&](Vector& psi, double t, double dt) {
    if (cfg.method == Method::midpoint_exponential) {
      const Operator mid = hamiltonian(t + 0.5 * dt);
      if (dim <= cfg.dense_exp_max_dim)
        apply_dense_exp(mid, psi, dt);
      else
        expmv_lanczos(mid.matrix(), psi, dt, cfg.krylov_tol,
                      cfg.krylov_max_dim);
    } else {
      const cplx mi(0.0, -1.0);
      const SparseMatrix h0 = hamiltonian(t).matrix();
      const SparseMatrix hm = hamiltonian(t + 0.5 * dt).matrix();
      const SparseMatrix h1 = hamiltonian(t + dt).matrix();
      const Vector k1 = mi * (h0 * psi);
      const Vector k2 = mi * (hm * (psi + 0.5 * dt * k1));
      const Vector k3 = mi * (hm * (psi + 0.5 * dt * k2));
      const Vector k4 = mi * (h1 * (psi + dt * k3));
      psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  };

  Recorder rec(psi0.dims(), cfg.norm_tol, store_states);
  Vector psi = psi0.amplitudes();
  std::size_t k = 0;
  const double snap = 1e-9 * step;
  for (double ts : t_samples) {
    while (static_cast<double>(k + 1) * step <= ts + snap) {
      const double t = static_cast<double>(k) * step;
      advance(psi, t, step);
      ++k;
      rec.check_norm(static_cast<double>(k) * step, psi, k);
    }
    const double grid_t = static_cast<double>(k) * step;
    const double rem = ts - grid_t;
    if (rem > snap) {
      Vector branch = psi;
      advance(branch, grid_t, rem);
      rec.record(ts, branch, k);
    } else {
      rec.record(ts, psi, k);
    }
  }
  return rec.take();
}

// ---------------------------------------------------------------------------

namespace {

double trace_change(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool na = std::isnan(a[i]), nb = std::isnan(b[i]);
    if (na && nb) continue;
    if (na != nb) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace

ConvergenceReport check_fock_convergence(const ConvergenceScenario& scenario,
                                         int n_max,
                                         const ConvergenceConfig& cfg) {
  if (n_max < 4) throw InvalidArgument("convergence check needs n_max >= 4");
  if (cfg.increment < 1) throw InvalidArgument("increment must be >= 1");
  const auto base = scenario.xi_trace(n_max);
  const auto check = scenario.xi_trace(n_max + cfg.increment);
  ConvergenceReport r;
  r.n_max = n_max;
  r.n_max_check = n_max + cfg.increment;
  r.max_change = trace_change(base, check);
  r.converged = r.max_change < cfg.threshold;
  return r;
}

ConvergenceReport find_converged_cutoff(const ConvergenceScenario& scenario,
                                        int start, int step, int limit,
                                        const ConvergenceConfig& cfg) {
  if (start < 4) throw InvalidArgument("convergence check needs n_max >= 4");
  if (step < 1) throw InvalidArgument("cutoff step must be >= 1");
  std::map<int, std::vector<double>> cache;
  const auto trace = [&](int n) -> const std::vector<double>& {
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, scenario.xi_trace(n)).first;
    return it->second;
  };
  ConvergenceReport r;
  for (int n = start; n <= limit; n += step) {
    r.n_max = n;
    r.n_max_check = n + cfg.increment;
    r.max_change = trace_change(trace(n), trace(n + cfg.increment));
    r.converged = r.max_change < cfg.threshold;
    if (r.converged) return r;
  }
  return r;
}

}  // namespace dicke
