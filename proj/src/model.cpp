#include "dicke/model.hpp"

#include "dicke/analytic.hpp"
#include "dicke/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace dicke {

namespace {

// Integer-order Bessel function of the first kind on the whole real line.
double bessel_j(int order, double x) {
  const double v = std::cyl_bessel_j(static_cast<double>(order), std::abs(x));
  return (x < 0.0 && (order % 2 != 0)) ? -v : v;
}

void require_dims(const StaticParams& p, const DickeSpace& space) {
  if (p.n_atoms != space.dims().n_atoms())
    throw DimensionMismatch("parameters N=" + std::to_string(p.n_atoms) +
                            " do not match space N=" +
                            std::to_string(space.dims().n_atoms()));
}

}  // namespace

void StaticParams::validate() const {
  if (n_atoms < 1) throw InvalidArgument("N must be >= 1");
  if (!(omega_0 > 0.0)) throw InvalidArgument("omega_0 must be > 0");
  if (delta_p < 0.0)
    throw Instability("delta_p < 0: the system becomes unstable");
  if (!std::isfinite(g) || !std::isfinite(delta_p))
    throw InvalidArgument("non-finite static parameter");
}

double DriveParams::chi(int n_atoms) const {
  return g_d / (omega * std::sqrt(static_cast<double>(n_atoms)));
}

void DriveParams::validate() const {
  if (!(omega > 0.0)) throw InvalidArgument("drive frequency must be > 0");
  if (!std::isfinite(g_d)) throw InvalidArgument("non-finite drive magnitude");
}

// ---------------------------------------------------------------------------

DickeSpace::DickeSpace(HilbertDims dims)
    : dims_(dims),
      spin_(build_spin_ops(dims.n_atoms())),
      boson_(build_boson_ops(dims.fock_cutoff())),
      sx_(embed_spin(spin_.sx)),
      sy_(embed_spin(spin_.sy)),
      sz_(embed_spin(spin_.sz)),
      sx2_(embed_spin((spin_.sx * spin_.sx).as_hermitian())),
      n_(embed_boson(boson_.n)),
      x_sx_(tensor(spin_.sx, boson_.x)),
      p_sx_(tensor(spin_.sx, boson_.a - boson_.adag)),
      id_(Operator::identity(Space::composite(dims))),
      x_sx_spectrum_(x_sx_) {}

Operator DickeSpace::embed_spin(const Operator& spin_op) const {
  return tensor(spin_op, Operator::identity(Space::boson(dims_.boson_dim())));
}

Operator DickeSpace::embed_boson(const Operator& boson_op) const {
  return tensor(Operator::identity(Space::spin(dims_.spin_dim())), boson_op);
}

Operator DickeSpace::parity() const {
  const Index db = dims_.boson_dim();
  SparseMatrix m(dims_.total_dim(), dims_.total_dim());
  m.reserve(Eigen::VectorXi::Constant(dims_.total_dim(), 1));
  for (Index i = 0; i < dims_.total_dim(); ++i) {
    // spin index s = m + N/2, so the phase is (-1)^(n + s)
    const Index s = i / db, n = i % db;
    m.insert(i, i) = ((s + n) % 2 == 0) ? 1.0 : -1.0;
  }
  return {space(), std::move(m), true};
}

const SpectralDecomposition& DickeSpace::x_sx_spectrum() const {
  return x_sx_spectrum_.get();
}

// ---------------------------------------------------------------------------

Operator h_static(const StaticParams& p, const DickeSpace& space) {
  p.validate();
  require_dims(p, space);
  const double lam = p.g / std::sqrt(static_cast<double>(p.n_atoms));
  return p.delta_p * space.number() + p.omega_0 * space.sz() +
         lam * space.x_sx();
}

double g_of_t(const DriveParams& d, double t) {
  return d.g_d * std::cos(d.omega * t);
}

Operator h_driven(const StaticParams& p, const DriveParams& d, double t,
                  const DickeSpace& space) {
  return DrivenDicke(p, d, space).at(t);
}

DrivenDicke::DrivenDicke(const StaticParams& p, const DriveParams& d,
                         const DickeSpace& space)
    : drive_(d), h0_(Operator::zero(space.space())), coupling_(space.x_sx()) {
  StaticParams undriven = p;
  undriven.g = 0.0;
  d.validate();
  h0_ = h_static(undriven, space);
  coupling_ = (1.0 / std::sqrt(static_cast<double>(p.n_atoms))) * coupling_;
}

Operator DrivenDicke::at(double t) const {
  return h0_ + g_of_t(drive_, t) * coupling_;
}

Operator rotating_unitary(const DriveParams& d, double t,
                          const DickeSpace& space) {
  d.validate();
  const double theta = d.chi(space.dims().n_atoms()) * std::sin(d.omega * t);
  return space.x_sx_spectrum().apply(
      [theta](double lam) { return std::exp(cplx(0.0, -theta * lam)); });
}

Operator h_transformed(const StaticParams& p, const DriveParams& d, double t,
                       const DickeSpace& space) {
  require_dims(p, space);
  d.validate();
  const double theta = d.chi(p.n_atoms) * std::sin(d.omega * t);
  const auto& xs = space.boson().x_spectrum.get();
  const Operator cos_x =
      xs.apply([theta](double x) { return std::cos(theta * x); });
  const Operator sin_x =
      xs.apply([theta](double x) { return std::sin(theta * x); });
  const Operator& spin_z = space.spin().sz;
  const Operator& spin_y = space.spin().sy;

  // i theta (a - a^dagger) S_x is hermitian
  const Operator cavity =
      space.number() + cplx(0.0, theta) * space.p_sx() +
      (theta * theta) * space.sx2();
  const Operator atoms = tensor(spin_z, cos_x) + tensor(spin_y, sin_x);
  return (p.delta_p * cavity + p.omega_0 * atoms).as_hermitian();
}

Operator fourier_component(int n, const StaticParams& p, const DriveParams& d,
                           const DickeSpace& space) {
  if (n < -1 || n > 1)
    throw UnsupportedOrder("Fourier component |n| >= 2 is not available in "
                           "closed form");
  require_dims(p, space);
  d.validate();
  // h_0 = delta_p n + omega_0 J0(chi x) S_z + (delta_p chi^2 / 2) S_x^2 = H_e
  if (n == 0) return h_effective(p, d, space);
  const double chi = d.chi(p.n_atoms);
  const auto& xs = space.boson().x_spectrum.get();
  // h_{+1} = (delta_p chi / 2)(a - a^dagger) S_x - i omega_0 J1(chi x) S_y
  // h_{-1} = h_{+1}^dagger
  const Operator j1 =
      xs.apply([chi](double x) { return cplx(bessel_j(1, chi * x)); });
  const Operator h_plus = (0.5 * p.delta_p * chi) * space.p_sx() +
                          cplx(0.0, -p.omega_0) * tensor(space.spin().sy, j1);
  return n == 1 ? h_plus : h_plus.adjoint();
}

Operator fourier_component_quadrature(int n, const StaticParams& p,
                                      const DriveParams& d,
                                      const DickeSpace& space, int nodes) {
  if (nodes < 1) throw InvalidArgument("quadrature needs at least one node");
  d.validate();
  const double period = 2.0 * std::numbers::pi / d.omega;
  DenseMatrix acc = DenseMatrix::Zero(space.dims().total_dim(),
                                      space.dims().total_dim());
  for (int k = 0; k < nodes; ++k) {
    const double t = period * static_cast<double>(k) / nodes;
    const cplx phase = std::exp(cplx(0.0, -n * d.omega * t));
    acc += phase * h_transformed(p, d, t, space).dense();
  }
  acc /= static_cast<double>(nodes);
  return Operator::from_dense(space.space(), acc, false);
}

Operator h_effective(const StaticParams& p, const DriveParams& d,
                     const DickeSpace& space) {
  require_dims(p, space);
  p.validate();
  d.validate();
  const double q = q_of(p.delta_p, d.g_d, d.omega);
  const double chi = d.chi(p.n_atoms);
  const Operator j0 = space.boson().x_spectrum.get().apply(
      [chi](double x) { return cplx(bessel_j(0, chi * x)); });
  return p.delta_p * space.number() +
         p.omega_0 * tensor(space.spin().sz, j0) +
         (q / p.n_atoms) * space.sx2();
}

Operator h_effective_large_n(double omega_0, double q, int n_atoms) {
  if (q < 0.0) throw InvalidArgument("q must be >= 0");
  const SpinOps s = build_spin_ops(n_atoms);
  return (q / n_atoms) * (s.sx * s.sx).as_hermitian() + omega_0 * s.sz;
}

StaticParams from_microscopic(const MicroscopicParams& mp, double rel_tol) {
  if (mp.Delta_1 == 0.0 || mp.Delta_2 == 0.0)
    throw InvalidConfiguration("detunings must be non-zero");
  if (mp.n_atoms < 1) throw InvalidArgument("N must be >= 1");
  const auto close = [rel_tol](double a, double b) {
    return std::abs(a - b) <=
           rel_tol * std::max({std::abs(a), std::abs(b), 1e-300});
  };
  const double stark1 = mp.g1 * mp.g1 / mp.Delta_1;
  const double stark2 = mp.g2 * mp.g2 / mp.Delta_2;
  const double raman1 = mp.g1 * mp.Omega_1 / mp.Delta_1;
  const double raman2 = mp.g2 * mp.Omega_2 / mp.Delta_2;
  if (!close(stark1, stark2))
    throw InvalidConfiguration("matching condition g1^2/Delta1 = g2^2/Delta2 "
                               "violated");
  if (!close(raman1, raman2))
    throw InvalidConfiguration("matching condition g1 Omega1/Delta1 = "
                               "g2 Omega2/Delta2 violated");

  const double n = static_cast<double>(mp.n_atoms);
  StaticParams p;
  p.n_atoms = mp.n_atoms;
  p.delta_p = mp.delta_c + n * stark1;
  // Delta_p = 0 at exact cancellation is an accepted boundary case.
  if (std::abs(p.delta_p) <= 1e-12 * std::max(std::abs(mp.delta_c), 1.0))
    p.delta_p = 0.0;
  p.omega_0 = mp.omega_b - mp.omega_b_prime;
  p.g = std::sqrt(n) * raman1;
  if (p.delta_p < 0.0)
    throw Instability("delta_p < 0: the system becomes unstable");
  return p;
}

}  // namespace dicke
