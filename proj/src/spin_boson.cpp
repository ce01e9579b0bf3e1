#include "dicke/spin_boson.hpp"

#include "dicke/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dicke {

namespace {

using Triplet = Eigen::Triplet<cplx>;

SparseMatrix from_triplets(Index dim, const std::vector<Triplet>& t) {
  SparseMatrix m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

double max_abs(const SparseMatrix& m) {
  double best = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      best = std::max(best, std::abs(it.value()));
  return best;
}

}  // namespace

NormDrift::NormDrift(const NormDriftDiagnostics& d)
    : NumericalFailure("norm drift " + std::to_string(std::abs(d.norm - 1.0)) +
                       " exceeds tolerance " + std::to_string(d.tolerance) +
                       " at t=" + std::to_string(d.time) + " (step " +
                       std::to_string(d.step) + ")"),
      diag_(d) {}

HilbertDims::HilbertDims(int n_atoms, int fock_cutoff)
    : n_atoms_(n_atoms), fock_cutoff_(fock_cutoff) {
  if (n_atoms < 1) throw InvalidArgument("atom count must be >= 1");
  if (fock_cutoff < 0) throw InvalidArgument("Fock cutoff must be >= 0");
}

// ---------------------------------------------------------------------------
// Operator

Operator::Operator(Space space, SparseMatrix matrix, bool hermitian)
    : space_(space), matrix_(std::move(matrix)), hermitian_(hermitian) {
  if (matrix_.rows() != space_.dim() || matrix_.cols() != space_.dim())
    throw DimensionMismatch("operator matrix does not match its space");
  matrix_.makeCompressed();
  if (hermitian_) {
    const double scale = max_norm();
    if (hermiticity_deviation() > 1e-12 * std::max(scale, 1e-300) &&
        scale > 0.0)
      throw InvalidArgument("operator flagged hermitian is not hermitian");
  }
}

Operator Operator::identity(Space space) {
  SparseMatrix m(space.dim(), space.dim());
  m.setIdentity();
  return {space, std::move(m), true};
}

Operator Operator::zero(Space space) {
  return {space, SparseMatrix(space.dim(), space.dim()), true};
}

Operator Operator::from_dense(Space space, const DenseMatrix& m,
                              bool hermitian) {
  return {space, m.sparseView(0.0, 0.0), hermitian};
}

double Operator::max_norm() const { return max_abs(matrix_); }

double Operator::hermiticity_deviation() const {
  SparseMatrix diff = matrix_ - SparseMatrix(matrix_.adjoint());
  return max_abs(diff);
}

bool Operator::is_real() const {
  for (Index k = 0; k < matrix_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix_, k); it; ++it)
      if (it.value().imag() != 0.0) return false;
  return true;
}

Operator Operator::adjoint() const {
  return {space_, SparseMatrix(matrix_.adjoint()), hermitian_};
}

Operator Operator::as_hermitian(double rel_tol) const {
  const double dev = hermiticity_deviation();
  const double scale = max_norm();
  if (dev > rel_tol * scale)
    throw InvalidArgument("operator is not hermitian: deviation " +
                          std::to_string(dev));
  SparseMatrix sym = 0.5 * (matrix_ + SparseMatrix(matrix_.adjoint()));
  return {space_, std::move(sym), true};
}

void Operator::require_same_space(const Operator& rhs, const char* what) const {
  if (!(space_ == rhs.space_))
    throw DimensionMismatch(std::string("operator ") + what +
                            ": space mismatch");
}

Operator Operator::operator+(const Operator& rhs) const {
  require_same_space(rhs, "sum");
  return {space_, matrix_ + rhs.matrix_, hermitian_ && rhs.hermitian_};
}

Operator Operator::operator-(const Operator& rhs) const {
  require_same_space(rhs, "difference");
  return {space_, matrix_ - rhs.matrix_, hermitian_ && rhs.hermitian_};
}

Operator Operator::operator-() const { return {space_, -matrix_, hermitian_}; }

Operator Operator::operator*(const Operator& rhs) const {
  require_same_space(rhs, "product");
  SparseMatrix prod = (matrix_ * rhs.matrix_).pruned(0.0, 0.0);
  return {space_, std::move(prod), false};
}

Operator Operator::operator*(double s) const {
  return {space_, matrix_ * cplx(s, 0.0), hermitian_};
}

Operator Operator::operator*(cplx s) const {
  return {space_, matrix_ * s, hermitian_ && s.imag() == 0.0};
}

Operator commutator(const Operator& a, const Operator& b) {
  return a * b - b * a;
}

Operator anticommutator(const Operator& a, const Operator& b) {
  return a * b + b * a;
}

double max_abs_diff(const Operator& a, const Operator& b) {
  return (a - b).max_norm();
}

Operator tensor(const Operator& spin_op, const Operator& boson_op) {
  if (spin_op.space().kind != SpaceKind::spin ||
      boson_op.space().kind != SpaceKind::boson)
    throw DimensionMismatch("tensor expects (spin, boson) factors");
  const Index ds = spin_op.dim();
  const Index db = boson_op.dim();
  const SparseMatrix& A = spin_op.matrix();
  const SparseMatrix& B = boson_op.matrix();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(A.nonZeros() * B.nonZeros()));
  for (Index i = 0; i < A.outerSize(); ++i)
    for (SparseMatrix::InnerIterator ia(A, i); ia; ++ia)
      for (Index k = 0; k < B.outerSize(); ++k)
        for (SparseMatrix::InnerIterator ib(B, k); ib; ++ib)
          t.emplace_back(ia.row() * db + ib.row(), ia.col() * db + ib.col(),
                         ia.value() * ib.value());
  Space s{SpaceKind::composite, ds, db};
  return {s, from_triplets(ds * db, t),
          spin_op.hermitian() && boson_op.hermitian()};
}

// ---------------------------------------------------------------------------
// Spin and boson ladders

SpinOps build_spin_ops(int n_atoms) {
  if (n_atoms < 1) throw InvalidArgument("atom count must be >= 1");
  const Index dim = n_atoms + 1;
  const double j = 0.5 * n_atoms;
  const Space space = Space::spin(dim);

  std::vector<Triplet> up, down, z, x, y, cas;
  for (Index i = 0; i < dim; ++i) {
    const double m = -j + static_cast<double>(i);
    z.emplace_back(i, i, m);
    cas.emplace_back(i, i, j * (j + 1.0));
    if (i + 1 < dim) {
      const double el = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
      up.emplace_back(i + 1, i, el);
      down.emplace_back(i, i + 1, el);
      x.emplace_back(i + 1, i, 0.5 * el);
      x.emplace_back(i, i + 1, 0.5 * el);
      // S_y = (S+ - S-) / 2i
      y.emplace_back(i + 1, i, cplx(0.0, -0.5 * el));
      y.emplace_back(i, i + 1, cplx(0.0, 0.5 * el));
    }
  }
  return SpinOps{n_atoms,
                 Operator(space, from_triplets(dim, x), true),
                 Operator(space, from_triplets(dim, y), true),
                 Operator(space, from_triplets(dim, z), true),
                 Operator(space, from_triplets(dim, cas), true),
                 Operator(space, from_triplets(dim, up), false),
                 Operator(space, from_triplets(dim, down), false)};
}

BosonOps build_boson_ops(int n_max) {
  if (n_max < 0) throw InvalidArgument("Fock cutoff must be >= 0");
  const Index dim = n_max + 1;
  const Space space = Space::boson(dim);
  std::vector<Triplet> a, ad, n, x;
  for (Index k = 0; k < dim; ++k) {
    n.emplace_back(k, k, static_cast<double>(k));
    if (k > 0) {
      const double el = std::sqrt(static_cast<double>(k));
      a.emplace_back(k - 1, k, el);
      ad.emplace_back(k, k - 1, el);
      x.emplace_back(k - 1, k, el);
      x.emplace_back(k, k - 1, el);
    }
  }
  Operator xop(space, from_triplets(dim, x), true);
  CachedSpectrum spectrum(xop);
  return BosonOps{n_max,
                  Operator(space, from_triplets(dim, a), false),
                  Operator(space, from_triplets(dim, ad), false),
                  Operator(space, from_triplets(dim, n), true),
                  std::move(xop),
                  std::move(spectrum)};
}

// ---------------------------------------------------------------------------
// Spectral calculus

SpectralDecomposition::SpectralDecomposition(const Operator& hermitian_op)
    : space_(hermitian_op.space()) {
  if (!hermitian_op.hermitian())
    throw InvalidArgument("spectral decomposition needs a hermitian operator");
  if (hermitian_op.is_real()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        hermitian_op.dense().real());
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(hermitian_op.dense());
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }
}

Operator SpectralDecomposition::apply(
    const std::function<cplx(double)>& f) const {
  Vector fv(values_.size());
  bool real = true;
  for (Index i = 0; i < values_.size(); ++i) {
    fv(i) = f(values_(i));
    real = real && fv(i).imag() == 0.0;
  }
  DenseMatrix m = vectors_ * fv.asDiagonal() * vectors_.adjoint();
  if (real) m = 0.5 * (m + m.adjoint()).eval();
  return Operator::from_dense(space_, m, real);
}

CachedSpectrum::CachedSpectrum(Operator hermitian_op)
    : state_(std::make_shared<State>(std::move(hermitian_op))) {
  if (!state_->op.hermitian())
    throw InvalidArgument("cached spectrum needs a hermitian operator");
}

const SpectralDecomposition& CachedSpectrum::get() const {
  std::call_once(state_->once, [this] {
    state_->value = std::make_unique<SpectralDecomposition>(state_->op);
  });
  return *state_->value;
}

Operator operator_function(const std::function<cplx(double)>& f,
                           const Operator& hermitian_op) {
  if (!hermitian_op.hermitian())
    throw InvalidArgument("operator_function needs a hermitian operator");
  return SpectralDecomposition(hermitian_op).apply(f);
}

// ---------------------------------------------------------------------------
// States

StateVector::StateVector(HilbertDims dims, Vector amplitudes, double norm_tol)
    : dims_(dims), amps_(std::move(amplitudes)), norm_tol_(norm_tol) {
  if (amps_.size() != dims_.total_dim())
    throw DimensionMismatch("state length does not match dimensions");
  if (!within_tolerance())
    throw StaleState("state norm " + std::to_string(norm()) +
                     " outside tolerance");
}

StateVector StateVector::normalized(HilbertDims dims, Vector amplitudes) {
  const double nrm = amplitudes.norm();
  if (!(nrm > 0.0)) throw InvalidArgument("cannot normalize a zero vector");
  amplitudes /= nrm;
  return {dims, std::move(amplitudes)};
}

bool StateVector::within_tolerance() const {
  return std::abs(norm() - 1.0) < norm_tol_;
}

DenseMatrix StateVector::reduced_spin_density() const {
  using RowMajor =
      Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> psi(amps_.data(), dims_.spin_dim(),
                                 dims_.boson_dim());
  return psi * psi.adjoint();
}

double StateVector::photon_number() const {
  double acc = 0.0;
  const Index db = dims_.boson_dim();
  for (Index i = 0; i < amps_.size(); ++i)
    acc += std::norm(amps_(i)) * static_cast<double>(i % db);
  return acc;
}

cplx StateVector::expectation(const Operator& op) const {
  if (op.dim() != amps_.size())
    throw DimensionMismatch("expectation: operator/state dimension mismatch");
  return amps_.dot(op.apply(amps_));
}

StateVector initial_state(const HilbertDims& dims) {
  Vector v = Vector::Zero(dims.total_dim());
  v(dims.index(0, 0)) = 1.0;
  return {dims, std::move(v)};
}

namespace {

// Tr(A M) for sparse A and dense M.
cplx trace_product(const SparseMatrix& a, const DenseMatrix& m) {
  cplx acc = 0.0;
  for (Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      acc += it.value() * m(it.col(), it.row());
  return acc;
}

}  // namespace

SpinMoments moments(const StateVector& psi, const SpinOps& ops) {
  if (!psi.within_tolerance())
    throw StaleState("moments: state norm " + std::to_string(psi.norm()) +
                     " outside tolerance");
  if (psi.dims().spin_dim() != ops.sx.dim())
    throw DimensionMismatch("moments: spin operators do not match state");

  const DenseMatrix rho = psi.reduced_spin_density();
  const SparseMatrix* s[3] = {&ops.sx.matrix(), &ops.sy.matrix(),
                              &ops.sz.matrix()};
  SpinMoments out;
  DenseMatrix srho[3];
  for (int a = 0; a < 3; ++a) {
    srho[a] = (*s[a]) * rho;  // S_a rho
    out.mean(a) = trace_product(*s[a], rho).real();
  }
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      // <S_a S_b> = Tr(rho S_a S_b) = Tr(S_a (S_b rho))
      const cplx ab = trace_product(*s[a], srho[b]);
      // symmetrized second moment is Re<S_a S_b>
      const double c = ab.real() - out.mean(a) * out.mean(b);
      out.cov(a, b) = c;
      out.cov(b, a) = c;
    }
  out.casimir = out.cov.trace() + out.mean.squaredNorm();
  return out;
}

}  // namespace dicke
