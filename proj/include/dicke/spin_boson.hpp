#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <functional>
#include <memory>
#include <mutex>

namespace dicke {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Dimensions of the symmetric Dicke ladder (j = N/2) times a truncated Fock
// space. Composite index = spin_index * boson_dim + boson_index, with spin
// index 0 <-> m = -N/2.
class HilbertDims {
 public:
  HilbertDims(int n_atoms, int fock_cutoff);

  int n_atoms() const noexcept { return n_atoms_; }
  int fock_cutoff() const noexcept { return fock_cutoff_; }
  Index spin_dim() const noexcept { return n_atoms_ + 1; }
  Index boson_dim() const noexcept { return fock_cutoff_ + 1; }
  Index total_dim() const noexcept { return spin_dim() * boson_dim(); }
  Index index(Index spin_index, Index boson_index) const noexcept {
    return spin_index * boson_dim() + boson_index;
  }

  friend bool operator==(const HilbertDims&, const HilbertDims&) = default;

 private:
  int n_atoms_;
  int fock_cutoff_;
};

enum class SpaceKind { spin, boson, composite };

// The space an operator acts on. Spin and boson factors carry their own
// dimension; composite spaces carry both.
struct Space {
  SpaceKind kind = SpaceKind::spin;
  Index spin_dim = 1;
  Index boson_dim = 1;

  static Space spin(Index d) { return {SpaceKind::spin, d, 1}; }
  static Space boson(Index d) { return {SpaceKind::boson, 1, d}; }
  static Space composite(const HilbertDims& dims) {
    return {SpaceKind::composite, dims.spin_dim(), dims.boson_dim()};
  }

  Index dim() const noexcept { return spin_dim * boson_dim; }
  friend bool operator==(const Space&, const Space&) = default;
};

class Operator {
 public:
  // Throws InvalidArgument if the flag is set but the matrix is not hermitian
  // to 1e-12 relative (max-norm).
  Operator(Space space, SparseMatrix matrix, bool hermitian);

  static Operator identity(Space space);
  static Operator zero(Space space);
  static Operator from_dense(Space space, const DenseMatrix& m, bool hermitian);

  const Space& space() const noexcept { return space_; }
  Index dim() const noexcept { return matrix_.rows(); }
  const SparseMatrix& matrix() const noexcept { return matrix_; }
  DenseMatrix dense() const { return DenseMatrix(matrix_); }
  bool hermitian() const noexcept { return hermitian_; }

  double max_norm() const;
  double hermiticity_deviation() const;
  bool is_real() const;

  Operator adjoint() const;
  // Verifies hermiticity to rel_tol, then returns (A + A^dagger)/2 flagged.
  Operator as_hermitian(double rel_tol = 1e-10) const;

  Vector apply(const Vector& v) const { return matrix_ * v; }

  Operator operator+(const Operator& rhs) const;
  Operator operator-(const Operator& rhs) const;
  Operator operator-() const;
  Operator operator*(const Operator& rhs) const;
  Operator operator*(double s) const;
  Operator operator*(cplx s) const;
  friend Operator operator*(double s, const Operator& a) { return a * s; }
  friend Operator operator*(cplx s, const Operator& a) { return a * s; }

 private:
  void require_same_space(const Operator& rhs, const char* what) const;

  Space space_;
  SparseMatrix matrix_;
  bool hermitian_;
};

Operator commutator(const Operator& a, const Operator& b);
Operator anticommutator(const Operator& a, const Operator& b);

// max |(A - B)_ij|; spaces must agree.
double max_abs_diff(const Operator& a, const Operator& b);

// Kronecker product of a spin-factor and a boson-factor operator.
Operator tensor(const Operator& spin_op, const Operator& boson_op);

struct SpinOps {
  int n_atoms;
  Operator sx, sy, sz, s2, splus, sminus;
};

// Collective spin on the j = N/2 ladder, S_a = (1/2) sum sigma_a.
SpinOps build_spin_ops(int n_atoms);

class SpectralDecomposition;

// Eigendecomposition of a fixed hermitian operator, computed on first use and
// shared by copies.
class CachedSpectrum {
 public:
  explicit CachedSpectrum(Operator hermitian_op);
  const SpectralDecomposition& get() const;
  const Operator& op() const noexcept { return state_->op; }

 private:
  struct State {
    explicit State(Operator o) : op(std::move(o)) {}
    Operator op;
    std::once_flag once;
    std::unique_ptr<SpectralDecomposition> value;
  };
  std::shared_ptr<State> state_;
};

// Hard-truncated Fock operators; a^dagger |n_max> = 0.
struct BosonOps {
  int n_max;
  Operator a, adag, n, x;
  // Eigendecomposition of x = a + a^dagger.
  CachedSpectrum x_spectrum;
};

BosonOps build_boson_ops(int n_max);

// A = V diag(lambda) V^dagger for a hermitian operator.
class SpectralDecomposition {
 public:
  explicit SpectralDecomposition(const Operator& hermitian_op);

  const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
  const DenseMatrix& eigenvectors() const noexcept { return vectors_; }
  const Space& space() const noexcept { return space_; }

  // f(A); the result is flagged hermitian when f is real on the spectrum.
  Operator apply(const std::function<cplx(double)>& f) const;

 private:
  Space space_;
  Eigen::VectorXd values_;
  DenseMatrix vectors_;
};

Operator operator_function(const std::function<cplx(double)>& f,
                           const Operator& hermitian_op);

class StateVector {
 public:
  static constexpr double kDefaultNormTol = 1e-9;

  // Throws StaleState if | ||amps|| - 1 | >= norm_tol.
  StateVector(HilbertDims dims, Vector amplitudes,
              double norm_tol = kDefaultNormTol);
  static StateVector normalized(HilbertDims dims, Vector amplitudes);

  const HilbertDims& dims() const noexcept { return dims_; }
  const Vector& amplitudes() const noexcept { return amps_; }
  double norm() const { return amps_.norm(); }
  double norm_tol() const noexcept { return norm_tol_; }
  bool within_tolerance() const;

  // rho_spin = Tr_boson |psi><psi|
  DenseMatrix reduced_spin_density() const;
  double photon_number() const;
  cplx expectation(const Operator& op) const;

 private:
  HilbertDims dims_;
  Vector amps_;
  double norm_tol_;
};

// |S_z = -N/2> (x) |0>
StateVector initial_state(const HilbertDims& dims);

struct SpinMoments {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  // C_ab = <{S_a, S_b}>/2 - <S_a><S_b>
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double casimir = 0.0;
};

// Throws StaleState if psi's norm is outside its tolerance.
SpinMoments moments(const StateVector& psi, const SpinOps& ops);

}  // namespace dicke
