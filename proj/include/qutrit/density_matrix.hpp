#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qutrit {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Input violates a documented precondition (bad shape, out-of-range value,
/// malformed file). Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure did not reach its stopping criterion or produced an
/// unphysical result. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Subsystem { A, B };

/// Subsystem dimensions of a bipartite space, first factor = A.
struct Dims {
  int a = 3;
  int b = 3;
  int total() const { return a * b; }
  bool operator==(const Dims &) const = default;
};

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kNormTol = 1e-12;
inline constexpr double kEntropyCutoff = 1e-12;

/// Kronecker product a (x) b.
ComplexMatrix tensor(const ComplexMatrix &a, const ComplexMatrix &b);

/// Ascending eigenvalues of a Hermitian matrix. Every spectral quantity in the
/// library goes through this one routine.
RealVector hermitian_eigenvalues(const ComplexMatrix &m);

bool all_finite(const ComplexMatrix &m);

class PureState {
public:
  /// Throws ValidationError unless | <v|v> - 1 | <= 1e-12.
  static PureState from_amplitudes(ComplexVector amplitudes);
  /// Normalizes first; throws on a zero or non-finite vector.
  static PureState normalized(ComplexVector amplitudes);

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const ComplexVector &amplitudes() const { return amplitudes_; }
  Complex operator[](int i) const { return amplitudes_(i); }
  ComplexMatrix projector() const;

private:
  explicit PureState(ComplexVector v) : amplitudes_(std::move(v)) {}
  ComplexVector amplitudes_;
};

/// Hermitian, unit-trace, positive-semidefinite operator on a bipartite space.
///
/// Instances are only obtainable through validating factories, so every
/// DensityMatrix in the program satisfies the invariants above to the
/// kHermitianTol / kTraceTol / kPsdTol tolerances. The stored matrix is
/// exactly Hermitian (the validated input is symmetrized).
class DensityMatrix {
public:
  static DensityMatrix from_matrix(const ComplexMatrix &m, Dims dims);
  static DensityMatrix from_pure(const PureState &psi, Dims dims);
  static DensityMatrix maximally_mixed(Dims dims);
  /// Single-system state, dims = (d, 1).
  static DensityMatrix from_matrix(const ComplexMatrix &m) {
    return from_matrix(m, Dims{static_cast<int>(m.rows()), 1});
  }

  const ComplexMatrix &matrix() const { return m_; }
  Dims dims() const { return dims_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  Complex operator()(int i, int j) const { return m_(i, j); }

  RealVector eigenvalues() const { return hermitian_eigenvalues(m_); }
  double purity() const;

private:
  DensityMatrix(ComplexMatrix m, Dims dims) : m_(std::move(m)), dims_(dims) {}
  ComplexMatrix m_;
  Dims dims_;
};

/// Human-readable reason why `m` is not a valid density matrix for `dims`,
/// or an empty string when it is.
std::string density_matrix_violation(const ComplexMatrix &m, Dims dims);

DensityMatrix tensor(const DensityMatrix &a, const DensityMatrix &b);

DensityMatrix partial_trace(const DensityMatrix &rho, Subsystem keep);

/// Transpose of the selected tensor factor. The result is Hermitian but in
/// general not positive, so it is returned as a raw matrix.
ComplexMatrix partial_transpose(const DensityMatrix &rho, Subsystem on);

/// Entropy in bits, 0 log 0 = 0; eigenvalues below 1e-12 count as zero.
double von_neumann_entropy(const DensityMatrix &rho);

/// Shannon entropy in bits of a probability vector (same cutoff as above).
double shannon_entropy(const RealVector &probabilities);

/// Sum of singular values. Throws ValidationError for non-square input.
double trace_norm(const ComplexMatrix &m);

/// Uhlmann fidelity, squared convention: (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const DensityMatrix &rho, const DensityMatrix &sigma);

/// Principal square root of a Hermitian PSD matrix (negative roundoff
/// eigenvalues clipped to 0).
ComplexMatrix psd_sqrt(const ComplexMatrix &m);

} // namespace qutrit
