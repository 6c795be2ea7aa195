#include "qutrit/density_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qutrit {

ComplexMatrix tensor(const ComplexMatrix &a, const ComplexMatrix &b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

RealVector hermitian_eigenvalues(const ComplexMatrix &m) {
  if (m.rows() != m.cols())
    throw ValidationError("hermitian_eigenvalues: matrix is not square");
  const ComplexMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalError("hermitian eigendecomposition failed");
  return es.eigenvalues();
}

bool all_finite(const ComplexMatrix &m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

PureState PureState::from_amplitudes(ComplexVector amplitudes) {
  if (amplitudes.size() == 0)
    throw ValidationError("pure state: empty amplitude vector");
  if (!all_finite(amplitudes))
    throw ValidationError("pure state: non-finite amplitude");
  const double n = amplitudes.squaredNorm();
  if (std::abs(n - 1.0) > kNormTol) {
    std::ostringstream os;
    os << "pure state: norm^2 = " << n << " is not 1";
    throw ValidationError(os.str());
  }
  return PureState(std::move(amplitudes));
}

PureState PureState::normalized(ComplexVector amplitudes) {
  if (amplitudes.size() == 0 || !all_finite(amplitudes))
    throw ValidationError("pure state: empty or non-finite amplitude vector");
  const double n = amplitudes.norm();
  if (n == 0.0)
    throw ValidationError("pure state: zero vector cannot be normalized");
  return PureState(amplitudes / n);
}

ComplexMatrix PureState::projector() const {
  return amplitudes_ * amplitudes_.adjoint();
}

// ---------------------------------------------------------------------------

std::string density_matrix_violation(const ComplexMatrix &m, Dims dims) {
  std::ostringstream os;
  if (dims.a < 1 || dims.b < 1) {
    os << "invalid subsystem dimensions (" << dims.a << ", " << dims.b << ")";
    return os.str();
  }
  if (m.rows() != dims.total() || m.cols() != dims.total()) {
    os << "matrix is " << m.rows() << "x" << m.cols() << ", expected "
       << dims.total() << "x" << dims.total();
    return os.str();
  }
  if (!all_finite(m))
    return "matrix has non-finite entries";
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) {
    os << "not Hermitian (max |rho - rho^dagger| = " << herm << ")";
    return os.str();
  }
  const Complex tr = m.trace();
  if (std::abs(tr - 1.0) > kTraceTol) {
    os << "trace " << tr.real() << " is not 1";
    return os.str();
  }
  const double lmin = hermitian_eigenvalues(m).minCoeff();
  if (lmin < -kPsdTol) {
    os << "not positive semidefinite (min eigenvalue " << lmin << ")";
    return os.str();
  }
  return {};
}

DensityMatrix DensityMatrix::from_matrix(const ComplexMatrix &m, Dims dims) {
  if (auto why = density_matrix_violation(m, dims); !why.empty())
    throw ValidationError("density matrix: " + why);
  return DensityMatrix(0.5 * (m + m.adjoint()), dims);
}

DensityMatrix DensityMatrix::from_pure(const PureState &psi, Dims dims) {
  return from_matrix(psi.projector(), dims);
}

DensityMatrix DensityMatrix::maximally_mixed(Dims dims) {
  const int d = dims.total();
  return from_matrix(ComplexMatrix::Identity(d, d) / static_cast<double>(d),
                     dims);
}

double DensityMatrix::purity() const {
  return (m_ * m_).trace().real();
}

DensityMatrix tensor(const DensityMatrix &a, const DensityMatrix &b) {
  return DensityMatrix::from_matrix(tensor(a.matrix(), b.matrix()),
                                    Dims{a.dim(), b.dim()});
}

DensityMatrix partial_trace(const DensityMatrix &rho, Subsystem keep) {
  const auto [da, db] = rho.dims();
  const ComplexMatrix &m = rho.matrix();
  switch (keep) {
  case Subsystem::A: {
    ComplexMatrix out = ComplexMatrix::Zero(da, da);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < da; ++j)
        for (int k = 0; k < db; ++k)
          out(i, j) += m(i * db + k, j * db + k);
    return DensityMatrix::from_matrix(out, Dims{da, 1});
  }
  case Subsystem::B: {
    ComplexMatrix out = ComplexMatrix::Zero(db, db);
    for (int i = 0; i < db; ++i)
      for (int j = 0; j < db; ++j)
        for (int k = 0; k < da; ++k)
          out(i, j) += m(k * db + i, k * db + j);
    return DensityMatrix::from_matrix(out, Dims{db, 1});
  }
  }
  throw ValidationError("partial_trace: invalid subsystem selector");
}

ComplexMatrix partial_transpose(const DensityMatrix &rho, Subsystem on) {
  const auto [da, db] = rho.dims();
  const ComplexMatrix &m = rho.matrix();
  if (on != Subsystem::A && on != Subsystem::B)
    throw ValidationError("partial_transpose: invalid subsystem selector");
  ComplexMatrix out(m.rows(), m.cols());
  for (int ia = 0; ia < da; ++ia)
    for (int ib = 0; ib < db; ++ib)
      for (int ja = 0; ja < da; ++ja)
        for (int jb = 0; jb < db; ++jb) {
          const Complex v = m(ia * db + ib, ja * db + jb);
          if (on == Subsystem::B)
            out(ia * db + jb, ja * db + ib) = v;
          else
            out(ja * db + ib, ia * db + jb) = v;
        }
  return out;
}

double shannon_entropy(const RealVector &probabilities) {
  double s = 0.0;
  for (double p : probabilities) {
    if (p < -kPsdTol)
      throw ValidationError("entropy: negative eigenvalue/probability " +
                            std::to_string(p));
    if (p > kEntropyCutoff)
      s -= p * std::log2(p);
  }
  return s;
}

double von_neumann_entropy(const DensityMatrix &rho) {
  return shannon_entropy(rho.eigenvalues());
}

double trace_norm(const ComplexMatrix &m) {
  if (m.rows() != m.cols())
    throw ValidationError("trace_norm: matrix is not square");
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm <= kHermitianTol)
    return hermitian_eigenvalues(m).cwiseAbs().sum();
  // Singular values are the square roots of the eigenvalues of m^dagger m.
  const RealVector ev = hermitian_eigenvalues(m.adjoint() * m);
  double s = 0.0;
  for (double e : ev)
    s += std::sqrt(std::max(e, 0.0));
  return s;
}

ComplexMatrix psd_sqrt(const ComplexMatrix &m) {
  const ComplexMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  // Eigenvalues at rounding level are zeroed so their square roots do not inflate.
  const RealVector ev = es.eigenvalues();
  const double tol = ev.size() * std::numeric_limits<double>::epsilon() * ev.cwiseAbs().maxCoeff();
  const RealVector root = ev.unaryExpr([tol](double e) { return e > tol ? std::sqrt(e) : 0.0; });
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
}

double fidelity(const DensityMatrix &rho, const DensityMatrix &sigma) {
  if (rho.dim() != sigma.dim())
    throw ValidationError("fidelity: dimension mismatch");
  // Trace norm of sqrt(rho) sqrt(sigma); symmetric and stable for rank-deficient inputs.
  const ComplexMatrix prod = psd_sqrt(rho.matrix()) * psd_sqrt(sigma.matrix());
  const double s = Eigen::JacobiSVD<ComplexMatrix>(prod).singularValues().sum();
  return std::clamp(s * s, 0.0, 1.0);
}

} // namespace qutrit
