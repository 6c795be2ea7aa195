#pragma once

#include <array>

#include "qutrit/density_matrix.hpp"

namespace qutrit {

/// Six angles generating a qutrit measurement basis: (alpha, beta, gamma)
/// pick a reference basis, (psi, theta, phi) are Euler angles of a spin-1
/// rotation applied to it.
///
/// Ranges: alpha, beta in [0, pi]; gamma in (-pi/2, pi/2];
/// psi, theta, phi in [0, 2 pi].
struct BasisParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double psi = 0.0;
  double theta = 0.0;
  double phi = 0.0;

  std::array<double, 6> as_array() const {
    return {alpha, beta, gamma, psi, theta, phi};
  }
  static BasisParams from_array(const std::array<double, 6> &v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  bool in_range() const;
  /// Maps arbitrary reals into the parameter box: reflection for alpha, beta,
  /// gamma and 2 pi wrap-around for the Euler angles. Continuous almost
  /// everywhere, so it can sit between an unconstrained optimizer and the
  /// basis construction.
  BasisParams folded() const;

  auto operator<=>(const BasisParams &) const = default;
};

/// Three orthonormal vectors of C^3, stored as the columns of a 3x3 unitary.
class MeasurementBasis {
public:
  /// Throws ValidationError unless |<v_i|v_j> - delta_ij| <= 1e-10.
  static MeasurementBasis from_columns(const Eigen::Matrix3cd &columns);
  static MeasurementBasis computational() {
    return MeasurementBasis(Eigen::Matrix3cd::Identity());
  }

  const Eigen::Matrix3cd &columns() const { return u_; }
  PureState vector(int j) const;

private:
  explicit MeasurementBasis(const Eigen::Matrix3cd &u) : u_(u) {}
  Eigen::Matrix3cd u_;
};

struct OptimizerConfig {
  int coarse_grid_points_per_axis = 7;
  int refinement_restarts = 10;
  double convergence_tol = 1e-6; // bits
  int max_iterations = 2000;
  /// Worker threads for the coarse grid; 0 = hardware concurrency.
  int threads = 0;

  void validate() const;
};

struct ClassicalCorrelation {
  double value = 0.0; // bits
  BasisParams basis;
  long evaluations = 0;
};

struct CorrelationReport {
  double mutual_information = 0.0;
  double classical_correlation = 0.0;
  double discord = 0.0;
  double negativity = 0.0;
  BasisParams optimizer_basis;
  long optimizer_evals = 0;
};

/// (1-p)/9 I_9 + p |psi><psi| with |psi> the maximally entangled qutrit pair.
DensityMatrix make_isotropic(double p);

/// sum_k |k,k> / sqrt(d).
PureState max_entangled(int d);

/// phi_0 with tan(phi_0) = tan(gamma) tan(pi/4 - alpha), principal branch.
double reference_phase(double alpha, double gamma);

/// Spin-1 rotation exp(-i psi S_z) exp(-i theta S_y) exp(-i phi S_z) in the
/// (m = +1, 0, -1) basis.
Eigen::Matrix3cd spin1_rotation(double psi, double theta, double phi);

/// Throws ValidationError when params are outside their ranges.
MeasurementBasis basis_from_params(const BasisParams &params);

/// Average entropy of subsystem A after a rank-1 projective measurement of
/// subsystem B in `basis`: sum_j q_j S(rho_A^j). Outcomes with q_j < 1e-12
/// contribute nothing. Subsystem B must be a qutrit.
double conditional_entropy(const DensityMatrix &rho,
                           const MeasurementBasis &basis);

/// S(A) + S(B) - S(AB), bits.
double mutual_information(const DensityMatrix &rho);

/// max over projective bases on B of S(rho_A) - conditional_entropy.
/// Coarse grid over the six basis angles, then Nelder-Mead refinement from
/// the best `refinement_restarts` grid points. Throws NumericalError when no
/// refinement reaches convergence_tol within max_iterations.
ClassicalCorrelation classical_correlation(const DensityMatrix &rho,
                                           const OptimizerConfig &cfg);

/// (||rho^{T_B}||_1 - 1) / 2; values within 1e-12 of 0 are reported as 0.
double negativity(const DensityMatrix &rho);

/// Mutual information, classical correlation, discord and negativity.
/// Discord in [-1e-9, 0) is reported as 0; anything lower is a NumericalError.
CorrelationReport quantum_discord(const DensityMatrix &rho,
                                  const OptimizerConfig &cfg);

} // namespace qutrit
