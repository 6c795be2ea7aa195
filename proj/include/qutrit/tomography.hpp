#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qutrit/density_matrix.hpp"
#include "qutrit/nv_model.hpp"

namespace qutrit::tomo {

/// Photoluminescence rate of each level |1>..|9> (arbitrary counts units).
struct PLModel {
  std::array<double, 9> rates{};

  /// Linear ramp, brightest first in the order |4>,|5>,|6>,|1>,|2>,|3>,
  /// |7>,|8>,|9>: m_S = 0 levels brightest.
  static PLModel linear_ramp(double top = 1.0, double step = 0.04);

  /// Rate of level `label` in 1..9.
  double rate(int label) const { return rates.at(label - 1); }
  /// Throws ValidationError on negative/non-finite or all-equal rates.
  void validate() const;
};

enum class RecordKind { Normalization, StateMeasurement, NuclearPolarization };

/// 10, 15 and 4 entries respectively.
std::size_t record_length(RecordKind kind);
const char *to_string(RecordKind kind);
RecordKind record_kind_from_string(std::string_view s);

struct PLRecord {
  RecordKind kind = RecordKind::StateMeasurement;
  std::vector<double> values;
  std::vector<double> sigmas;

  void validate() const;
};

/// Linear-inversion result before any physicality constraint: populations
/// rho_11..rho_99 and the coherences rho_15, rho_59, rho_19.
struct RawStateEstimate {
  std::array<double, 9> populations{};
  std::array<Complex, 3> coherences{};
  /// One-sigma uncertainties in element-vector order (see element_vector).
  std::array<double, 15> sigmas{};

  /// (rho_11..rho_99, mu_1, nu_1, mu_2, nu_2, mu_3, nu_3) with
  /// rho_15 = mu_1 + i nu_1, rho_59 = mu_2 + i nu_2, rho_19 = mu_3 + i nu_3.
  Eigen::Matrix<double, 15, 1> element_vector() const;
  static RawStateEstimate from_element_vector(const Eigen::Matrix<double, 15, 1> &x);
  /// The same elements extracted from a 9x9 matrix (everything else ignored).
  static RawStateEstimate from_matrix(const ComplexMatrix &m);
};

struct MLEParams {
  std::array<double, 12> k{};
};

// ---------------------------------------------------------------------------
// Readout

/// sum_m rho_mm L_m.
double expected_pl(const DensityMatrix &rho, const PLModel &model);

/// Fresh Gaussian noise of std `sigma` on every expected value when
/// `noise_seed` is set; `sigma` is recorded as the per-entry uncertainty.
struct NoiseSpec {
  double sigma = 1e-3;
  std::optional<std::uint64_t> seed;
};

/// Ten pulse sequences (selective pi pulses) reading out the PL rate of each
/// level from the post-pumping state.
const std::vector<std::vector<nv::PulseSpec>> &normalization_sequences();

/// Coefficients of the ten normalization readouts in the nine rates, for
/// electron polarization p_e and nuclear polarization 1 (10 x 9).
Eigen::MatrixXd normalization_matrix(double p_e);

PLRecord simulate_normalization(const nv::NvConfig &cfg, const PLModel &model,
                                const NoiseSpec &noise);

struct NormalizationFit {
  double p_e = 1.0;
  PLModel model;
  double residual = 0.0; // Euclidean norm of the fitted system's residual
};

/// Solves the bilinear normalization system: scan p_e on a 1e-3 grid with a
/// linear least-squares fit of the rates at each point, then golden-section
/// refinement around the best grid point. Negative fitted rates are a
/// NumericalError.
NormalizationFit solve_normalization(const PLRecord &rec);

/// Fifteen pulse sequences (selective pi and pi/2 pulses, X or Y phase)
/// mapping populations and the three coherences onto PL.
const std::vector<std::vector<nv::PulseSpec>> &measurement_sequences();

/// 15 x 15 map from the element vector to the readouts.
Eigen::Matrix<double, 15, 15> measurement_matrix(const PLModel &model);

/// Applies measurement_sequences() to rho and reads out expected PL.
PLRecord simulate_measurement(const DensityMatrix &rho, const PLModel &model,
                              const NoiseSpec &noise);

/// Inverts the measurement matrix; element sigmas by linear propagation of
/// the record sigmas. Throws NumericalError for an (almost) singular matrix.
RawStateEstimate solve_elements(const PLRecord &rec, const PLModel &model);

/// Per-entry record sigma that gives an RMS propagated element sigma of
/// `target_element_sigma` under solve_elements.
double calibrate_record_sigma(const PLModel &model, double target_element_sigma);

// ---------------------------------------------------------------------------
// Maximum likelihood

enum class MleWeighting {
  /// (s - r)^2 / (2 max(|s|, epsilon)), s the estimated element.
  EstimatedElement,
  /// (s - r)^2 / (2 max(sigma_r, floor)^2), sigma_r from solve_elements.
  MeasurementVariance,
};

struct MleOptions {
  MleWeighting weighting = MleWeighting::EstimatedElement;
  double epsilon = 1e-6;
  double sigma_floor = 1e-9;
  int max_iterations = 20000;
  int max_restarts = 8;
};

struct MleResult {
  DensityMatrix state;
  MLEParams params;
  double objective = 0.0;
  bool converged = false;
  long evaluations = 0;
};

/// T(k)^dagger T(k) / tr(T^dagger T) for the 12-parameter sparse
/// lower-triangular T.
ComplexMatrix sigma_from_params(const MLEParams &params);

/// Likelihood objective of `params` against `raw`.
double mle_objective(const MLEParams &params, const RawStateEstimate &raw,
                     const MleOptions &opts = {});

/// Parameters reproducing the clipped, PSD-projected raw elements; the
/// optimizer's starting point.
MLEParams mle_initial_params(const RawStateEstimate &raw);

/// Physical state minimizing the likelihood objective. The result is always
/// a valid DensityMatrix; `converged` is false when the simplex search hit
/// its iteration budget.
MleResult mle_reconstruct(const RawStateEstimate &raw, const MleOptions &opts = {});

// ---------------------------------------------------------------------------
// Monte Carlo

/// Seed of ensemble member `index`: splitmix64(seed + index).
std::uint64_t member_seed(std::uint64_t seed, std::uint64_t index);

struct EnsembleSummary {
  std::vector<RawStateEstimate> raws;
  std::vector<MleResult> members;
  /// Element-wise mean of the member states (itself a valid state).
  DensityMatrix mean;
  /// Element-wise sample standard deviations of real and imaginary parts.
  Eigen::MatrixXd stddev_re;
  Eigen::MatrixXd stddev_im;
};

/// Perturbs `rec` M times with Gaussian noise at rec.sigmas and
/// reconstructs every member. Result is independent of `threads`.
EnsembleSummary monte_carlo_reconstruct(const PLRecord &rec, const PLModel &model,
                                        int M, std::uint64_t seed,
                                        const MleOptions &opts = {},
                                        int threads = 0);

// ---------------------------------------------------------------------------
// p estimation

using StateFamily = std::function<DensityMatrix(double)>;

struct PEstimate {
  double p_hat = 0.0;
  double fidelity = 0.0;
};

/// argmax_p F(sigma, family(p)) on [0, 1] by golden-section search.
PEstimate estimate_p(const DensityMatrix &sigma, const StateFamily &family,
                     double tol = 1e-6);

struct PDistribution {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> samples;
};

PDistribution estimate_p_ensemble(std::span<const DensityMatrix> states,
                                  const StateFamily &family, double tol = 1e-6);

// ---------------------------------------------------------------------------
// Nuclear polarization

/// Four readouts N11..N14 of the nuclear-polarization sequences for given
/// electron/nuclear polarizations; uses the rates of levels 1..8.
PLRecord simulate_nuclear_polarization(double p_e, double p_n,
                                       const PLModel &model,
                                       const NoiseSpec &noise);

/// p_n = (N13 - N14) / (N11 - N12 + N13 - N14). Throws NumericalError when
/// the denominator vanishes.
double nuclear_polarization(const PLRecord &rec);

} // namespace qutrit::tomo
