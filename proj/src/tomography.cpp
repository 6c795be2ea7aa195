#include "qutrit/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "qutrit/nelder_mead.hpp"

namespace qutrit::tomo {

namespace {

using nv::PhaseAxis;
using nv::PulseSpec;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat15 = Eigen::Matrix<double, 15, 15>;

constexpr double kPi = std::numbers::pi;
constexpr Dims kDims{3, 3};

// Composite (0-based) indices of the three coherent levels |1>, |5>, |9>.
constexpr int k1 = 0, k5 = 4, k9 = 8;

PulseSpec pi_x(int m, int n) { return PulseSpec::between(m, n, kPi, PhaseAxis::X); }
PulseSpec pi_y(int m, int n) { return PulseSpec::between(m, n, kPi, PhaseAxis::Y); }
PulseSpec half_x(int m, int n) { return PulseSpec::between(m, n, kPi / 2, PhaseAxis::X); }
PulseSpec half_y(int m, int n) { return PulseSpec::between(m, n, kPi / 2, PhaseAxis::Y); }

std::vector<double> gaussian_noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(n);
  for (auto &x : out)
    x = g(rng);
  return out;
}

PLRecord make_record(RecordKind kind, std::vector<double> values,
                     const NoiseSpec &noise) {
  if (!(noise.sigma > 0) || !std::isfinite(noise.sigma))
    throw ValidationError("record sigma must be > 0");
  if (noise.seed) {
    const auto z = gaussian_noise(values.size(), *noise.seed);
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] += noise.sigma * z[i];
  }
  PLRecord rec{kind, std::move(values),
               std::vector<double>(record_length(kind), noise.sigma)};
  rec.validate();
  return rec;
}

unsigned worker_count(int requested, std::size_t work) {
  unsigned n = requested > 0 ? static_cast<unsigned>(requested)
                             : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work, 1)));
}

} // namespace

// ---------------------------------------------------------------------------

PLModel PLModel::linear_ramp(double top, double step) {
  constexpr std::array<int, 9> brightness_order{4, 5, 6, 1, 2, 3, 7, 8, 9};
  PLModel m;
  for (int r = 0; r < 9; ++r)
    m.rates[brightness_order[r] - 1] = top - step * r;
  m.validate();
  return m;
}

void PLModel::validate() const {
  for (double r : rates)
    if (!std::isfinite(r) || r < 0)
      throw ValidationError("PL model: rates must be finite and >= 0");
  if (std::all_of(rates.begin(), rates.end(), [&](double r) { return r == rates[0]; }))
    throw ValidationError("PL model: all rates equal, readout cannot be inverted");
}

std::size_t record_length(RecordKind kind) {
  switch (kind) {
  case RecordKind::Normalization:
    return 10;
  case RecordKind::StateMeasurement:
    return 15;
  case RecordKind::NuclearPolarization:
    return 4;
  }
  throw ValidationError("unknown record kind");
}

const char *to_string(RecordKind kind) {
  switch (kind) {
  case RecordKind::Normalization:
    return "normalization";
  case RecordKind::StateMeasurement:
    return "state-measurement";
  case RecordKind::NuclearPolarization:
    return "nuclear-polarization";
  }
  return "?";
}

RecordKind record_kind_from_string(std::string_view s) {
  for (auto k : {RecordKind::Normalization, RecordKind::StateMeasurement,
                 RecordKind::NuclearPolarization})
    if (s == to_string(k))
      return k;
  throw ValidationError("unknown record kind '" + std::string(s) + "'");
}

void PLRecord::validate() const {
  const std::size_t n = record_length(kind);
  if (values.size() != n || sigmas.size() != n) {
    std::ostringstream os;
    os << "PL record of kind " << to_string(kind) << " needs " << n
       << " values and sigmas, got " << values.size() << " values and "
       << sigmas.size() << " sigmas";
    throw ValidationError(os.str());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(values[i]))
      throw ValidationError("PL record: value " + std::to_string(i + 1) +
                            " is not finite");
    if (!(sigmas[i] > 0) || !std::isfinite(sigmas[i]))
      throw ValidationError("PL record: sigma " + std::to_string(i + 1) +
                            " must be > 0");
  }
}

Vec15 RawStateEstimate::element_vector() const {
  Vec15 x;
  for (int i = 0; i < 9; ++i)
    x(i) = populations[i];
  for (int c = 0; c < 3; ++c) {
    x(9 + 2 * c) = coherences[c].real();
    x(10 + 2 * c) = coherences[c].imag();
  }
  return x;
}

RawStateEstimate RawStateEstimate::from_element_vector(const Vec15 &x) {
  RawStateEstimate r;
  for (int i = 0; i < 9; ++i)
    r.populations[i] = x(i);
  for (int c = 0; c < 3; ++c)
    r.coherences[c] = Complex(x(9 + 2 * c), x(10 + 2 * c));
  return r;
}

RawStateEstimate RawStateEstimate::from_matrix(const ComplexMatrix &m) {
  RawStateEstimate r;
  for (int i = 0; i < 9; ++i)
    r.populations[i] = m(i, i).real();
  r.coherences = {m(k1, k5), m(k5, k9), m(k1, k9)};
  return r;
}

// ---------------------------------------------------------------------------

double expected_pl(const DensityMatrix &rho, const PLModel &model) {
  if (rho.dim() != 9)
    throw ValidationError("expected_pl: expects a 9-level state");
  double s = 0.0;
  for (int m = 0; m < 9; ++m)
    s += rho.matrix()(m, m).real() * model.rates[m];
  return s;
}

const std::vector<std::vector<PulseSpec>> &normalization_sequences() {
  // Each sequence carries the |4> population (p_e) to one level, or swaps
  // one of the lambda-weighted levels with |4>.
  static const std::vector<std::vector<PulseSpec>> seqs = {
      {},                                       // N1:  p_e on |4>
      {pi_x(4, 5), pi_x(5, 6)},                 // N2:  -> |6>
      {pi_x(1, 4)},                             // N3:  |1> <-> |4>
      {pi_x(4, 5), pi_x(5, 6), pi_x(3, 6)},     // N4:  -> |3>
      {pi_x(4, 7)},                             // N5:  |4> <-> |7>
      {pi_x(4, 5), pi_x(5, 6), pi_x(6, 9)},     // N6:  -> |9>
      {pi_x(4, 5)},                             // N7:  -> |5>
      {pi_x(4, 5), pi_x(2, 5)},                 // N8:  -> |2>
      {pi_x(4, 5), pi_x(5, 8)},                 // N9:  -> |8>
      {pi_x(7, 8)},                             // N10: |7> -> |8>
  };
  return seqs;
}

Eigen::MatrixXd normalization_matrix(double p_e) {
  const double l = (1.0 - p_e) / 2.0;
  // Column of the rate that carries p_e in each row (1-based), or 0 when the
  // row is special-cased below.
  constexpr std::array<int, 10> pe_col{4, 6, 1, 3, 7, 9, 5, 2, 8, 4};
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(10, 9);
  for (int r = 0; r < 10; ++r) {
    a(r, 0) += l;
    a(r, 6) += l;
    a(r, pe_col[r] - 1) += p_e;
  }
  // N3: |1> and |4> swapped; N5: |4> and |7> swapped; N10: |7> moved to |8>.
  a(2, 0) = p_e;
  a(2, 3) = l;
  a(4, 3) = l;
  a(4, 6) = p_e;
  a(9, 6) = 0.0;
  a(9, 7) = l;
  return a;
}

PLRecord simulate_normalization(const nv::NvConfig &cfg, const PLModel &model,
                                const NoiseSpec &noise) {
  model.validate();
  const DensityMatrix rho0 = nv::initial_state(cfg);
  std::vector<double> values;
  for (const auto &seq : normalization_sequences())
    values.push_back(expected_pl(nv::apply_pulses(rho0, seq), model));
  return make_record(RecordKind::Normalization, std::move(values), noise);
}

NormalizationFit solve_normalization(const PLRecord &rec) {
  rec.validate();
  if (rec.kind != RecordKind::Normalization)
    throw ValidationError("solve_normalization: record kind must be normalization");
  const Eigen::Map<const Eigen::VectorXd> n(rec.values.data(), 10);

  struct Fit {
    double residual;
    Eigen::VectorXd rates;
  };
  auto fit = [&](double pe) {
    const Eigen::MatrixXd a = normalization_matrix(pe);
    Eigen::VectorXd x = a.colPivHouseholderQr().solve(n);
    return Fit{(a * x - n).norm(), std::move(x)};
  };

  constexpr int kSteps = 1000;
  int best = 0;
  double best_res = std::numeric_limits<double>::infinity();
  for (int s = 0; s <= kSteps; ++s) {
    const double r = fit(static_cast<double>(s) / kSteps).residual;
    if (r < best_res) {
      best_res = r;
      best = s;
    }
  }

  // Golden-section refinement within one grid step on either side.
  double lo = std::max(0.0, (best - 1.0) / kSteps);
  double hi = std::min(1.0, (best + 1.0) / kSteps);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = fit(x1).residual, f2 = fit(x2).residual;
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = fit(x1).residual;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = fit(x2).residual;
    }
  }
  double pe = 0.5 * (lo + hi);
  Fit f = fit(pe);
  const double grid_pe = static_cast<double>(best) / kSteps;
  if (best_res < f.residual) {
    pe = grid_pe;
    f = fit(pe);
  }

  NormalizationFit out;
  out.p_e = pe;
  out.residual = f.residual;
  for (int i = 0; i < 9; ++i) {
    if (f.rates(i) < 0) {
      std::ostringstream os;
      os << "normalization fit gave a negative PL rate for level " << i + 1
         << " (" << f.rates(i) << ") at p_e = " << pe;
      throw NumericalError(os.str());
    }
    out.model.rates[i] = f.rates(i);
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::vector<PulseSpec>> &measurement_sequences() {
  static const std::vector<std::vector<PulseSpec>> seqs = {
      {},                                                   // E1
      {pi_x(5, 6), pi_x(4, 5)},                             // E2
      {pi_x(1, 4)},                                         // E3
      {pi_x(3, 6), pi_x(5, 6), pi_x(4, 5)},                 // E4
      {pi_x(4, 7)},                                         // E5
      {pi_x(6, 9), pi_x(5, 6), pi_x(4, 5)},                 // E6
      {pi_x(4, 5)},                                         // E7
      {pi_x(2, 5), pi_x(4, 5)},                             // E8
      {pi_x(5, 8), pi_x(4, 5)},                             // E9
      {pi_y(1, 4), half_y(4, 5)},                           // E10: mu_1
      {pi_y(1, 4), half_x(4, 5)},                           // E11: nu_1
      {pi_y(6, 9), half_y(5, 6), pi_x(4, 5)},               // E12: mu_2
      {pi_y(6, 9), half_x(5, 6), pi_x(4, 5)},               // E13: nu_2
      {pi_y(1, 4), pi_y(6, 9), pi_y(5, 6), half_y(4, 5)},   // E14: mu_3
      {pi_y(1, 4), pi_y(6, 9), pi_y(5, 6), half_x(4, 5)},   // E15: nu_3
  };
  return seqs;
}

Mat15 measurement_matrix(const PLModel &model) {
  std::array<double, 15> L{};
  for (int i = 1; i <= 9; ++i)
    L[i] = model.rate(i);
  L[11] = (L[4] + L[5]) / 2;
  L[12] = (L[4] + L[6]) / 2;
  L[13] = L[5] - L[4];
  L[14] = L[4] - L[6];
  // Rate index seen by each population rho_11..rho_99, per readout.
  constexpr int rows[15][9] = {
      {1, 2, 3, 4, 5, 6, 7, 8, 9},   {1, 2, 3, 5, 6, 4, 7, 8, 9},
      {4, 2, 3, 1, 5, 6, 7, 8, 9},   {1, 2, 4, 5, 6, 3, 7, 8, 9},
      {1, 2, 3, 7, 5, 6, 4, 8, 9},   {1, 2, 3, 5, 6, 9, 7, 8, 4},
      {1, 2, 3, 5, 4, 6, 7, 8, 9},   {1, 4, 3, 5, 2, 6, 7, 8, 9},
      {1, 2, 3, 5, 8, 6, 7, 4, 9},   {11, 2, 3, 1, 11, 6, 7, 8, 9},
      {11, 2, 3, 1, 11, 6, 7, 8, 9}, {1, 2, 3, 5, 12, 9, 7, 8, 12},
      {1, 2, 3, 5, 12, 9, 7, 8, 12}, {11, 2, 3, 1, 6, 9, 7, 8, 11},
      {11, 2, 3, 1, 6, 9, 7, 8, 11},
  };
  constexpr int coherence_rate[6] = {13, 13, 14, 14, 13, 13};
  Mat15 a = Mat15::Zero();
  for (int r = 0; r < 15; ++r) {
    for (int c = 0; c < 9; ++c)
      a(r, c) = L[rows[r][c]];
    if (r >= 9)
      a(r, r) = L[coherence_rate[r - 9]];
  }
  return a;
}

PLRecord simulate_measurement(const DensityMatrix &rho, const PLModel &model,
                              const NoiseSpec &noise) {
  model.validate();
  if (rho.dim() != 9)
    throw ValidationError("simulate_measurement: expects a 9-level state");
  std::vector<double> values;
  for (const auto &seq : measurement_sequences())
    values.push_back(expected_pl(nv::apply_pulses(rho, seq), model));
  return make_record(RecordKind::StateMeasurement, std::move(values), noise);
}

namespace {

Mat15 inverse_measurement_matrix(const PLModel &model) {
  model.validate();
  const Mat15 a = measurement_matrix(model);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(a)};
  const auto &sv = svd.singularValues();
  const double rcond = sv(14) / sv(0);
  if (!(rcond > 1e-12)) {
    std::ostringstream os;
    os << "measurement matrix is singular for this PL model (rcond " << rcond
       << "); rates of |4>, |5>, |6> must differ";
    throw NumericalError(os.str());
  }
  return a.fullPivLu().inverse();
}

} // namespace

RawStateEstimate solve_elements(const PLRecord &rec, const PLModel &model) {
  rec.validate();
  if (rec.kind != RecordKind::StateMeasurement)
    throw ValidationError("solve_elements: record kind must be state-measurement");
  const Mat15 inv = inverse_measurement_matrix(model);
  const Eigen::Map<const Vec15> e(rec.values.data());
  const Eigen::Map<const Vec15> s(rec.sigmas.data());
  RawStateEstimate raw = RawStateEstimate::from_element_vector(inv * e);
  const Vec15 var = inv.cwiseAbs2() * s.cwiseAbs2();
  for (int i = 0; i < 15; ++i)
    raw.sigmas[i] = std::sqrt(var(i));
  return raw;
}

double calibrate_record_sigma(const PLModel &model, double target_element_sigma) {
  if (!(target_element_sigma > 0))
    throw ValidationError("target element sigma must be > 0");
  const Mat15 inv = inverse_measurement_matrix(model);
  // Unit record sigma: element variance is the squared row norm.
  const double rms = std::sqrt(inv.cwiseAbs2().sum() / 15.0);
  return target_element_sigma / rms;
}

// ---------------------------------------------------------------------------

ComplexMatrix sigma_from_params(const MLEParams &params) {
  const auto &k = params.k;
  Eigen::Matrix<double, 9, 9> t = Eigen::Matrix<double, 9, 9>::Zero();
  for (int i = 0; i < 9; ++i)
    t(i, i) = k[i];
  t(k5, k1) = k[9];
  t(k9, k1) = k[10];
  t(k9, k5) = k[11];
  const Eigen::Matrix<double, 9, 9> g = t.transpose() * t;
  const double tr = g.trace();
  if (!(tr > 0) || !std::isfinite(tr))
    throw NumericalError("MLE parameters give a zero or non-finite T^dagger T");
  return (g / tr).cast<Complex>();
}

namespace {

// Elements of sigma(k) that enter the likelihood, in element-vector order.
// The ansatz is real, so the three imaginary parts are identically zero.
Vec15 ansatz_elements(const std::array<double, 12> &k) {
  double tr = 0.0;
  for (double v : k)
    tr += v * v;
  Vec15 s = Vec15::Zero();
  for (int i = 0; i < 9; ++i)
    s(i) = k[i] * k[i];
  s(k1) += k[9] * k[9] + k[10] * k[10];
  s(k5) += k[11] * k[11];
  s(9) = k[9] * k[4] + k[10] * k[11];  // sigma_15
  s(11) = k[11] * k[8];                // sigma_59
  s(13) = k[10] * k[8];                // sigma_19
  return s / tr;
}

double weighted_misfit(const Vec15 &s, const Vec15 &r, const RawStateEstimate &raw,
                       const MleOptions &opts) {
  double f = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double d = s(i) - r(i);
    const double w = opts.weighting == MleWeighting::EstimatedElement
                         ? std::max(std::abs(s(i)), opts.epsilon)
                         : std::pow(std::max(raw.sigmas[i], opts.sigma_floor), 2);
    f += d * d / (2.0 * w);
  }
  return f;
}

} // namespace

double mle_objective(const MLEParams &params, const RawStateEstimate &raw,
                     const MleOptions &opts) {
  return weighted_misfit(ansatz_elements(params.k), raw.element_vector(), raw, opts);
}

MLEParams mle_initial_params(const RawStateEstimate &raw) {
  std::array<double, 9> pops{};
  double total = 0.0;
  for (int i = 0; i < 9; ++i) {
    pops[i] = std::isfinite(raw.populations[i]) ? std::max(raw.populations[i], 0.0) : 0.0;
    total += pops[i];
  }
  if (!(total > 0)) {
    pops.fill(1.0 / 9);
    total = 1.0;
  }
  for (auto &p : pops)
    p /= total;

  // Coherent block on |1>, |5>, |9> projected onto the PSD cone.
  Eigen::Matrix3d b;
  auto re = [&](int c) {
    const double v = raw.coherences[c].real() / total;
    return std::isfinite(v) ? v : 0.0;
  };
  b << pops[k1], re(0), re(2),
       re(0), pops[k5], re(1),
       re(2), re(1), pops[k9];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(b);
  b = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
      es.eigenvectors().transpose();

  // b = T^T T with T lower triangular on (1, 5, 9): factor from the last
  // index upwards; zero pivots leave the dependent entries at zero.
  constexpr double tiny = 1e-15;
  MLEParams p;
  auto &k = p.k;
  for (int i = 0; i < 9; ++i)
    k[i] = std::sqrt(pops[i]);
  k[8] = std::sqrt(std::max(b(2, 2), 0.0));
  k[11] = k[8] > tiny ? b(1, 2) / k[8] : 0.0;
  k[10] = k[8] > tiny ? b(0, 2) / k[8] : 0.0;
  k[4] = std::sqrt(std::max(b(1, 1) - k[11] * k[11], 0.0));
  k[9] = k[4] > tiny ? (b(0, 1) - k[10] * k[11]) / k[4] : 0.0;
  k[0] = std::sqrt(std::max(b(0, 0) - k[9] * k[9] - k[10] * k[10], 0.0));
  return p;
}

MleResult mle_reconstruct(const RawStateEstimate &raw, const MleOptions &opts) {
  const Vec15 r = raw.element_vector();
  for (int i = 0; i < 15; ++i)
    if (!std::isfinite(r(i)))
      throw ValidationError("mle_reconstruct: raw estimate has non-finite elements");

  const MLEParams init = mle_initial_params(raw);
  auto objective = [&](const Eigen::VectorXd &x) {
    std::array<double, 12> k{};
    double tr = 0.0;
    for (int i = 0; i < 12; ++i) {
      k[i] = x(i);
      tr += k[i] * k[i];
    }
    if (!(tr > 1e-300))
      return std::numeric_limits<double>::max();
    return weighted_misfit(ansatz_elements(k), r, raw, opts);
  };

  Eigen::VectorXd x0(12), steps(12);
  for (int i = 0; i < 12; ++i) {
    x0(i) = init.k[i];
    steps(i) = std::max(0.05 * std::abs(init.k[i]), 0.01);
  }
  NelderMeadOptions nm;
  nm.ftol = 1e-14;
  nm.xtol = 1e-9;
  nm.max_iterations = opts.max_iterations;
  const NelderMeadResult res =
      nelder_mead_restarted(objective, x0, steps, nm, opts.max_restarts);

  MLEParams best;
  for (int i = 0; i < 12; ++i)
    best.k[i] = res.x(i);
  if (objective(x0) < res.f)
    best = init;
  return MleResult{DensityMatrix::from_matrix(sigma_from_params(best), kDims), best,
                   mle_objective(best, raw, opts), res.converged,
                   static_cast<long>(res.evaluations)};
}

// ---------------------------------------------------------------------------

std::uint64_t member_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + index + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

EnsembleSummary monte_carlo_reconstruct(const PLRecord &rec, const PLModel &model,
                                        int M, std::uint64_t seed,
                                        const MleOptions &opts, int threads) {
  if (M < 1)
    throw ValidationError("Monte Carlo: at least one member required");
  rec.validate();
  model.validate();
  if (rec.kind != RecordKind::StateMeasurement)
    throw ValidationError("Monte Carlo: record kind must be state-measurement");

  std::vector<std::optional<RawStateEstimate>> raws(M);
  std::vector<std::optional<MleResult>> members(M);
  std::vector<std::exception_ptr> errors(M);
  auto run_member = [&](int i) {
    try {
      PLRecord perturbed = rec;
      const auto z = gaussian_noise(rec.values.size(), member_seed(seed, i));
      for (std::size_t j = 0; j < z.size(); ++j)
        perturbed.values[j] += rec.sigmas[j] * z[j];
      raws[i] = solve_elements(perturbed, model);
      members[i] = mle_reconstruct(*raws[i], opts);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const unsigned workers = worker_count(threads, static_cast<std::size_t>(M));
  {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int i = static_cast<int>(w); i < M; i += static_cast<int>(workers))
          run_member(i);
      });
    for (auto &t : pool)
      t.join();
  }
  for (const auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  ComplexMatrix sum = ComplexMatrix::Zero(9, 9);
  for (const auto &m : members)
    sum += m->state.matrix();
  const ComplexMatrix mean = sum / static_cast<double>(M);

  Eigen::MatrixXd var_re = Eigen::MatrixXd::Zero(9, 9);
  Eigen::MatrixXd var_im = Eigen::MatrixXd::Zero(9, 9);
  for (const auto &m : members) {
    const ComplexMatrix d = m->state.matrix() - mean;
    var_re += d.real().cwiseAbs2();
    var_im += d.imag().cwiseAbs2();
  }
  const double denom = M > 1 ? static_cast<double>(M - 1) : 1.0;

  EnsembleSummary out{{}, {}, DensityMatrix::from_matrix(mean, kDims),
                      (var_re / denom).cwiseSqrt(), (var_im / denom).cwiseSqrt()};
  out.raws.reserve(M);
  out.members.reserve(M);
  for (int i = 0; i < M; ++i) {
    out.raws.push_back(std::move(*raws[i]));
    out.members.push_back(std::move(*members[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------

PEstimate estimate_p(const DensityMatrix &sigma, const StateFamily &family,
                     double tol) {
  auto f = [&](double p) { return fidelity(sigma, family(p)); };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  PEstimate best{0.5 * (lo + hi), 0.0};
  best.fidelity = f(best.p_hat);
  // The maximum may sit on the boundary of [0, 1].
  for (double edge : {0.0, 1.0})
    if (std::abs(edge - best.p_hat) <= tol) {
      const double fe = f(edge);
      if (fe >= best.fidelity)
        best = {edge, fe};
    }
  return best;
}

PDistribution estimate_p_ensemble(std::span<const DensityMatrix> states,
                                  const StateFamily &family, double tol) {
  if (states.empty())
    throw ValidationError("estimate_p_ensemble: no states");
  PDistribution d;
  for (const auto &s : states)
    d.samples.push_back(estimate_p(s, family, tol).p_hat);
  const double n = static_cast<double>(d.samples.size());
  for (double p : d.samples)
    d.mean += p / n;
  if (d.samples.size() > 1) {
    double ss = 0.0;
    for (double p : d.samples)
      ss += (p - d.mean) * (p - d.mean);
    d.stddev = std::sqrt(ss / (n - 1));
  }
  return d;
}

// ---------------------------------------------------------------------------

PLRecord simulate_nuclear_polarization(double p_e, double p_n, const PLModel &model,
                                       const NoiseSpec &noise) {
  if (!(p_e >= 0 && p_e <= 1) || !(p_n >= 0 && p_n <= 1))
    throw ValidationError("polarizations must lie in [0, 1]");
  model.validate();
  const double lam = (1.0 - p_e) / 2.0, q = 1.0 - p_n;
  const auto l = [&](int i) { return model.rate(i); };
  const double common = lam * p_n * l(1) + lam * q * l(2);
  std::vector<double> v{
      common + p_e * p_n * l(4) + p_e * q * l(5) + lam * p_n * l(7) + lam * q * l(8),
      common + p_e * p_n * l(4) + lam * q * l(5) + lam * p_n * l(7) + p_e * q * l(8),
      common + lam * q * l(4) + p_e * p_n * l(5) + p_e * q * l(7) + lam * p_n * l(8),
      common + lam * q * l(4) + lam * p_n * l(5) + p_e * q * l(7) + p_e * p_n * l(8),
  };
  return make_record(RecordKind::NuclearPolarization, std::move(v), noise);
}

double nuclear_polarization(const PLRecord &rec) {
  rec.validate();
  if (rec.kind != RecordKind::NuclearPolarization)
    throw ValidationError("nuclear_polarization: record kind must be nuclear-polarization");
  const auto &n = rec.values;
  const double num = n[2] - n[3];
  const double den = n[0] - n[1] + n[2] - n[3];
  double scale = 0.0;
  for (double v : n)
    scale = std::max(scale, std::abs(v));
  if (std::abs(den) <= 1e-12 * std::max(scale, 1e-300))
    throw NumericalError("nuclear polarization: vanishing denominator "
                         "(degenerate rates or p_e = 1/3)");
  return num / den;
}

} // namespace qutrit::tomo
