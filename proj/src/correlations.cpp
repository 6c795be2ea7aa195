#include "qutrit/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

#include "qutrit/nelder_mead.hpp"

namespace qutrit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kRangeSlack = 1e-12;
constexpr double kOutcomeCutoff = 1e-12;
constexpr double kDiscordSlack = 1e-9;
constexpr double kTieTol = 1e-12;

// Reflect x into [lo, hi] (triangle wave of period 2 (hi - lo)).
double reflect(double x, double lo, double hi) {
  const double w = hi - lo;
  double t = std::fmod(x - lo, 2.0 * w);
  if (t < 0)
    t += 2.0 * w;
  return t <= w ? lo + t : hi - (t - w);
}

double wrap(double x, double period) {
  double t = std::fmod(x, period);
  if (t < 0)
    t += period;
  return t;
}

double entropy3(const Eigen::Matrix3cd &m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(m, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (double p : es.eigenvalues())
    if (p > kEntropyCutoff)
      s -= p * std::log2(p);
  return s;
}

} // namespace

bool BasisParams::in_range() const {
  auto within = [](double x, double lo, double hi) {
    return x >= lo - kRangeSlack && x <= hi + kRangeSlack;
  };
  return within(alpha, 0, kPi) && within(beta, 0, kPi) &&
         gamma > -kPi / 2 && gamma <= kPi / 2 + kRangeSlack &&
         within(psi, 0, kTwoPi) && within(theta, 0, kTwoPi) &&
         within(phi, 0, kTwoPi);
}

BasisParams BasisParams::folded() const {
  BasisParams out;
  out.alpha = reflect(alpha, 0, kPi);
  out.beta = reflect(beta, 0, kPi);
  out.gamma = reflect(gamma, -kPi / 2, kPi / 2);
  if (out.gamma <= -kPi / 2)
    out.gamma = kPi / 2;
  out.psi = wrap(psi, kTwoPi);
  out.theta = wrap(theta, kTwoPi);
  out.phi = wrap(phi, kTwoPi);
  return out;
}

MeasurementBasis MeasurementBasis::from_columns(const Eigen::Matrix3cd &columns) {
  const Eigen::Matrix3cd gram = columns.adjoint() * columns;
  const double dev = (gram - Eigen::Matrix3cd::Identity()).cwiseAbs().maxCoeff();
  if (!std::isfinite(dev) || dev > 1e-10) {
    std::ostringstream os;
    os << "measurement basis is not orthonormal (Gram deviation " << dev << ")";
    throw ValidationError(os.str());
  }
  return MeasurementBasis(columns);
}

PureState MeasurementBasis::vector(int j) const {
  return PureState::from_amplitudes(u_.col(j));
}

void OptimizerConfig::validate() const {
  if (coarse_grid_points_per_axis < 1 || refinement_restarts < 1 ||
      max_iterations < 1 || threads < 0)
    throw ValidationError("optimizer config: counts must be >= 1");
  if (!(convergence_tol > 0))
    throw ValidationError("optimizer config: convergence_tol must be > 0");
}

// ---------------------------------------------------------------------------

DensityMatrix make_isotropic(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("isotropic state: p must lie in [0, 1]");
  const PureState psi = max_entangled(3);
  const ComplexMatrix m =
      (1.0 - p) / 9.0 * ComplexMatrix::Identity(9, 9) + p * psi.projector();
  return DensityMatrix::from_matrix(m, Dims{3, 3});
}

PureState max_entangled(int d) {
  if (d < 2)
    throw ValidationError("max_entangled: dimension must be >= 2");
  ComplexVector v = ComplexVector::Zero(d * d);
  for (int k = 0; k < d; ++k)
    v(k * d + k) = 1.0 / std::sqrt(static_cast<double>(d));
  return PureState::normalized(std::move(v));
}

double reference_phase(double alpha, double gamma) {
  return std::atan(std::tan(gamma) * std::tan(kPi / 4 - alpha));
}

Eigen::Matrix3cd spin1_rotation(double psi, double theta, double phi) {
  const Complex i(0, 1);
  const double c = std::cos(theta), s = std::sin(theta) / std::numbers::sqrt2;
  Eigen::Matrix3cd dy;
  dy << (1 + c) / 2, -s, (1 - c) / 2,
        s, c, -s,
        (1 - c) / 2, s, (1 + c) / 2;
  const Eigen::Vector3cd zl(std::exp(-i * psi), 1.0, std::exp(i * psi));
  const Eigen::Vector3cd zr(std::exp(-i * phi), 1.0, std::exp(i * phi));
  return zl.asDiagonal() * dy * zr.asDiagonal();
}

namespace {

Eigen::Matrix3cd basis_columns(const BasisParams &b) {
  const Complex i(0, 1);
  const double phi0 = reference_phase(b.alpha, b.gamma);
  const Complex ep = std::exp(-i * phi0), em = std::exp(i * phi0);
  const Complex eg = std::exp(-i * b.gamma);
  const double ca = std::cos(b.alpha), sa = std::sin(b.alpha);
  const double cb = std::cos(b.beta), sb = std::sin(b.beta);

  Eigen::Matrix3cd ref;
  // columns |+1_r>, |0_r>, |-1_r>; rows are the m = +1, 0, -1 components
  ref.col(0) << cb * ep * ca, -sb * eg, cb * em * sa;
  ref.col(1) << sb * ep * ca, cb * eg, sb * em * sa;
  ref.col(2) << -ep * sa, 0.0, em * ca;
  return spin1_rotation(b.psi, b.theta, b.phi) * ref;
}

double conditional_entropy_unchecked(const ComplexMatrix &rho, int da,
                                     const Eigen::Matrix3cd &u) {
  double total = 0.0;
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3cd v = u.col(j);
    // rho_A^j (unnormalized) = (I (x) <v|) rho (I (x) |v>)
    ComplexMatrix m = ComplexMatrix::Zero(da, da);
    for (int a = 0; a < da; ++a)
      for (int ap = 0; ap < da; ++ap) {
        Complex acc = 0.0;
        for (int b = 0; b < 3; ++b) {
          Complex row = 0.0;
          for (int bp = 0; bp < 3; ++bp)
            row += rho(a * 3 + b, ap * 3 + bp) * v(bp);
          acc += std::conj(v(b)) * row;
        }
        m(a, ap) = acc;
      }
    const double q = m.trace().real();
    if (q < kOutcomeCutoff)
      continue;
    m /= q;
    if (da == 3)
      total += q * entropy3(m);
    else
      total += q * shannon_entropy(hermitian_eigenvalues(m));
  }
  return total;
}

unsigned worker_count(int requested, std::size_t work) {
  unsigned n = requested > 0 ? static_cast<unsigned>(requested)
                             : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(work, 1)));
}

} // namespace

MeasurementBasis basis_from_params(const BasisParams &params) {
  if (!params.in_range())
    throw ValidationError("basis parameters outside their ranges");
  return MeasurementBasis::from_columns(basis_columns(params));
}

double conditional_entropy(const DensityMatrix &rho,
                           const MeasurementBasis &basis) {
  if (rho.dims().b != 3)
    throw ValidationError("conditional_entropy: measured subsystem B must be a qutrit");
  return conditional_entropy_unchecked(rho.matrix(), rho.dims().a,
                                       basis.columns());
}

double mutual_information(const DensityMatrix &rho) {
  const double i = von_neumann_entropy(partial_trace(rho, Subsystem::A)) +
                   von_neumann_entropy(partial_trace(rho, Subsystem::B)) -
                   von_neumann_entropy(rho);
  return (i < 0 && i >= -kDiscordSlack) ? 0.0 : i;
}

ClassicalCorrelation classical_correlation(const DensityMatrix &rho,
                                           const OptimizerConfig &cfg) {
  cfg.validate();
  if (rho.dims().b != 3)
    throw ValidationError("classical_correlation: measured subsystem B must be a qutrit");

  const ComplexMatrix &m = rho.matrix();
  const int da = rho.dims().a;
  const double s_a = von_neumann_entropy(partial_trace(rho, Subsystem::A));

  // Coarse grid, axis order (alpha, beta, gamma, psi, theta, phi), last axis
  // fastest, so flat index order is lexicographic parameter order.
  const int n = cfg.coarse_grid_points_per_axis;
  std::array<std::vector<double>, 6> axes;
  for (int k = 0; k < n; ++k) {
    const double t = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
    axes[0].push_back(kPi * t);
    axes[1].push_back(kPi * t);
    axes[2].push_back(-kPi / 2 + kPi * (k + 1) / n);
    for (int a = 3; a < 6; ++a)
      axes[a].push_back(kTwoPi * k / n);
  }
  std::size_t total = 1;
  for (int a = 0; a < 6; ++a)
    total *= static_cast<std::size_t>(n);

  auto grid_point = [&](std::size_t idx) {
    std::array<double, 6> v{};
    for (int a = 5; a >= 0; --a) {
      v[a] = axes[a][idx % n];
      idx /= n;
    }
    return BasisParams::from_array(v);
  };

  std::vector<double> values(total);
  const unsigned workers = worker_count(cfg.threads, total);
  {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t idx = w; idx < total; idx += workers)
          values[idx] = conditional_entropy_unchecked(
              m, da, basis_columns(grid_point(idx)));
      });
    for (auto &t : pool)
      t.join();
  }
  long evaluations = static_cast<long>(total);

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min<std::size_t>(cfg.refinement_restarts, total);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] != values[b] ? values[a] < values[b] : a < b;
                    });

  // Refinement runs are independent; results land in per-seed slots and are
  // reduced serially afterwards.
  std::vector<NelderMeadResult> runs(k);
  {
    NelderMeadOptions opts;
    opts.ftol = cfg.convergence_tol;
    opts.max_iterations = cfg.max_iterations;
    const Eigen::VectorXd steps =
        (Eigen::VectorXd(6) << kPi / std::max(n - 1, 1), kPi / std::max(n - 1, 1),
         kPi / n, kTwoPi / n, kTwoPi / n, kTwoPi / n)
            .finished() *
        0.5;
    auto objective = [&](const Eigen::VectorXd &x) {
      std::array<double, 6> v{};
      for (int a = 0; a < 6; ++a)
        v[a] = x(a);
      return conditional_entropy_unchecked(
          m, da, basis_columns(BasisParams::from_array(v).folded()));
    };
    const unsigned rw = worker_count(cfg.threads, k);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < rw; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < k; r += rw) {
          const auto start = grid_point(order[r]).as_array();
          runs[r] = nelder_mead(objective,
                                Eigen::Map<const Eigen::VectorXd>(start.data(), 6),
                                steps, opts);
        }
      });
    for (auto &t : pool)
      t.join();
  }

  bool any_converged = false;
  double best_f = values[order[0]];
  BasisParams best_p = grid_point(order[0]);
  for (const auto &r : runs) {
    evaluations += r.evaluations;
    any_converged = any_converged || r.converged;
    std::array<double, 6> v{};
    for (int a = 0; a < 6; ++a)
      v[a] = r.x(a);
    const BasisParams p = BasisParams::from_array(v).folded();
    if (r.f < best_f - kTieTol || (std::abs(r.f - best_f) <= kTieTol && p < best_p)) {
      best_f = std::min(best_f, r.f);
      best_p = p;
    }
  }
  if (!any_converged) {
    std::ostringstream os;
    os << "classical correlation: no refinement converged to "
       << cfg.convergence_tol << " within " << cfg.max_iterations
       << " iterations";
    throw NumericalError(os.str());
  }

  double c = s_a - best_f;
  if (c < 0 && c >= -kDiscordSlack)
    c = 0.0;
  return ClassicalCorrelation{c, best_p, evaluations};
}

double negativity(const DensityMatrix &rho) {
  const double n = (trace_norm(partial_transpose(rho, Subsystem::B)) - 1.0) / 2.0;
  return std::abs(n) <= 1e-12 ? 0.0 : n;
}

CorrelationReport quantum_discord(const DensityMatrix &rho,
                                  const OptimizerConfig &cfg) {
  CorrelationReport r;
  r.mutual_information = mutual_information(rho);
  const ClassicalCorrelation cc = classical_correlation(rho, cfg);
  r.classical_correlation = cc.value;
  r.optimizer_basis = cc.basis;
  r.optimizer_evals = cc.evaluations;
  double d = r.mutual_information - r.classical_correlation;
  if (d < -kDiscordSlack) {
    std::ostringstream os;
    os << "discord came out negative (" << d << "); optimizer failure";
    throw NumericalError(os.str());
  }
  r.discord = std::max(d, 0.0);
  r.negativity = negativity(rho);
  return r;
}

} // namespace qutrit
