#include "qutrit/nv_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qutrit::nv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Dims kDims{3, 3};

struct LineDef {
  const char *label;
  int m;
  int n;
};

// Table order; pairs lower label first.
constexpr std::array<LineDef, 8> kLines{{
    {"e1", 4, 7}, // |0,+1> <-> |-1,+1>
    {"e2", 1, 4}, // |0,+1> <-> |+1,+1>
    {"e3", 5, 8}, // |0,0>  <-> |-1,0>
    {"e4", 2, 5}, // |0,0>  <-> |+1,0>
    {"e5", 6, 9}, // |0,-1> <-> |-1,-1>
    {"e6", 3, 6}, // |0,-1> <-> |+1,-1>
    {"n1", 4, 5}, // |0,+1> <-> |0,0>
    {"n2", 5, 6}, // |0,0>  <-> |0,-1>
}};

double energy_hz(const NvConfig &c, Level l) {
  const double s = l.m_s, i = l.m_i;
  return c.D * s * s + c.omega_e * s + c.Q * i * i + c.omega_n * i + c.A * s * i;
}

double decay(double t, double t2, DephasingLaw law) {
  if (std::isinf(t2))
    return 1.0;
  const double x = t / t2;
  return law == DephasingLaw::Gaussian ? std::exp(-x * x) : std::exp(-x);
}

PulseSpec line_pulse(std::string_view label, double angle, PhaseAxis axis) {
  const auto [m, n] = transition_levels(label);
  return PulseSpec::between(m, n, angle, axis);
}

double half_angle_arcsin(double x) { return 2.0 * std::asin(std::sqrt(x)); }

} // namespace

Level level(int label) {
  if (label < 1 || label > kLevels)
    throw ValidationError("level label must be in 1..9");
  const int idx = label - 1;
  return Level{1 - idx / 3, 1 - idx % 3};
}

int label_of(int m_s, int m_i) {
  if (std::abs(m_s) > 1 || std::abs(m_i) > 1)
    throw ValidationError("spin projections must be in {-1, 0, +1}");
  return 3 * (1 - m_s) + (1 - m_i) + 1;
}

void NvConfig::validate() const {
  for (double f : {D, Q, A, omega_e, omega_n, rabi_mw, rabi_rf})
    if (!std::isfinite(f))
      throw ValidationError("NV config: frequencies must be finite");
  if (!(T1e > 0) || !(T1n > 0) || !(T2e_star > 0) || !(T2n_star > 0) ||
      !(t_wait >= 0))
    throw ValidationError("NV config: relaxation times must be > 0");
  if (!(p_e >= 0 && p_e <= 1) || !(p_n >= 0 && p_n <= 1))
    throw ValidationError("NV config: polarizations must lie in [0, 1]");
}

PulseSpec PulseSpec::between(int m, int n, double angle, PhaseAxis axis) {
  const Level a = level(m), b = level(n);
  PulseSpec p{m, n, angle, axis, a.m_s != b.m_s ? Channel::MW : Channel::RF};
  p.validate();
  return p;
}

void PulseSpec::validate() const {
  const Level a = level(m), b = level(n);
  const int ds = std::abs(a.m_s - b.m_s), di = std::abs(a.m_i - b.m_i);
  std::ostringstream os;
  os << "pulse (" << m << ", " << n << "): ";
  if (!((ds == 1 && di == 0) || (ds == 0 && di == 1)))
    throw ValidationError(os.str() + "not a single-quantum ladder transition");
  if ((ds == 1) != (channel == Channel::MW))
    throw ValidationError(os.str() + (ds == 1 ? "electron transition needs MW"
                                              : "nuclear transition needs RF"));
  if (!std::isfinite(angle))
    throw ValidationError(os.str() + "non-finite rotation angle");
}

void PrepStep::validate() const {
  if (pulses.empty() && !(wait_after > 0))
    throw ValidationError("preparation step has neither pulses nor a wait");
  if (wait_after < 0)
    throw ValidationError("preparation step has a negative wait");
  for (const auto &p : pulses)
    p.validate();
}

std::pair<int, int> transition_levels(std::string_view label) {
  for (const auto &l : kLines)
    if (label == l.label)
      return {l.m, l.n};
  throw ValidationError("unknown transition label '" + std::string(label) + "'");
}

ComplexMatrix hamiltonian(const NvConfig &cfg) {
  ComplexMatrix h = ComplexMatrix::Zero(kLevels, kLevels);
  for (int k = 1; k <= kLevels; ++k)
    h(k - 1, k - 1) = 2.0 * kPi * energy_hz(cfg, level(k));
  return h;
}

std::vector<TransitionLine> transition_frequencies(const NvConfig &cfg) {
  std::vector<TransitionLine> out;
  for (const auto &l : kLines) {
    const double f =
        std::abs(energy_hz(cfg, level(l.m)) - energy_hz(cfg, level(l.n)));
    const Channel ch = level(l.m).m_s != level(l.n).m_s ? Channel::MW : Channel::RF;
    out.push_back(TransitionLine{l.label, l.m, l.n, ch, f});
  }
  return out;
}

ComplexMatrix pulse_unitary(const PulseSpec &pulse) {
  pulse.validate();
  const Complex i(0, 1);
  const double phase = pulse.axis == PhaseAxis::X ? 0.0 : kPi / 2;
  const double c = std::cos(pulse.angle / 2), s = std::sin(pulse.angle / 2);
  ComplexMatrix u = ComplexMatrix::Identity(kLevels, kLevels);
  const int a = pulse.m - 1, b = pulse.n - 1;
  u(a, a) = c;
  u(b, b) = c;
  u(a, b) = -i * s * std::exp(-i * phase);
  u(b, a) = -i * s * std::exp(i * phase);
  return u;
}

DensityMatrix apply_pulse(const DensityMatrix &rho, const PulseSpec &pulse) {
  const ComplexMatrix u = pulse_unitary(pulse);
  return DensityMatrix::from_matrix(u * rho.matrix() * u.adjoint(), rho.dims());
}

DensityMatrix apply_pulses(const DensityMatrix &rho,
                           std::span<const PulseSpec> pulses) {
  ComplexMatrix m = rho.matrix();
  for (const auto &p : pulses) {
    const ComplexMatrix u = pulse_unitary(p);
    m = u * m * u.adjoint();
  }
  return DensityMatrix::from_matrix(m, rho.dims());
}

DensityMatrix dephase(const DensityMatrix &rho, double t, const NvConfig &cfg) {
  if (!(t >= 0))
    throw ValidationError("dephase: time must be >= 0");
  if (rho.dim() != kLevels)
    throw ValidationError("dephase: expects a 9-level state");
  const double fe = decay(t, cfg.T2e_star, cfg.dephasing_law);
  const double fn = decay(t, cfg.T2n_star, cfg.dephasing_law);
  ComplexMatrix m = rho.matrix();
  for (int r = 1; r <= kLevels; ++r)
    for (int c = 1; c <= kLevels; ++c) {
      const Level a = level(r), b = level(c);
      double f = 1.0;
      if (a.m_s != b.m_s)
        f *= fe;
      if (a.m_i != b.m_i)
        f *= fn;
      m(r - 1, c - 1) *= f;
    }
  return DensityMatrix::from_matrix(m, rho.dims());
}

DensityMatrix initial_state(const NvConfig &cfg) {
  cfg.validate();
  const double lambda = (1.0 - cfg.p_e) / 2.0;
  ComplexMatrix m = ComplexMatrix::Zero(kLevels, kLevels);
  auto place = [&](int m_s, double weight) {
    m(label_of(m_s, +1) - 1, label_of(m_s, +1) - 1) += weight * cfg.p_n;
    m(label_of(m_s, 0) - 1, label_of(m_s, 0) - 1) += weight * (1.0 - cfg.p_n);
  };
  place(+1, lambda);
  place(0, cfg.p_e);
  place(-1, lambda);
  return DensityMatrix::from_matrix(m, kDims);
}

std::array<PrepStep, 3> preparation_steps(double p, const NvConfig &cfg) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("preparation: p must lie in [0, 1]");
  using enum PhaseAxis;
  PrepStep shuffle{{
                       line_pulse("n1", half_angle_arcsin((2 + p) / 3), X),
                       line_pulse("n2", half_angle_arcsin((1 - p) / (2 + p)), X),
                       line_pulse("e2", kPi, X),
                       line_pulse("e5", kPi, X),
                   },
                   cfg.t_wait};
  PrepStep balance{{
                       line_pulse("e2", half_angle_arcsin(2.0 / 3), X),
                       line_pulse("e1", kPi / 2, X),
                       line_pulse("e4", half_angle_arcsin((1 - p) / (3 + 6 * p)), X),
                       line_pulse("e3", half_angle_arcsin((1 - p) / (2 + 7 * p)), X),
                       line_pulse("e5", half_angle_arcsin(2.0 / 3), X),
                       line_pulse("e6", kPi / 2, X),
                   },
                   cfg.t_wait};
  PrepStep coherence{{
                         line_pulse("n1", half_angle_arcsin(1.0 / 3), Y),
                         line_pulse("n2", kPi / 2, Y),
                         line_pulse("e2", kPi, Y),
                         line_pulse("e5", kPi, Y),
                     },
                     0.0};
  return {shuffle, balance, coherence};
}

PreparationResult prepare_isotropic(double p, const NvConfig &cfg,
                                    PrepMode mode) {
  cfg.validate();
  NvConfig start_cfg = cfg;
  if (mode == PrepMode::Ideal) {
    start_cfg.p_e = 1.0;
    start_cfg.p_n = 1.0;
  }
  const auto steps = preparation_steps(p, cfg);
  DensityMatrix rho = initial_state(start_cfg);
  std::vector<DensityMatrix> intermediates;
  for (const auto &step : steps) {
    step.validate();
    rho = apply_pulses(rho, step.pulses);
    if (step.wait_after > 0)
      rho = dephase(rho, step.wait_after, cfg);
    intermediates.push_back(rho);
  }
  return PreparationResult{rho, std::move(intermediates)};
}

} // namespace qutrit::nv
