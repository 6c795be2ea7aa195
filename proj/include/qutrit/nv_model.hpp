#pragma once

#include <array>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qutrit/density_matrix.hpp"

namespace qutrit::nv {

// Levels are labelled 1..9 in the order
//   |+1,+1>, |+1,0>, |+1,-1>, |0,+1>, |0,0>, |0,-1>, |-1,+1>, |-1,0>, |-1,-1>
// (|m_S, m_I>, electron first), i.e. composite index = 3 (1 - m_S) + (1 - m_I).
inline constexpr int kLevels = 9;

struct Level {
  int m_s;
  int m_i;
};
Level level(int label);
int label_of(int m_s, int m_i);

enum class DephasingLaw { Gaussian, Exponential };

/// Physical constants and control parameters of the NV two-qutrit register.
/// Frequencies in Hz, times in seconds.
struct NvConfig {
  double D = 2.87e9;
  double Q = -4.95e6;
  double A = -2.16e6;
  /// Electron Zeeman frequency at 500 G (2.8025 MHz/G).
  double omega_e = 1.40125e9;
  /// 14N Zeeman frequency at 500 G (-0.3077 kHz/G).
  double omega_n = -153.85e3;
  double rabi_mw = 0.2e6;
  double rabi_rf = 25e3;
  double T1e = 4e-3;
  /// Informational; relaxation is not simulated.
  double T1n = 0.4;
  double T2e_star = 18e-6;
  double T2n_star = std::numeric_limits<double>::infinity();
  double p_e = 1.0;
  double p_n = 0.981;
  double t_wait = 90e-6;
  DephasingLaw dephasing_law = DephasingLaw::Gaussian;

  void validate() const;
};

enum class Channel { MW, RF };
enum class PhaseAxis { X, Y };

/// One infinitely selective rotation on the two-level subspace {|m>, |n>}.
/// |m> is the first basis vector of the subspace Pauli operators, so the
/// order of the pair fixes the sign convention of Y rotations.
struct PulseSpec {
  int m = 1;
  int n = 4;
  double angle = 0.0;
  PhaseAxis axis = PhaseAxis::X;
  Channel channel = Channel::MW;

  /// Channel inferred from which spin the transition flips.
  static PulseSpec between(int m, int n, double angle, PhaseAxis axis);
  /// Throws ValidationError unless (m, n) is a single-quantum ladder
  /// transition driven by the matching channel.
  void validate() const;
};

struct PrepStep {
  std::vector<PulseSpec> pulses;
  double wait_after = 0.0;
  void validate() const;
};

struct TransitionLine {
  std::string label; // "e1".."e6", "n1", "n2"
  int m;
  int n;
  Channel channel;
  double frequency; // Hz, |E_m - E_n| / 2 pi
};

/// Level pair driven by a named line. Pairs are ordered lower label first.
std::pair<int, int> transition_levels(std::string_view label);

/// Diagonal 9x9 H = 2 pi (D S_z^2 + w_e S_z + Q I_z^2 + w_n I_z + A S_z I_z),
/// in rad/s.
ComplexMatrix hamiltonian(const NvConfig &cfg);

/// The six electron lines e1..e6 and the two nuclear lines n1, n2.
std::vector<TransitionLine> transition_frequencies(const NvConfig &cfg);

/// exp(-i angle/2 (cos phi sigma_x + sin phi sigma_y)) on {|m>, |n>},
/// identity elsewhere; phi = 0 for X, pi/2 for Y.
ComplexMatrix pulse_unitary(const PulseSpec &pulse);

DensityMatrix apply_pulse(const DensityMatrix &rho, const PulseSpec &pulse);
DensityMatrix apply_pulses(const DensityMatrix &rho,
                           std::span<const PulseSpec> pulses);

/// Free-evolution dephasing in the rotating frame: coherences between levels
/// with different m_S decay with T2e*, those with different m_I with T2n*
/// (both factors when both differ). Populations untouched.
DensityMatrix dephase(const DensityMatrix &rho, double t, const NvConfig &cfg);

/// Post-pumping state lambda|1><1| + p_e|4><4| + lambda|7><7|, lambda =
/// (1 - p_e)/2, with each m_I = +1 component leaking a fraction 1 - p_n
/// into the m_I = 0 level of the same m_S.
DensityMatrix initial_state(const NvConfig &cfg);

enum class PrepMode {
  /// p_e = p_n = 1 regardless of cfg.
  Ideal,
  /// Initial polarizations from cfg.
  Realistic,
};

/// The three preparation steps for isotropic parameter p: population
/// shuffling, population balancing, coherence generation.
std::array<PrepStep, 3> preparation_steps(double p, const NvConfig &cfg);

struct PreparationResult {
  DensityMatrix final_state;
  /// States after step I, II and III (the last equals final_state).
  std::vector<DensityMatrix> intermediates;
};

PreparationResult prepare_isotropic(double p, const NvConfig &cfg,
                                    PrepMode mode = PrepMode::Ideal);

} // namespace qutrit::nv
