// SPDX-License-Identifier: Apache-2.0
#pragma once

// Jones-calculus model of the dual-pass polarization intensity modulator:
// PBS -> HWP -> QWP -> EOM -> mirror -> EOM -> QWP -> HWP -> PBS.

#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "ghztof/common.hpp"

namespace ghztof::jones {

using cplx = std::complex<double>;

struct JonesVector {
  cplx h{0.0, 0.0};
  cplx v{0.0, 0.0};

  double intensity() const { return std::norm(h) + std::norm(v); }
};

/// 2x2 complex matrix, row-major: [[a, b], [c, d]].
struct JonesMatrix {
  std::array<cplx, 4> m{cplx{1.0}, cplx{0.0}, cplx{0.0}, cplx{1.0}};

  static JonesMatrix identity() { return {}; }
  static JonesMatrix diag(cplx a, cplx d) { return {{a, cplx{0.0}, cplx{0.0}, d}}; }

  cplx operator()(int r, int c) const { return m[r * 2 + c]; }

  JonesMatrix operator*(const JonesMatrix &o) const {
    return {{m[0] * o.m[0] + m[1] * o.m[2], m[0] * o.m[1] + m[1] * o.m[3],
             m[2] * o.m[0] + m[3] * o.m[2], m[2] * o.m[1] + m[3] * o.m[3]}};
  }
  JonesVector operator*(const JonesVector &e) const {
    return {m[0] * e.h + m[1] * e.v, m[2] * e.h + m[3] * e.v};
  }
  JonesMatrix operator*(cplx s) const { return {{m[0] * s, m[1] * s, m[2] * s, m[3] * s}}; }

  JonesMatrix adjoint() const {
    return {{std::conj(m[0]), std::conj(m[2]), std::conj(m[1]), std::conj(m[3])}};
  }
  cplx determinant() const { return m[0] * m[3] - m[1] * m[2]; }

  /// Largest entrywise deviation from another matrix.
  double max_abs_diff(const JonesMatrix &o) const {
    double d = 0.0;
    for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(m[i] - o.m[i]));
    return d;
  }
};

inline constexpr double kSingleModeHwpAngle = deg_to_rad(11.25);
inline constexpr double kDoubleModeHwpAngle = deg_to_rad(22.5);
inline constexpr double kQwpAngle = deg_to_rad(45.0);

/// Sinusoidal EOM drive V(t) = eta * cos(omega * t - phi).
struct EomDrive {
  double eta = 0.0;   // phase swing (rad)
  double omega = 1.0; // Hz
  double phi = 0.0;   // rad

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("EomDrive: eta must be >= 0");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidArgument("EomDrive: omega must be > 0");
  }
  double voltage(double t) const { return eta * std::cos(kTwoPi * omega * t - phi); }
};

enum class Mode { Single, Double };

struct ModulationMode {
  Mode mode = Mode::Single;
  double theta_h = kSingleModeHwpAngle;
  double theta_q = kQwpAngle;

  static ModulationMode single() { return {Mode::Single, kSingleModeHwpAngle, kQwpAngle}; }
  static ModulationMode doubled() { return {Mode::Double, kDoubleModeHwpAngle, kQwpAngle}; }
  static ModulationMode of(Mode m) { return m == Mode::Single ? single() : doubled(); }
};

/// Half-wave plate at angle theta, including the e^{-i pi/2} retardance phase.
inline JonesMatrix hwp_matrix(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const cplx g = std::polar(1.0, -kPi / 2.0);
  return JonesMatrix{{c * c - s * s, 2.0 * c * s, 2.0 * c * s, s * s - c * c}} * g;
}

/// Quarter-wave plate at angle theta, including the e^{-i pi/4} retardance phase.
inline JonesMatrix qwp_matrix(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const cplx i{0.0, 1.0};
  const cplx off = (1.0 - i) * c * s;
  const cplx g = std::polar(1.0, -kPi / 4.0);
  return JonesMatrix{{c * c + i * s * s, off, off, s * s + i * c * c}} * g;
}

/// EOM retarder B(V) = diag(e^{-iV/2}, e^{iV/2}).
inline JonesMatrix eom_matrix(double v) {
  return JonesMatrix::diag(std::polar(1.0, -v / 2.0), std::polar(1.0, v / 2.0));
}

inline JonesMatrix mirror_matrix() { return JonesMatrix::diag(1.0, -1.0); }
inline JonesMatrix horizontal_polarizer() { return JonesMatrix::diag(1.0, 0.0); }

/// Full round-trip system matrix L_h H(-th) Q(-tq) B(V) M B(V) Q(tq) H(th).
inline JonesMatrix dual_pass_matrix(const ModulationMode &mode, double v) {
  const JonesMatrix b = eom_matrix(v);
  return horizontal_polarizer() * hwp_matrix(-mode.theta_h) * qwp_matrix(-mode.theta_q) * b *
         mirror_matrix() * b * qwp_matrix(mode.theta_q) * hwp_matrix(mode.theta_h);
}

inline JonesVector dual_pass_output(const JonesVector &e0, const ModulationMode &mode, double v) {
  return dual_pass_matrix(mode, v) * e0;
}

/// PBS output for incident amplitude A: vertically polarized A * [0, 1]^T.
inline JonesVector pbs_input(double amplitude) { return {cplx{0.0}, cplx{amplitude}}; }

/// Output intensity |E3|^2 evaluated through the matrix chain.
inline double modulated_intensity(double v, const ModulationMode &mode, double amplitude) {
  if (!(amplitude >= 0.0)) throw InvalidArgument("modulated_intensity: amplitude must be >= 0");
  return dual_pass_output(pbs_input(amplitude), mode, v).intensity();
}

/// Exact (non-Taylor) intensity waveform I(t) under the sinusoidal drive.
inline std::vector<double> intensity_waveform(const EomDrive &drive, const ModulationMode &mode,
                                              double amplitude, std::span<const double> t_samples) {
  drive.validate();
  std::vector<double> out;
  out.reserve(t_samples.size());
  for (double t : t_samples) out.push_back(modulated_intensity(drive.voltage(t), mode, amplitude));
  return out;
}

} // namespace ghztof::jones
