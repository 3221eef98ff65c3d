#pragma once
// Sign and handedness conventions shared by every optical element.
//
// Circular basis in terms of linear polarization:
//   |L> = (|H> + i|V>)/sqrt2,  |R> = (|H> - i|V>)/sqrt2
// which is the same as |H> = (|L>+|R>)/sqrt2 and |V> = -i(|L>-|R>)/sqrt2.
//
// Retarders act on (H, V) column vectors with fast axis at angle t from H:
//   HWP(t) = [[cos2t, sin2t], [sin2t, -cos2t]]
//   QWP(t) = Rot(-t) diag(1, i) Rot(t),  Rot(t) = [[cos t, sin t], [-sin t, cos t]]
// so QWP(45deg)|H> is |R> up to phase.
//
// A tuned q-plate with zero axis offset maps |L,l> -> |R,l+2q> and |R,l> -> |L,l-2q>.
//
// Under these conventions the d=4 preparation tables reproduce their targets as
// written. The d=2 table reproduces its targets only in the mirrored angle frame
// (every waveplate angle negated, equivalently swapping the L/R labels of the
// lab frame); PrepRecipe records which frame a table is quoted in.

#include <complex>
#include <numbers>

namespace hdqkd {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDeg = kPi / 180.0;
inline constexpr cplx kI{0.0, 1.0};

enum class AngleFrame { Standard, Mirrored };

inline double frame_angle(double theta, AngleFrame frame) {
  return frame == AngleFrame::Mirrored ? -theta : theta;
}

}  // namespace hdqkd
