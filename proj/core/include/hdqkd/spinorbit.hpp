#pragma once

#include <Eigen/Dense>
#include <compare>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdqkd/conventions.hpp"

namespace hdqkd {

enum class Polarization { H, V, L, R };

struct ModeIndex {
  Polarization pol = Polarization::H;
  int oam = 0;
  auto operator<=>(const ModeIndex&) const = default;
};

std::string to_string(const ModeIndex& m);

using ModeBasis = std::vector<ModeIndex>;

struct SubspaceLeakage : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BasisMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvalidState : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Pure state over an explicit list of polarization x OAM modes.
class StateVector {
 public:
  StateVector(ModeBasis basis, Eigen::VectorXcd amplitudes);

  // Rescales the amplitudes to unit norm; throws on a zero vector.
  static StateVector normalized(ModeBasis basis, Eigen::VectorXcd amplitudes);
  static StateVector mode(ModeBasis basis, const ModeIndex& m);

  int dim() const { return static_cast<int>(basis_.size()); }
  const ModeBasis& basis_order() const { return basis_; }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }
  cplx amplitude(const ModeIndex& m) const;

  // Same physical state expressed over another mode list. Modes may mix the
  // linear and circular polarization bases; any weight the target list cannot
  // represent raises SubspaceLeakage.
  StateVector in_basis(const ModeBasis& target) const;

 private:
  ModeBasis basis_;
  Eigen::VectorXcd amps_;
};

// {H,V} x oams and {L,R} x oams, oam-major.
ModeBasis linear_modes(const std::vector<int>& oams);
ModeBasis circular_modes(const std::vector<int>& oams);

// Re-expresses every H/V mode in the L/R basis; circular modes pass through.
StateVector circular_basis_change(const StateVector& state);

// |<proj|prep>|^2; both states must share basis_order.
double born_probability(const StateVector& prep, const StateVector& proj);

// |<a|b>|^2 after moving b onto a's mode list: comparison up to global phase.
double fidelity(const StateVector& a, const StateVector& b);

// Linear map on the span of `basis`. Columns may leak out of the modelled
// subspace (a q-plate pushing OAM past the truncation); such inputs are
// detected by `leak` (state leaks iff |leak * amps| > tol) and rejected.
class OpticalOperator {
 public:
  OpticalOperator(ModeBasis basis, Eigen::MatrixXcd matrix, Eigen::MatrixXcd leak);
  OpticalOperator(ModeBasis basis, Eigen::MatrixXcd matrix);

  int dim() const { return static_cast<int>(basis_.size()); }
  const ModeBasis& basis() const { return basis_; }
  const Eigen::MatrixXcd& matrix() const { return m_; }
  const Eigen::MatrixXcd& leak() const { return leak_; }
  bool unitary() const { return unitary_; }
  bool has_leaky_inputs() const { return leak_.rows() > 0; }

  StateVector apply(const StateVector& s) const;
  OpticalOperator adjoint() const;

  // (a * b) acts as b first.
  friend OpticalOperator operator*(const OpticalOperator& a, const OpticalOperator& b);

 private:
  ModeBasis basis_;
  Eigen::MatrixXcd m_;
  Eigen::MatrixXcd leak_;
  bool unitary_ = false;
};

// Angles in radians; oams is the truncated OAM space the element acts on.
OpticalOperator hwp(double theta, const std::vector<int>& oams);
OpticalOperator qwp(double theta, const std::vector<int>& oams);
OpticalOperator jones_element(const Eigen::Matrix2cd& jones, const std::vector<int>& oams);

// Tuned q-plate of charge q (2q must be an integer).
OpticalOperator qplate(double q, const std::vector<int>& oams);

Eigen::Matrix2cd hwp_jones(double theta);
Eigen::Matrix2cd qwp_jones(double theta);

// True when a ~ c*b for some |c| = 1 within tol (max-norm).
bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tol = 1e-12);

}  // namespace hdqkd
