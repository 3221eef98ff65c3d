#include "hdqkd/spinorbit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hdqkd {

namespace {

constexpr double kNormTol = 1e-12;
constexpr double kLeakTol = 1e-10;

// Polarization vector of a mode in the (H, V) frame.
Eigen::Vector2cd linear_components(Polarization p) {
  const double r = 1.0 / std::sqrt(2.0);
  switch (p) {
    case Polarization::H: return {1.0, 0.0};
    case Polarization::V: return {0.0, 1.0};
    case Polarization::L: return {r, kI * r};
    case Polarization::R: return {r, -kI * r};
  }
  return {0.0, 0.0};
}

std::vector<int> oams_of(const ModeBasis& a, const ModeBasis& b = {}) {
  std::set<int> s;
  for (const auto& m : a) s.insert(m.oam);
  for (const auto& m : b) s.insert(m.oam);
  return {s.begin(), s.end()};
}

// Columns: each mode of `basis` written in the linear frame over `oams`.
Eigen::MatrixXcd frame_matrix(const ModeBasis& basis, const std::vector<int>& oams) {
  Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(2 * static_cast<Eigen::Index>(oams.size()),
                                              static_cast<Eigen::Index>(basis.size()));
  for (std::size_t c = 0; c < basis.size(); ++c) {
    auto pos = std::find(oams.begin(), oams.end(), basis[c].oam) - oams.begin();
    F.block<2, 1>(2 * pos, static_cast<Eigen::Index>(c)) = linear_components(basis[c].pol);
  }
  return F;
}

void check_unique(const ModeBasis& basis) {
  std::set<ModeIndex> seen(basis.begin(), basis.end());
  if (seen.size() != basis.size()) throw InvalidState("basis_order has duplicate modes");
}

}  // namespace

std::string to_string(const ModeIndex& m) {
  static const char* names[] = {"H", "V", "L", "R"};
  return std::string(names[static_cast<int>(m.pol)]) + "," + (m.oam > 0 ? "+" : "") +
         std::to_string(m.oam);
}

StateVector::StateVector(ModeBasis basis, Eigen::VectorXcd amplitudes)
    : basis_(std::move(basis)), amps_(std::move(amplitudes)) {
  if (static_cast<Eigen::Index>(basis_.size()) != amps_.size())
    throw InvalidState("amplitude count does not match basis size");
  check_unique(basis_);
  if (std::abs(amps_.squaredNorm() - 1.0) > kNormTol)
    throw InvalidState("state is not normalized");
}

StateVector StateVector::normalized(ModeBasis basis, Eigen::VectorXcd amplitudes) {
  double n = amplitudes.norm();
  if (n == 0.0) throw InvalidState("zero vector cannot be normalized");
  return StateVector(std::move(basis), amplitudes / n);
}

StateVector StateVector::mode(ModeBasis basis, const ModeIndex& m) {
  auto it = std::find(basis.begin(), basis.end(), m);
  if (it == basis.end()) throw BasisMismatch("mode " + to_string(m) + " not in basis");
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis.size()));
  a(it - basis.begin()) = 1.0;
  return StateVector(std::move(basis), std::move(a));
}

cplx StateVector::amplitude(const ModeIndex& m) const {
  auto it = std::find(basis_.begin(), basis_.end(), m);
  if (it == basis_.end()) return 0.0;
  return amps_(it - basis_.begin());
}

StateVector StateVector::in_basis(const ModeBasis& target) const {
  if (target == basis_) return *this;
  check_unique(target);
  auto oams = oams_of(basis_, target);
  Eigen::MatrixXcd Fs = frame_matrix(basis_, oams);
  Eigen::MatrixXcd Ft = frame_matrix(target, oams);
  Eigen::VectorXcd lin = Fs * amps_;
  Eigen::VectorXcd c = Ft.adjoint() * lin;
  if ((Ft * c - lin).norm() > kLeakTol)
    throw SubspaceLeakage("state has weight outside the target mode list");
  return StateVector::normalized(target, c);
}

ModeBasis linear_modes(const std::vector<int>& oams) {
  ModeBasis b;
  for (int l : oams) {
    b.push_back({Polarization::H, l});
    b.push_back({Polarization::V, l});
  }
  return b;
}

ModeBasis circular_modes(const std::vector<int>& oams) {
  ModeBasis b;
  for (int l : oams) {
    b.push_back({Polarization::L, l});
    b.push_back({Polarization::R, l});
  }
  return b;
}

StateVector circular_basis_change(const StateVector& state) {
  ModeBasis target;
  for (const auto& m : state.basis_order()) {
    if (m.pol == Polarization::H) {
      target.push_back({Polarization::L, m.oam});
      target.push_back({Polarization::R, m.oam});
    } else if (m.pol == Polarization::V) {
      continue;  // covered by the H entry of the same oam
    } else {
      target.push_back(m);
    }
  }
  // V modes whose H partner is absent still need both circular modes.
  for (const auto& m : state.basis_order()) {
    if (m.pol != Polarization::V) continue;
    for (auto p : {Polarization::L, Polarization::R}) {
      ModeIndex c{p, m.oam};
      if (std::find(target.begin(), target.end(), c) == target.end()) target.push_back(c);
    }
  }
  return state.in_basis(target);
}

double born_probability(const StateVector& prep, const StateVector& proj) {
  if (prep.basis_order() != proj.basis_order())
    throw BasisMismatch("born_probability needs states over the same basis order");
  return std::norm(proj.amplitudes().dot(prep.amplitudes()));
}

double fidelity(const StateVector& a, const StateVector& b) {
  StateVector bb = b.in_basis(a.basis_order());
  return std::norm(a.amplitudes().dot(bb.amplitudes()));
}

OpticalOperator::OpticalOperator(ModeBasis basis, Eigen::MatrixXcd matrix, Eigen::MatrixXcd leak)
    : basis_(std::move(basis)), m_(std::move(matrix)), leak_(std::move(leak)) {
  const auto n = static_cast<Eigen::Index>(basis_.size());
  if (m_.rows() != n || m_.cols() != n) throw InvalidState("operator size does not match basis");
  if (leak_.rows() > 0 && leak_.cols() != n) throw InvalidState("leak detector has wrong width");
  check_unique(basis_);
  Eigen::MatrixXcd g = m_.adjoint() * m_ - Eigen::MatrixXcd::Identity(n, n);
  unitary_ = leak_.rows() == 0 && g.cwiseAbs().maxCoeff() < kNormTol;
}

OpticalOperator::OpticalOperator(ModeBasis basis, Eigen::MatrixXcd matrix)
    : OpticalOperator(std::move(basis), std::move(matrix), Eigen::MatrixXcd(0, 0)) {}

StateVector OpticalOperator::apply(const StateVector& s) const {
  StateVector in = s.in_basis(basis_);
  if (leak_.rows() > 0 && (leak_ * in.amplitudes()).norm() > kLeakTol)
    throw SubspaceLeakage("optical element drives the state outside the OAM subspace");
  return StateVector::normalized(basis_, m_ * in.amplitudes());
}

OpticalOperator OpticalOperator::adjoint() const {
  return OpticalOperator(basis_, m_.adjoint());
}

OpticalOperator operator*(const OpticalOperator& a, const OpticalOperator& b) {
  if (a.basis_ != b.basis_) throw BasisMismatch("operators act on different mode lists");
  Eigen::MatrixXcd leak(a.leak_.rows() + b.leak_.rows(), b.dim());
  if (b.leak_.rows() > 0) leak.topRows(b.leak_.rows()) = b.leak_;
  if (a.leak_.rows() > 0) leak.bottomRows(a.leak_.rows()) = a.leak_ * b.m_;
  return OpticalOperator(a.basis_, a.m_ * b.m_, leak);
}

Eigen::Matrix2cd hwp_jones(double theta) {
  const double c = std::cos(2 * theta), s = std::sin(2 * theta);
  Eigen::Matrix2cd J;
  J << c, s, s, -c;
  return J;
}

Eigen::Matrix2cd qwp_jones(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2cd rot, rot_back, ret;
  rot << c, s, -s, c;
  rot_back << c, -s, s, c;
  ret << 1.0, 0.0, 0.0, kI;
  return rot_back * ret * rot;
}

OpticalOperator jones_element(const Eigen::Matrix2cd& jones, const std::vector<int>& oams) {
  const auto n = static_cast<Eigen::Index>(oams.size());
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) M.block<2, 2>(2 * i, 2 * i) = jones;
  return OpticalOperator(linear_modes(oams), M);
}

OpticalOperator hwp(double theta, const std::vector<int>& oams) {
  return jones_element(hwp_jones(theta), oams);
}

OpticalOperator qwp(double theta, const std::vector<int>& oams) {
  return jones_element(qwp_jones(theta), oams);
}

OpticalOperator qplate(double q, const std::vector<int>& oams) {
  const double twoq = 2.0 * q;
  if (std::abs(twoq - std::round(twoq)) > 1e-12 || twoq == 0.0)
    throw std::invalid_argument("q-plate charge must be a non-zero half-integer");
  const int shift = static_cast<int>(std::lround(twoq));

  ModeBasis circ = circular_modes(oams);
  const auto n = static_cast<Eigen::Index>(circ.size());
  Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(n, n);
  std::vector<Eigen::Index> leaky;
  auto index_of = [&](const ModeIndex& m) -> Eigen::Index {
    auto it = std::find(circ.begin(), circ.end(), m);
    return it == circ.end() ? -1 : it - circ.begin();
  };
  for (Eigen::Index c = 0; c < n; ++c) {
    const ModeIndex& in = circ[c];
    ModeIndex out = in.pol == Polarization::L ? ModeIndex{Polarization::R, in.oam + shift}
                                              : ModeIndex{Polarization::L, in.oam - shift};
    Eigen::Index r = index_of(out);
    if (r < 0)
      leaky.push_back(c);
    else
      Q(r, c) = 1.0;
  }

  // Move to the linear frame shared by the waveplates.
  ModeBasis lin = linear_modes(oams);
  Eigen::MatrixXcd C = frame_matrix(circ, oams);  // circular -> linear, unitary
  Eigen::MatrixXcd M = C * Q * C.adjoint();
  Eigen::MatrixXcd leak(static_cast<Eigen::Index>(leaky.size()), n);
  for (std::size_t i = 0; i < leaky.size(); ++i)
    leak.row(static_cast<Eigen::Index>(i)) = C.col(leaky[i]).adjoint();
  return OpticalOperator(lin, M, leak);
}

bool equal_up_to_phase(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  Eigen::Index r = 0, c = 0;
  b.cwiseAbs().maxCoeff(&r, &c);
  if (std::abs(b(r, c)) == 0.0) return a.cwiseAbs().maxCoeff() <= tol;
  cplx phase = a(r, c) / b(r, c);
  if (std::abs(std::abs(phase) - 1.0) > tol) return false;
  return (a - phase * b).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace hdqkd
