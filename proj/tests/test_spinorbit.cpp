#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hdqkd/spinorbit.hpp"

using namespace hdqkd;

namespace {

const double kR = 1.0 / std::sqrt(2.0);

StateVector random_state(const ModeBasis& b, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd a(static_cast<Eigen::Index>(b.size()));
  for (auto& x : a) x = cplx(g(rng), g(rng));
  return StateVector::normalized(b, a);
}

// Fidelity against a state written directly in (H, V) amplitudes at one OAM.
double fid_hv(const StateVector& s, cplx h, cplx v, int oam = 0) {
  ModeBasis b{{Polarization::H, oam}, {Polarization::V, oam}};
  return fidelity(s, StateVector::normalized(b, Eigen::Vector2cd(h, v)));
}

}  // namespace

TEST(CircularBasis, HorizontalSplitsEvenly) {
  auto h = StateVector::mode({{Polarization::H, 2}, {Polarization::V, 2}}, {Polarization::H, 2});
  auto c = circular_basis_change(h);
  EXPECT_NEAR(std::abs(c.amplitude({Polarization::L, 2}) - kR), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(c.amplitude({Polarization::R, 2}) - kR), 0.0, 1e-12);
  EXPECT_NEAR(c.amplitudes().norm(), 1.0, 1e-12);
}

TEST(CircularBasis, VerticalCarriesMinusI) {
  auto v = StateVector::mode({{Polarization::H, 1}, {Polarization::V, 1}}, {Polarization::V, 1});
  auto c = circular_basis_change(v);
  EXPECT_NEAR(std::abs(c.amplitude({Polarization::L, 1}) - cplx(0, -kR)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(c.amplitude({Polarization::R, 1}) - cplx(0, kR)), 0.0, 1e-12);
}

TEST(CircularBasis, CircularInputUnchanged) {
  ModeBasis b{{Polarization::L, 1}, {Polarization::R, 1}};
  auto l = StateVector::mode(b, {Polarization::L, 1});
  auto c = circular_basis_change(l);
  EXPECT_EQ(c.basis_order(), b);
  EXPECT_NEAR(std::abs(c.amplitude({Polarization::L, 1}) - 1.0), 0.0, 1e-12);
}

TEST(HalfWavePlate, ReferenceAngles) {
  auto space = std::vector<int>{0};
  auto h = StateVector::mode(linear_modes(space), {Polarization::H, 0});
  EXPECT_NEAR(fid_hv(hwp(0.0, space).apply(h), 1, 0), 1.0, 1e-12);
  EXPECT_NEAR(fid_hv(hwp(45 * kDeg, space).apply(h), 0, 1), 1.0, 1e-12);
  EXPECT_NEAR(fid_hv(hwp(22.5 * kDeg, space).apply(h), kR, kR), 1.0, 1e-12);
}

TEST(HalfWavePlate, MatchesHandWrittenJones) {
  for (double deg : {-67.0, -10.0, 13.0, 30.0, 81.0}) {
    const double t = deg * kDeg;
    Eigen::Matrix2cd j;
    j << std::cos(2 * t), std::sin(2 * t), std::sin(2 * t), -std::cos(2 * t);
    EXPECT_LT((hwp_jones(t) - j).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(HalfWavePlate, SquaresToIdentityUpToPhase) {
  auto space = std::vector<int>{-1, 0, 1};
  for (int k = 0; k < 100; ++k) {
    const double t = -kPi + 2 * kPi * k / 100.0;
    auto u = hwp(t, space);
    EXPECT_TRUE(u.unitary());
    EXPECT_TRUE(equal_up_to_phase((u * u).matrix(), Eigen::MatrixXcd::Identity(6, 6)));
  }
}

TEST(QuarterWavePlate, ReferenceAngles) {
  auto space = std::vector<int>{0};
  auto h = StateVector::mode(linear_modes(space), {Polarization::H, 0});
  EXPECT_NEAR(fid_hv(qwp(0.0, space).apply(h), 1, 0), 1.0, 1e-12);
  // Documented convention: QWP at +45 deg turns |H> into |R> = (|H> - i|V>)/sqrt2.
  EXPECT_NEAR(fid_hv(qwp(45 * kDeg, space).apply(h), kR, cplx(0, -kR)), 1.0, 1e-12);
  EXPECT_NEAR(fid_hv(qwp(-45 * kDeg, space).apply(h), kR, cplx(0, kR)), 1.0, 1e-12);
}

TEST(QuarterWavePlate, Compositions) {
  auto space = std::vector<int>{0};
  auto q = qwp(45 * kDeg, space);
  EXPECT_TRUE(q.unitary());
  // Two quarter-wave plates with parallel axes make a half-wave plate ...
  EXPECT_TRUE(equal_up_to_phase((q * q).matrix(), hwp(45 * kDeg, space).matrix()));
  // ... while crossed axes cancel.
  EXPECT_TRUE(equal_up_to_phase((qwp(-45 * kDeg, space) * q).matrix(), Eigen::MatrixXcd::Identity(2, 2)));
}

TEST(QPlate, ChargeOneRaisesLeftToRightPlusTwo) {
  auto space = std::vector<int>{-2, 0, 2};
  ModeBasis lr{{Polarization::L, 0}, {Polarization::R, 0}};
  auto out = qplate(1.0, space).apply(StateVector::mode(lr, {Polarization::L, 0}));
  auto target = StateVector::mode(circular_modes(space), {Polarization::R, 2});
  EXPECT_NEAR(fidelity(target, out), 1.0, 1e-12);
}

TEST(QPlate, HalfChargeLowersRightToLeftMinusOne) {
  auto space = std::vector<int>{-1, 0, 1};
  ModeBasis lr{{Polarization::L, 0}, {Polarization::R, 0}};
  auto out = qplate(0.5, space).apply(StateVector::mode(lr, {Polarization::R, 0}));
  auto target = StateVector::mode(circular_modes(space), {Polarization::L, -1});
  EXPECT_NEAR(fidelity(target, out), 1.0, 1e-12);
}

TEST(QPlate, IsometryOnItsDomain) {
  auto space = std::vector<int>{-1, 0, 1};
  auto qp = qplate(0.5, space);
  EXPECT_TRUE(qp.has_leaky_inputs());
  EXPECT_FALSE(qp.unitary());
  // Domain: every mode that stays inside {-1,0,1}, i.e. L at -1,0 and R at 0,+1.
  ModeBasis domain{{Polarization::L, -1}, {Polarization::L, 0}, {Polarization::R, 0}, {Polarization::R, 1}};
  Eigen::MatrixXcd g = (qp.adjoint() * qp).matrix();
  for (const auto& m : domain) {
    auto s = StateVector::mode(domain, m).in_basis(qp.basis());
    Eigen::VectorXcd back = g * s.amplitudes();
    EXPECT_LT((back - s.amplitudes()).norm(), 1e-12);
    EXPECT_NEAR(qp.apply(s).amplitudes().norm(), 1.0, 1e-12);
  }
}

TEST(QPlate, LeakageIsAnError) {
  auto space = std::vector<int>{-1, 0, 1};
  ModeBasis b{{Polarization::L, 1}, {Polarization::R, 1}};
  auto leaky = StateVector::mode(b, {Polarization::L, 1});  // would go to |R,+2>
  EXPECT_THROW(qplate(0.5, space).apply(leaky), SubspaceLeakage);
}

TEST(QPlate, RejectsNonHalfIntegerCharge) {
  EXPECT_THROW(qplate(0.3, {0, 1}), std::invalid_argument);
}

TEST(StateVectorTest, Invariants) {
  ModeBasis b{{Polarization::H, 1}, {Polarization::V, 1}};
  EXPECT_THROW(StateVector(b, Eigen::Vector2cd(1.0, 1.0)), InvalidState);
  ModeBasis dup{{Polarization::H, 1}, {Polarization::H, 1}};
  EXPECT_THROW(StateVector(dup, Eigen::Vector2cd(1.0, 0.0)), InvalidState);
  ModeBasis other{{Polarization::H, 2}};
  EXPECT_THROW(StateVector::mode(b, {Polarization::H, 1}).in_basis(other), SubspaceLeakage);
}

TEST(BornProbability, Basics) {
  ModeBasis b = linear_modes({-1, 1});
  auto h = StateVector::mode(b, {Polarization::H, 1});
  auto v = StateVector::mode(b, {Polarization::V, 1});
  EXPECT_NEAR(born_probability(h, h), 1.0, 1e-15);
  EXPECT_NEAR(born_probability(h, v), 0.0, 1e-15);
  EXPECT_THROW(born_probability(h, StateVector::mode(circular_modes({-1, 1}), {Polarization::L, 1})), BasisMismatch);
}

TEST(BornProbability, SymmetricAndComplete) {
  std::mt19937_64 rng(7);
  ModeBasis b = linear_modes({-2, 0, 2});
  for (int t = 0; t < 50; ++t) {
    auto a = random_state(b, rng), c = random_state(b, rng);
    EXPECT_NEAR(born_probability(a, c), born_probability(c, a), 1e-14);
    double total = 0;
    for (const auto& m : b) total += born_probability(a, StateVector::mode(b, m));
    EXPECT_NEAR(total, 1.0, 1e-12);
    // completeness also holds in a rotated (circular) basis
    ModeBasis cb = circular_modes({-2, 0, 2});
    double total_c = 0;
    for (const auto& m : cb) total_c += fidelity(a, StateVector::mode(cb, m));
    EXPECT_NEAR(total_c, 1.0, 1e-12);
  }
}

TEST(Fidelity, IgnoresGlobalPhase) {
  ModeBasis b = linear_modes({0});
  auto s = StateVector::normalized(b, Eigen::Vector2cd(0.6, cplx(0, 0.8)));
  auto t = StateVector(b, s.amplitudes() * std::polar(1.0, 1.234));
  EXPECT_NEAR(fidelity(s, t), 1.0, 1e-14);
}
