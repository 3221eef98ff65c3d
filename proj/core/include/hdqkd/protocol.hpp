#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdqkd/detection_matrix.hpp"

namespace hdqkd {

struct UnnormalizedMatrix : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Published matrices carry three decimals, so their block rows sum to 1 only
// to a few parts in a thousand.
inline constexpr double kPublishedRowTolerance = 5e-3;

struct QberReport {
  int d = 0;
  double q = 0.0;
  std::array<double, 2> q_basis{};
  Provenance provenance = Provenance::Raw;
};

enum class KeyRateMethod { Analytic, DualNumeric };

struct KeyRate {
  int d = 0;
  double q = 0.0;
  double r = 0.0;  // bits per sifted photon
  KeyRateMethod method = KeyRateMethod::Analytic;
};

// Q = 1 - mean of the diagonals of both same-basis blocks.
QberReport qber(const DetectionMatrix& m, double row_tolerance = kPublishedRowTolerance);

// h_d(Q) = -Q log2(Q/(d-1)) - (1-Q) log2(1-Q), for Q in [0, (d-1)/d].
double entropy_d(double q, int d);

KeyRate key_rate_analytic(double q, int d);

// Root of R(Q) = 0 on [0, (d-1)/d].
double threshold_q0(int d);

// Tolerable error rate with two-way classical post-processing in d=4.
double two_way_threshold_d4();

struct SymbolPair {
  int alice = 0;
  int bob = 0;
};

struct SiftResult {
  std::vector<SymbolPair> pairs;
  double ratio = 0.0;
  double error_rate() const;
};

SiftResult sift(const std::vector<int>& alice_bases, const std::vector<int>& bob_bases,
                const std::vector<SymbolPair>& outcomes);

// Random-basis exchange through the confusion channel a detection matrix
// describes: Alice and Bob pick bases and Alice a symbol uniformly; Bob's
// outcome is drawn from the matrix row restricted to his basis.
struct Exchange {
  std::vector<int> alice_bases, bob_bases;
  std::vector<SymbolPair> outcomes;
};
Exchange simulate_exchange(const DetectionMatrix& m, std::size_t n, std::uint64_t seed);

nlohmann::json to_json(const QberReport& r);
nlohmann::json to_json(const KeyRate& k);
std::string to_string(KeyRateMethod m);
std::string format_table(const QberReport& r, const std::vector<KeyRate>& rates);

}  // namespace hdqkd
