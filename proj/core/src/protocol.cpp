#include "hdqkd/protocol.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "hdqkd/rng.hpp"

namespace hdqkd {

QberReport qber(const DetectionMatrix& m, double row_tolerance) {
  const double dev = m.max_block_row_deviation();
  if (dev > row_tolerance) {
    std::ostringstream os;
    os << "detection matrix is not normalized: block row sums deviate by " << dev;
    throw UnnormalizedMatrix(os.str());
  }
  QberReport r;
  r.d = m.dim();
  r.provenance = m.provenance();
  double total = 0.0;
  for (int b = 0; b < 2; ++b) {
    const double diag = m.block(b, b).diagonal().sum();
    r.q_basis[static_cast<std::size_t>(b)] = 1.0 - diag / m.dim();
    total += diag;
  }
  r.q = 1.0 - total / (2.0 * m.dim());
  return r;
}

double entropy_d(double q, int d) {
  if (d < 2) throw std::invalid_argument("entropy_d needs d >= 2");
  const double qmax = (d - 1.0) / d;
  if (!(q >= 0.0) || q > qmax + 1e-12) throw std::domain_error("Q outside [0, (d-1)/d]");
  double h = 0.0;
  if (q > 0) h -= q * std::log2(q / (d - 1));
  if (q < 1) h -= (1 - q) * std::log2(1 - q);
  return h;
}

KeyRate key_rate_analytic(double q, int d) {
  return {d, q, std::log2(static_cast<double>(d)) - 2.0 * entropy_d(q, d), KeyRateMethod::Analytic};
}

double threshold_q0(int d) {
  if (d != 2 && d != 4) throw std::invalid_argument("threshold_q0 supports d=2 and d=4");
  double lo = 0.0, hi = (d - 1.0) / d;
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (key_rate_analytic(mid, d).r > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double two_way_threshold_d4() { return 0.315; }

double SiftResult::error_rate() const {
  if (pairs.empty()) return 0.0;
  std::size_t bad = 0;
  for (const auto& p : pairs) bad += p.alice != p.bob;
  return static_cast<double>(bad) / static_cast<double>(pairs.size());
}

SiftResult sift(const std::vector<int>& alice_bases, const std::vector<int>& bob_bases,
                const std::vector<SymbolPair>& outcomes) {
  if (alice_bases.size() != bob_bases.size() || alice_bases.size() != outcomes.size())
    throw std::invalid_argument("sift inputs differ in length");
  SiftResult r;
  for (std::size_t i = 0; i < outcomes.size(); ++i)
    if (alice_bases[i] == bob_bases[i]) r.pairs.push_back(outcomes[i]);
  r.ratio = outcomes.empty() ? 0.0 : static_cast<double>(r.pairs.size()) / static_cast<double>(outcomes.size());
  return r;
}

Exchange simulate_exchange(const DetectionMatrix& m, std::size_t n, std::uint64_t seed) {
  const int d = m.dim();
  Eigen::MatrixXd blocks[2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) blocks[a][b] = m.block(a, b);
  auto rng = make_stream(seed, 0);
  std::uniform_int_distribution<int> coin(0, 1), sym(0, d - 1);
  Exchange ex;
  ex.alice_bases.reserve(n);
  ex.bob_bases.reserve(n);
  ex.outcomes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int ab = coin(rng), bb = coin(rng), s = sym(rng);
    const Eigen::VectorXd row = blocks[ab][bb].row(s);
    std::discrete_distribution<int> out(row.data(), row.data() + d);
    ex.alice_bases.push_back(ab);
    ex.bob_bases.push_back(bb);
    ex.outcomes.push_back({s, out(rng)});
  }
  return ex;
}

std::string to_string(KeyRateMethod m) {
  return m == KeyRateMethod::Analytic ? "analytic" : "dual_numeric";
}

nlohmann::json to_json(const QberReport& r) {
  return {{"d", r.d}, {"Q", r.q}, {"Q_basis", r.q_basis}, {"provenance", to_string(r.provenance)}};
}

nlohmann::json to_json(const KeyRate& k) {
  return {{"d", k.d}, {"Q", k.q}, {"R_bits_per_sifted_photon", k.r}, {"method", to_string(k.method)}};
}

std::string format_table(const QberReport& r, const std::vector<KeyRate>& rates) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(22) << "quantity" << std::right << std::setw(10) << "value" << '\n';
  auto line = [&](const std::string& k, double v) { os << std::left << std::setw(22) << k << std::right << std::setw(10) << v << '\n'; };
  os << std::left << std::setw(22) << "d" << std::right << std::setw(10) << r.d << '\n';
  line("Q", r.q);
  line("Q (basis 1)", r.q_basis[0]);
  line("Q (basis 2)", r.q_basis[1]);
  for (const auto& k : rates) line("R " + to_string(k.method), k.r);
  return os.str();
}

}  // namespace hdqkd
