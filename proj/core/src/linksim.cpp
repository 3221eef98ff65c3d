#include "hdqkd/linksim.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hdqkd/parallel.hpp"
#include "hdqkd/rng.hpp"

namespace hdqkd {

namespace {

double db_to_efficiency(double db) { return std::pow(10.0, -db / 10.0); }

std::int64_t poisson(double mean, std::mt19937_64& rng) {
  if (!(mean > 0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

}  // namespace

double LinkBudget::signal_efficiency() const { return db_to_efficiency(signal_loss_db); }
double LinkBudget::idler_efficiency() const { return db_to_efficiency(idler_loss_db); }

double LinkBudget::intrinsic_error(int d) const {
  const double q = d == 2 ? lab_qber_d2 : lab_qber_d4;
  return std::clamp(q * d / (d - 1.0), 0.0, 1.0);
}

void LinkBudget::validate() const {
  if (signal_loss_db < 0 || idler_loss_db < 0 || source_coincidence_rate < 0 || signal_singles_rate < 0 ||
      idler_singles_rate < 0 || dark_rate < 0 || lab_qber_d2 < 0 || lab_qber_d4 < 0 || coupling_waist <= 0 ||
      wander_correlation_time < 0 || rx_aperture < 0)
    throw std::invalid_argument("link budget entries must be non-negative");
  if (!(coincidence_window > 0)) throw std::invalid_argument("coincidence window must be positive");
  if (!(bin_duration > 0)) throw std::invalid_argument("bin duration must be positive");
}

LinkBudget reference_budget() { return LinkBudget{}; }

double accidental_rate(double r_signal, double r_idler, double tau) {
  if (r_signal < 0 || r_idler < 0 || tau < 0) throw std::invalid_argument("rates must be non-negative");
  return r_signal * r_idler * tau;
}

double turbulence_crosstalk(const LinkBudget& b, const TurbulenceParams& t) {
  return 1.0 - std::exp(-aberration_scatter_fraction(b.rx_aperture, t.fried));
}

CountRecord simulate_bin(const StateVector& sent, const StateVector& projector, int d, const LinkBudget& b,
                         const BinChannel& ch, std::mt19937_64& rng) {
  const double overlap = born_probability(sent, projector);
  const double keep = (1.0 - b.intrinsic_error(d)) * (1.0 - ch.crosstalk);
  const double pi_eff = keep * overlap + (1.0 - keep) / d;
  const double r2 = ch.dx * ch.dx + ch.dy * ch.dy;
  const double eta = std::exp(-r2 / (b.coupling_waist * b.coupling_waist));
  const double es = b.signal_efficiency(), ei = b.idler_efficiency();

  const double signal = b.signal_singles_rate * es * eta * pi_eff + b.dark_rate;
  const double idler = b.idler_singles_rate * ei * eta + b.dark_rate;
  const double trues = b.source_coincidence_rate * es * ei * eta * eta * pi_eff;
  const double acc_signal =
      b.accidentals == AccidentalModel::ProjectedSingles ? signal : b.signal_singles_rate * es * eta / d + b.dark_rate;
  const double acc = accidental_rate(acc_signal, idler, b.coincidence_window);

  const double t = b.bin_duration;
  CountRecord r;
  r.bin_duration = t;
  const std::int64_t true_counts = poisson(trues * t, rng);
  r.coincidences = true_counts + poisson(acc * t, rng);
  r.signal_singles = true_counts + poisson(std::max(signal - trues, 0.0) * t, rng);
  r.idler_singles = true_counts + poisson(std::max(idler - trues, 0.0) * t, rng);
  r.coincidences = std::min({r.coincidences, r.signal_singles, r.idler_singles});
  return r;
}

CountRecord simulate_bin(const StateVector& sent, const StateVector& projector, int d, const LinkBudget& b,
                         const std::optional<TurbulenceParams>& turb, std::mt19937_64& rng) {
  BinChannel ch;
  if (turb) {
    std::normal_distribution<double> g(0.0, std::sqrt(turb->wander_sigma2));
    ch.dx = g(rng);
    ch.dy = g(rng);
    ch.crosstalk = turbulence_crosstalk(b, *turb);
  }
  return simulate_bin(sent, projector, d, b, ch, rng);
}

std::vector<CountRecord> run_protocol(const MubSet& mubs, const LinkBudget& b,
                                      const std::optional<TurbulenceParams>& turb, int bins_per_setting,
                                      std::uint64_t seed, unsigned threads) {
  b.validate();
  if (bins_per_setting < 1) throw std::invalid_argument("bins per setting must be >= 1");
  const int d = mubs.dim();
  auto labels = published_label_order(d);
  const std::size_t n = labels.size();
  const std::size_t bins = static_cast<std::size_t>(bins_per_setting);
  std::vector<CountRecord> out(n * n * bins);

  const double sigma = turb ? std::sqrt(turb->wander_sigma2) : 0.0;
  const double rho = (turb && b.wander_correlation_time > 0) ? std::exp(-b.bin_duration / b.wander_correlation_time) : 0.0;
  const double innov = std::sqrt(1.0 - rho * rho);
  const double xt = turb ? turbulence_crosstalk(b, *turb) : 0.0;

  parallel_for(n * n, threads, [&](std::size_t s) {
    const StateLabel& sent = labels[s / n];
    const StateLabel& proj = labels[s % n];
    const StateVector& vs = mubs.state(sent);
    const StateVector& vp = mubs.state(proj);
    BinChannel ch;
    ch.crosstalk = xt;
    for (std::size_t k = 0; k < bins; ++k) {
      auto rng = make_stream(seed, s * bins + k);
      if (turb) {
        std::normal_distribution<double> g(0.0, sigma);
        if (k == 0) {
          ch.dx = g(rng);
          ch.dy = g(rng);
        } else {
          ch.dx = rho * ch.dx + innov * g(rng);
          ch.dy = rho * ch.dy + innov * g(rng);
        }
      }
      CountRecord r = simulate_bin(vs, vp, d, b, ch, rng);
      r.sent = sent;
      r.projector = proj;
      r.bin = static_cast<int>(k);
      out[s * bins + k] = r;
    }
  });
  return out;
}

std::vector<CountRecord> target_correction(const std::vector<CountRecord>& records, const CorrectionOptions& opt) {
  using Key = std::pair<StateLabel, StateLabel>;
  std::map<Key, std::vector<double>> per_setting;
  std::vector<double> all;
  for (const auto& r : records) {
    per_setting[{r.sent, r.projector}].push_back(static_cast<double>(r.idler_singles));
    all.push_back(static_cast<double>(r.idler_singles));
  }
  const double run_median = median(all);
  std::map<Key, double> ref;
  for (auto& [k, v] : per_setting)
    ref[k] = opt.reference == CorrectionReference::RunMedian ? run_median : median(v);

  std::vector<CountRecord> out;
  std::map<Key, int> kept;
  for (const auto& r : records) {
    const Key k{r.sent, r.projector};
    kept.try_emplace(k, 0);
    const double m = ref[k];
    const double idler = static_cast<double>(r.idler_singles);
    if (idler <= 0.0 || idler < opt.discard_floor * m) continue;
    CountRecord c = r;
    if (opt.mode == CorrectionMode::Rescale) c.weight = r.weight * m / idler;
    out.push_back(c);
    ++kept[k];
  }
  for (const auto& [k, n] : kept)
    if (n == 0)
      throw TurbulenceTooSevere("turbulence too severe for correction: every bin of " + to_string(k.first) + "->" +
                                to_string(k.second) + " was discarded");
  return out;
}

DetectionMatrix build_detection_matrix(const std::vector<CountRecord>& records, Provenance provenance) {
  if (records.empty()) throw std::invalid_argument("no records");
  const bool d2 = records.front().sent.family == MubFamily::Zeta || records.front().sent.family == MubFamily::Xi;
  const int d = d2 ? 2 : 4;
  auto labels = published_label_order(d);
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXi cnt = Eigen::MatrixXi::Zero(n, n);
  auto index = [&](const StateLabel& l) {
    auto it = std::find(labels.begin(), labels.end(), l);
    if (it == labels.end()) throw std::invalid_argument("record label " + to_string(l) + " does not fit d=" + std::to_string(d));
    return it - labels.begin();
  };
  for (const auto& r : records) {
    const auto i = index(r.sent), j = index(r.projector);
    sum(i, j) += r.weight * static_cast<double>(r.coincidences);
    cnt(i, j) += 1;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (cnt(i, j) == 0)
        throw std::invalid_argument("empty setting " + to_string(labels[static_cast<std::size_t>(i)]) + "->" +
                                    to_string(labels[static_cast<std::size_t>(j)]));
      sum(i, j) /= cnt(i, j);
    }
  return DetectionMatrix(labels, labels, sum, provenance).block_normalized();
}

}  // namespace hdqkd
