#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hdqkd/detection_matrix.hpp"
#include "hdqkd/mubs.hpp"
#include "hdqkd/turbulence.hpp"

namespace hdqkd {

// How accidental coincidences are spread over Bob's projectors.
//  ProjectedSingles: tau * (projected signal singles) * idler singles, so
//                    accidentals follow the same projection statistics.
//  Uniform:          tau * (unprojected signal singles / d) * idler singles
//                    for every projector.
enum class AccidentalModel { ProjectedSingles, Uniform };

struct LinkBudget {
  double signal_loss_db = 7.0;
  double idler_loss_db = 6.0;
  double source_coincidence_rate = 1.0e6;  // Hz
  double signal_singles_rate = 4.0e6;  // Hz, at the source
  double idler_singles_rate = 10.0e6;  // Hz, at the source
  double coincidence_window = 5.0e-9;  // s
  double dark_rate = 500.0;  // Hz per detector
  AccidentalModel accidentals = AccidentalModel::ProjectedSingles;

  // Preparation/measurement imperfection expressed as the QBER the setup
  // shows without a link. Converted to a depolarizing weight lab_qber*d/(d-1).
  double lab_qber_d2 = 0.0083;
  double lab_qber_d4 = 0.0183;

  double coupling_waist = 2.0e-3;  // m, w_c in eta = exp(-|D|^2/w_c^2)
  double wander_correlation_time = 10.0;  // s; 0 makes bins independent
  double rx_aperture = 0.04;  // m, receive aperture for higher-order scatter
  double bin_duration = 0.2;  // s

  double signal_efficiency() const;  // from signal_loss_db
  double idler_efficiency() const;
  double intrinsic_error(int d) const;
  void validate() const;
};

LinkBudget reference_budget();

double accidental_rate(double r_signal, double r_idler, double tau);

// Probability that turbulence scatters a photon out of its prepared mode
// into the uniform background, from the tilt-removed residual phase variance.
double turbulence_crosstalk(const LinkBudget& b, const TurbulenceParams& t);

struct CountRecord {
  StateLabel sent;
  StateLabel projector;
  int bin = 0;
  double bin_duration = 0.2;
  std::int64_t coincidences = 0;
  std::int64_t signal_singles = 0;
  std::int64_t idler_singles = 0;
  double weight = 1.0;  // set by target correction
};

// Channel state seen by one bin.
struct BinChannel {
  double dx = 0.0, dy = 0.0;  // common signal/idler centroid displacement, m
  double crosstalk = 0.0;
};

CountRecord simulate_bin(const StateVector& sent, const StateVector& projector, int d,
                         const LinkBudget& b, const BinChannel& ch, std::mt19937_64& rng);

// Draws an independent stationary wander sample for the bin.
CountRecord simulate_bin(const StateVector& sent, const StateVector& projector, int d,
                         const LinkBudget& b, const std::optional<TurbulenceParams>& turb,
                         std::mt19937_64& rng);

// Every (sent, projector) pair over both bases, bins_per_setting records each.
// Within a setting the wander follows a stationary Gauss-Markov chain with
// correlation time b.wander_correlation_time; bin k of setting s draws from
// make_stream(seed, s * bins + k).
std::vector<CountRecord> run_protocol(const MubSet& mubs, const LinkBudget& b,
                                      const std::optional<TurbulenceParams>& turb,
                                      int bins_per_setting, std::uint64_t seed,
                                      unsigned threads = 0);

struct TurbulenceTooSevere : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CorrectionMode { Rescale, DiscardOnly };
enum class CorrectionReference { RunMedian, SettingMedian };

struct CorrectionOptions {
  CorrectionMode mode = CorrectionMode::Rescale;
  CorrectionReference reference = CorrectionReference::RunMedian;
  double discard_floor = 0.2;  // fraction of the reference median
};

// Idler-referenced correction: bins whose idler singles fall below
// discard_floor * median are dropped; in Rescale mode the rest are weighted
// by median / idler singles.
std::vector<CountRecord> target_correction(const std::vector<CountRecord>& records,
                                           const CorrectionOptions& opt = {});

// Mean weighted coincidences per setting, block-normalized per sent state.
// Rows and columns follow published_label_order(d).
DetectionMatrix build_detection_matrix(const std::vector<CountRecord>& records,
                                       Provenance provenance = Provenance::Simulated);

}  // namespace hdqkd
