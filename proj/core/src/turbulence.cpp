#include "hdqkd/turbulence.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "hdqkd/conventions.hpp"
#include "hdqkd/parallel.hpp"
#include "hdqkd/rng.hpp"

namespace hdqkd {

namespace {

constexpr double kFriedConst = 0.423;
constexpr double kWanderConst = 2.42;
constexpr int kSubharmonicLevels = 3;
constexpr int kCellSamples = 32;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double kolmogorov_psd(double f, double r0) {
  return 0.023 * std::pow(r0, -5.0 / 3.0) * std::pow(f, -11.0 / 3.0);
}

// PSD averaged over a square frequency cell of width w centred at (fx, fy).
double cell_averaged_psd(double fx, double fy, double w, double r0) {
  double acc = 0.0;
  for (int a = 0; a < kCellSamples; ++a) {
    const double ox = ((a + 0.5) / kCellSamples - 0.5) * w;
    for (int b = 0; b < kCellSamples; ++b) {
      const double oy = ((b + 0.5) / kCellSamples - 0.5) * w;
      acc += kolmogorov_psd(std::hypot(fx + ox, fy + oy), r0);
    }
  }
  return acc / (kCellSamples * kCellSamples);
}

double fft_freq(int k, int n, double df) { return (k < n / 2 ? k : k - n) * df; }

}  // namespace

double TurbulenceParams::wavenumber() const { return 2.0 * kPi / wavelength; }

double r0_from_cn2(double cn2, double link_length, double wavelength) {
  if (cn2 < 0 || link_length <= 0 || wavelength <= 0)
    throw std::invalid_argument("r0_from_cn2 needs positive inputs");
  if (cn2 == 0.0) return std::numeric_limits<double>::infinity();
  const double k = 2.0 * kPi / wavelength;
  return std::pow(kFriedConst * k * k * cn2 * link_length, -3.0 / 5.0);
}

double cn2_from_r0(double r0, double link_length, double wavelength) {
  if (r0 <= 0 || link_length <= 0 || wavelength <= 0)
    throw std::invalid_argument("cn2_from_r0 needs positive inputs");
  if (std::isinf(r0)) return 0.0;
  const double k = 2.0 * kPi / wavelength;
  return std::pow(r0, -5.0 / 3.0) / (kFriedConst * k * k * link_length);
}

double wander_sigma2(double cn2, double link_length, double beam_waist) {
  if (cn2 < 0 || link_length <= 0 || beam_waist <= 0)
    throw std::invalid_argument("wander_sigma2 needs positive inputs");
  return kWanderConst * cn2 * std::pow(link_length, 3) * std::pow(beam_waist, -1.0 / 3.0);
}

double wander_sigma2(const TurbulenceParams& p) {
  return wander_sigma2(p.cn2, p.link_length, p.beam_waist);
}

TurbulenceParams make_turbulence(double cn2, double link_length, double wavelength,
                                 double beam_waist) {
  TurbulenceParams p;
  p.cn2 = cn2;
  p.link_length = link_length;
  p.wavelength = wavelength;
  p.beam_waist = beam_waist;
  p.fried = r0_from_cn2(cn2, link_length, wavelength);
  p.wander_sigma2 = wander_sigma2(cn2, link_length, beam_waist);
  return p;
}

TurbulenceParams fried_from_centroids(const CentroidSeries& series, double link_length,
                                      double wavelength, double beam_waist) {
  const auto n = series.samples.size();
  if (n < 2) throw std::invalid_argument("centroid series needs at least 2 samples");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& s : series.samples) mean += s;
  mean /= static_cast<double>(n);
  Eigen::Vector2d ss = Eigen::Vector2d::Zero();
  for (const auto& s : series.samples) ss += (s - mean).cwiseAbs2();
  const double var = 0.5 * (ss.x() + ss.y()) / static_cast<double>(n - 1);
  if (!(var > 0.0)) throw NoMeasurableTurbulence("no measurable turbulence: centroid variance is zero");
  const double cn2 =
      var / (kWanderConst * std::pow(link_length, 3) * std::pow(beam_waist, -1.0 / 3.0));
  return make_turbulence(cn2, link_length, wavelength, beam_waist);
}

CentroidSeries read_centroids_csv(std::istream& in) {
  CentroidSeries out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x = 0, y = 0;
    if (!(ls >> x >> y)) {
      if (out.samples.empty() && std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      throw std::invalid_argument("centroid CSV line " + std::to_string(lineno) +
                                  ": expected two numbers");
    }
    out.samples.emplace_back(x, y);
  }
  if (out.samples.empty()) throw std::invalid_argument("centroid CSV contains no samples");
  return out;
}

void write_centroids_csv(std::ostream& out, const CentroidSeries& series) {
  out << "# centroid displacements in meters\nx_m,y_m\n";
  out.precision(10);
  for (const auto& s : series.samples) out << s.x() << ',' << s.y() << '\n';
}

PhaseScreen kolmogorov_screen(double r0, int n, double pitch, std::mt19937_64& rng) {
  if (n < 2 || !std::has_single_bit(static_cast<unsigned>(n)))
    throw InvalidGrid("screen size must be a power of two");
  if (!(pitch > 0)) throw InvalidGrid("pixel pitch must be positive");
  if (!(r0 > 0)) throw InvalidGrid("r0 must be positive");

  PhaseScreen s;
  s.n = n;
  s.pitch = pitch;
  s.r0 = r0;
  s.phase.assign(static_cast<std::size_t>(n) * n, 0.0);
  if (std::isinf(r0)) return s;

  std::normal_distribution<double> g;
  const double df = 1.0 / (n * pitch);
  const std::size_t nn = static_cast<std::size_t>(n) * n;

  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nn));
  for (int i = 0; i < n; ++i) {
    const double fx = fft_freq(i, n, df);
    for (int j = 0; j < n; ++j) {
      const double fy = fft_freq(j, n, df);
      const std::size_t k = static_cast<std::size_t>(i) * n + j;
      const double a = g(rng), b = g(rng);
      const double amp = (i == 0 && j == 0) ? 0.0 : std::sqrt(kolmogorov_psd(std::hypot(fx, fy), r0)) * df;
      buf[k][0] = a * amp;
      buf[k][1] = b * amp;
    }
  }
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  for (std::size_t k = 0; k < nn; ++k) s.phase[k] = buf[k][0];
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);

  // Subharmonics: separable exponentials per level since fx, fy are on a 3x3 lattice.
  std::vector<std::complex<double>> ex(static_cast<std::size_t>(n)), ey(static_cast<std::size_t>(n));
  for (int p = 1; p <= kSubharmonicLevels; ++p) {
    const double dfp = df / std::pow(3.0, p);
    for (int u = -1; u <= 1; ++u) {
      for (int v = -1; v <= 1; ++v) {
        if (u == 0 && v == 0) continue;
        const double fx = u * dfp, fy = v * dfp;
        const double amp = std::sqrt(cell_averaged_psd(fx, fy, dfp, r0)) * dfp;
        const std::complex<double> c(g(rng) * amp, g(rng) * amp);
        for (int i = 0; i < n; ++i) {
          const double x = (i - n / 2) * pitch;
          ex[static_cast<std::size_t>(i)] = std::polar(1.0, 2 * kPi * fx * x);
          ey[static_cast<std::size_t>(i)] = std::polar(1.0, 2 * kPi * fy * x);
        }
        for (int i = 0; i < n; ++i) {
          const std::complex<double> ci = c * ex[static_cast<std::size_t>(i)];
          double* row = &s.phase[static_cast<std::size_t>(i) * n];
          for (int j = 0; j < n; ++j) row[j] += (ci * ey[static_cast<std::size_t>(j)]).real();
        }
      }
    }
  }

  const double mean = std::accumulate(s.phase.begin(), s.phase.end(), 0.0) / static_cast<double>(nn);
  for (auto& v : s.phase) v -= mean;
  return s;
}

std::vector<PhaseScreen> screen_ensemble(double r0, int n, double pitch, int count,
                                         std::uint64_t seed, unsigned threads) {
  std::vector<PhaseScreen> out(static_cast<std::size_t>(std::max(count, 0)));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    auto rng = make_stream(seed, i);
    out[i] = kolmogorov_screen(r0, n, pitch, rng);
  });
  return out;
}

std::vector<double> structure_function(const PhaseScreen& s, const std::vector<int>& lags) {
  std::vector<double> out;
  const int n = s.n;
  for (int r : lags) {
    if (r <= 0 || r >= n) throw std::invalid_argument("lag must lie in (0, n)");
    double dx = 0.0, dy = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j + r < n; ++j) {
        const double a = s.at(i, j + r) - s.at(i, j);
        const double b = s.at(j + r, i) - s.at(j, i);
        dx += a * a;
        dy += b * b;
      }
    }
    out.push_back(0.5 * (dx + dy) / (static_cast<double>(n) * (n - r)));
  }
  return out;
}

std::vector<double> ensemble_structure_function(double r0, int n, double pitch, int count,
                                                std::uint64_t seed, const std::vector<int>& lags,
                                                unsigned threads) {
  std::vector<std::vector<double>> per(static_cast<std::size_t>(count));
  parallel_for(per.size(), threads, [&](std::size_t i) {
    auto rng = make_stream(seed, i);
    per[i] = structure_function(kolmogorov_screen(r0, n, pitch, rng), lags);
  });
  std::vector<double> mean(lags.size(), 0.0);
  for (const auto& p : per)
    for (std::size_t k = 0; k < lags.size(); ++k) mean[k] += p[k];
  for (auto& m : mean) m /= count;
  return mean;
}

double kolmogorov_structure(double r, double r0) { return 6.88 * std::pow(r / r0, 5.0 / 3.0); }

double power_law_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double aberration_scatter_fraction(double aperture_diameter, double r0) {
  if (std::isinf(r0)) return 0.0;
  return 0.134 * std::pow(aperture_diameter / r0, 5.0 / 3.0);
}

Eigen::VectorXcd ring_mode(int ell, double waist, int n, double pitch) {
  Eigen::VectorXcd u(static_cast<Eigen::Index>(n) * n);
  const int al = std::abs(ell);
  for (int i = 0; i < n; ++i) {
    const double y = (i - n / 2 + 0.5) * pitch;
    for (int j = 0; j < n; ++j) {
      const double x = (j - n / 2 + 0.5) * pitch;
      const double r = std::hypot(x, y) / waist;
      u(static_cast<Eigen::Index>(i) * n + j) =
          std::pow(r, al) * std::exp(-r * r) * std::polar(1.0, ell * std::atan2(y, x));
    }
  }
  return u / (u.norm() * pitch);
}

Eigen::MatrixXd crosstalk_matrix(const std::vector<Eigen::VectorXcd>& modes,
                                 const std::vector<PhaseScreen>& screens, double aperture_radius) {
  if (modes.empty() || screens.empty()) throw std::invalid_argument("need modes and screens");
  const int n = screens.front().n;
  const double pitch = screens.front().pitch;
  const Eigen::Index npx = static_cast<Eigen::Index>(n) * n;
  for (const auto& s : screens)
    if (s.n != n || s.pitch != pitch) throw InvalidGrid("screens do not share one grid");
  for (const auto& m : modes)
    if (m.size() != npx) throw InvalidGrid("mode grid does not match screen grid");

  // Aperture-restricted modes, orthonormal under sum(...) * pitch^2.
  const auto k = static_cast<Eigen::Index>(modes.size());
  Eigen::MatrixXcd U(npx, k);
  for (Eigen::Index c = 0; c < k; ++c) U.col(c) = modes[static_cast<std::size_t>(c)] * pitch;
  for (int i = 0; i < n; ++i) {
    const double y = (i - n / 2 + 0.5) * pitch;
    for (int j = 0; j < n; ++j) {
      const double x = (j - n / 2 + 0.5) * pitch;
      if (std::hypot(x, y) > aperture_radius) U.row(static_cast<Eigen::Index>(i) * n + j).setZero();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(U);
  Eigen::MatrixXcd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  // Keep each mode's own phase: U = Q R, so Q = U R^-1 with Q orthonormal.
  Eigen::MatrixXcd Q = U * R.inverse();

  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXcd screen_phase(npx);
  for (const auto& s : screens) {
    for (Eigen::Index p = 0; p < npx; ++p) screen_phase(p) = std::polar(1.0, s.phase[static_cast<std::size_t>(p)]);
    Eigen::MatrixXcd T = Q.adjoint() * (screen_phase.asDiagonal() * Q);
    C += T.cwiseAbs2();
  }
  return C / static_cast<double>(screens.size());
}

void write_screen(std::ostream& out, const PhaseScreen& s) {
  out << "HDQKD-SCREEN v1\n";
  out.precision(17);
  out << "N " << s.n << "\npitch_m " << s.pitch << "\nr0_m " << s.r0 << "\nEND\n";
  std::vector<float> data(s.phase.begin(), s.phase.end());
  static_assert(std::endian::native == std::endian::little, "screen format is little-endian");
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
}

PhaseScreen read_screen(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "HDQKD-SCREEN v1") throw std::invalid_argument("not a screen file");
  PhaseScreen s;
  while (std::getline(in, line) && line != "END") {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "N") ls >> s.n;
    else if (key == "pitch_m") ls >> s.pitch;
    else if (key == "r0_m") ls >> s.r0;
    else throw std::invalid_argument("unknown screen header key '" + key + "'");
  }
  if (s.n <= 0) throw std::invalid_argument("screen header lacks N");
  std::vector<float> data(static_cast<std::size_t>(s.n) * s.n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(float)))
    throw std::invalid_argument("screen data truncated");
  s.phase.assign(data.begin(), data.end());
  return s;
}

}  // namespace hdqkd
