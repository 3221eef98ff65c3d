#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace hdqkd {

struct InvalidGrid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NoMeasurableTurbulence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All lengths in meters, cn2 in m^(-2/3).
struct TurbulenceParams {
  double cn2 = 0.0;
  double link_length = 0.0;
  double wavelength = 0.0;
  double beam_waist = 0.0;
  double fried = std::numeric_limits<double>::infinity();
  double wander_sigma2 = 0.0;  // per-axis centroid variance, m^2

  double wavenumber() const;
};

// Plane-wave Fried relation r0 = (0.423 k^2 Cn2 L)^(-3/5).
double r0_from_cn2(double cn2, double link_length, double wavelength);
double cn2_from_r0(double r0, double link_length, double wavelength);

// Tracked-wander variance per axis: 2.42 Cn2 L^3 w0^(-1/3).
double wander_sigma2(double cn2, double link_length, double beam_waist);
double wander_sigma2(const TurbulenceParams& p);

TurbulenceParams make_turbulence(double cn2, double link_length, double wavelength,
                                 double beam_waist);

struct CentroidSeries {
  std::vector<Eigen::Vector2d> samples;  // displacements, m
  double exposure_s = 0.0;
};

// Unbiased per-axis variance averaged over x and y, inverted through the
// wander formula and the Fried relation.
TurbulenceParams fried_from_centroids(const CentroidSeries& series, double link_length,
                                      double wavelength, double beam_waist);

// Two columns x,y in meters; '#' lines and a non-numeric header row are skipped.
CentroidSeries read_centroids_csv(std::istream& in);
void write_centroids_csv(std::ostream& out, const CentroidSeries& series);

struct PhaseScreen {
  int n = 0;
  double pitch = 0.0;  // m per pixel
  double r0 = 0.0;
  std::vector<double> phase;  // radians, row-major n*n

  double at(int row, int col) const { return phase[static_cast<std::size_t>(row) * n + col]; }
};

// FFT spectral filter with the Kolmogorov PSD 0.023 r0^(-5/3) f^(-11/3) plus
// three levels of 3x3 subharmonics. Piston is removed. Grids are expected to
// span several r0 for the low-order statistics to be meaningful; smaller grids
// are accepted because the subharmonics carry the tilt.
PhaseScreen kolmogorov_screen(double r0, int n, double pitch, std::mt19937_64& rng);

// Screen i of an ensemble is drawn from make_stream(seed, i).
std::vector<PhaseScreen> screen_ensemble(double r0, int n, double pitch, int count,
                                         std::uint64_t seed, unsigned threads = 0);

// Mean squared phase difference at each lag (pixels), averaged over x and y.
std::vector<double> structure_function(const PhaseScreen& s, const std::vector<int>& lags);

// Ensemble average of structure_function without keeping the screens.
std::vector<double> ensemble_structure_function(double r0, int n, double pitch, int count,
                                                std::uint64_t seed, const std::vector<int>& lags,
                                                unsigned threads = 0);

// 6.88 (r/r0)^(5/3)
double kolmogorov_structure(double r, double r0);

// Least-squares slope of log(y) against log(x).
double power_law_exponent(const std::vector<double>& x, const std::vector<double>& y);

// Phase variance left after tip/tilt removal over an aperture of diameter D.
double aberration_scatter_fraction(double aperture_diameter, double r0);

// exp(i l theta) ring with Gaussian envelope (r/w)^|l| exp(-r^2/w^2) on an
// n x n grid centred on the grid, unit norm over the full grid.
Eigen::VectorXcd ring_mode(int ell, double waist, int n, double pitch);

// C_ij = < |sum_A u_i^* e^{i phi} u_j dA|^2 > over the screens, with the modes
// orthonormalized over the aperture first.
Eigen::MatrixXd crosstalk_matrix(const std::vector<Eigen::VectorXcd>& modes,
                                 const std::vector<PhaseScreen>& screens, double aperture_radius);

// Flat binary export: text header then n*n little-endian float32.
void write_screen(std::ostream& out, const PhaseScreen& s);
PhaseScreen read_screen(std::istream& in);

}  // namespace hdqkd
