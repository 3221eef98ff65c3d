#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hdqkd/detection_matrix.hpp"
#include "hdqkd/protocol.hpp"

namespace hdqkd {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major
};

struct SymbolImage {
  int width = 0;
  int height = 0;
  int d = 2;
  std::vector<std::uint8_t> symbols;  // 3 per pixel
};

struct KeyStream {
  int d = 2;
  std::vector<std::uint8_t> symbols;
  std::uint64_t seed = 0;
  std::string source;  // "prng" or "sift"
};

// v -> floor(v d / 256); render maps s -> round((s + 0.5) 256 / d).
SymbolImage discretize(const RgbImage& img, int d);
RgbImage render(const SymbolImage& img);

KeyStream make_key(std::size_t length, int d, std::uint64_t seed);
// Alice's sifted symbols reused as key material; throws if there are too few.
KeyStream key_from_sift(const SiftResult& sifted, std::size_t length, int d);

SymbolImage encrypt(const SymbolImage& img, const KeyStream& key);
SymbolImage decrypt(const SymbolImage& img, const KeyStream& key);

struct ChannelOptions {
  std::optional<int> fixed_basis;  // otherwise a uniformly random basis per symbol
  unsigned threads = 0;
};

// Resamples every symbol from the matrix's same-basis block row for that
// symbol. Symbol i uses counter-hashed draws of (seed, i), so output does not
// depend on the thread count.
SymbolImage channel_corrupt(const SymbolImage& img, const DetectionMatrix& m, std::uint64_t seed,
                            const ChannelOptions& opt = {});

double symbol_error_rate(const SymbolImage& a, const SymbolImage& b);
// Row-normalized empirical confusion: (i, j) = P(received j | sent i).
Eigen::MatrixXd empirical_confusion(const SymbolImage& sent, const SymbolImage& received);

RgbImage read_ppm(std::istream& in);
void write_ppm(std::ostream& out, const RgbImage& img);
void write_key(std::ostream& out, const KeyStream& key);

// Smooth colour gradient used when the demo has no input image.
RgbImage test_pattern(int width, int height);

}  // namespace hdqkd
