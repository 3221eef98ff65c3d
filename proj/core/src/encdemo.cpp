#include "hdqkd/encdemo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include "hdqkd/parallel.hpp"
#include "hdqkd/rng.hpp"

namespace hdqkd {

namespace {

void check_d(int d) {
  if (d != 2 && d != 4) throw std::invalid_argument("alphabet size must be 2 or 4");
}

void check_pair(const SymbolImage& img, const KeyStream& key) {
  if (img.d != key.d) throw std::invalid_argument("image and key use different alphabets");
  if (img.symbols.size() != key.symbols.size()) throw std::invalid_argument("key length does not match image");
}

SymbolImage shift(const SymbolImage& img, const KeyStream& key, int sign) {
  check_pair(img, key);
  SymbolImage out = img;
  for (std::size_t i = 0; i < out.symbols.size(); ++i)
    out.symbols[i] = static_cast<std::uint8_t>(((img.symbols[i] + sign * key.symbols[i]) % img.d + img.d) % img.d);
  return out;
}

}  // namespace

SymbolImage discretize(const RgbImage& img, int d) {
  check_d(d);
  SymbolImage s{img.width, img.height, d, {}};
  s.symbols.reserve(img.data.size());
  for (auto v : img.data) s.symbols.push_back(static_cast<std::uint8_t>(v * d / 256));
  return s;
}

RgbImage render(const SymbolImage& img) {
  RgbImage out{img.width, img.height, {}};
  out.data.reserve(img.symbols.size());
  for (auto s : img.symbols) {
    const long v = std::lround((s + 0.5) * 256.0 / img.d);
    out.data.push_back(static_cast<std::uint8_t>(std::min(v, 255L)));
  }
  return out;
}

KeyStream make_key(std::size_t length, int d, std::uint64_t seed) {
  check_d(d);
  KeyStream k{d, {}, seed, "prng"};
  auto rng = make_stream(seed, 0);
  std::uniform_int_distribution<int> u(0, d - 1);
  k.symbols.resize(length);
  for (auto& s : k.symbols) s = static_cast<std::uint8_t>(u(rng));
  return k;
}

KeyStream key_from_sift(const SiftResult& sifted, std::size_t length, int d) {
  check_d(d);
  if (sifted.pairs.size() < length) throw std::invalid_argument("not enough sifted symbols for the key");
  KeyStream k{d, {}, 0, "sift"};
  k.symbols.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const int a = sifted.pairs[i].alice;
    if (a < 0 || a >= d) throw std::invalid_argument("sifted symbol outside alphabet");
    k.symbols.push_back(static_cast<std::uint8_t>(a));
  }
  return k;
}

SymbolImage encrypt(const SymbolImage& img, const KeyStream& key) { return shift(img, key, +1); }
SymbolImage decrypt(const SymbolImage& img, const KeyStream& key) { return shift(img, key, -1); }

SymbolImage channel_corrupt(const SymbolImage& img, const DetectionMatrix& m, std::uint64_t seed,
                            const ChannelOptions& opt) {
  if (m.dim() != img.d) throw std::invalid_argument("detection matrix dimension does not match alphabet");
  if (opt.fixed_basis && (*opt.fixed_basis < 0 || *opt.fixed_basis > 1))
    throw std::invalid_argument("basis must be 0 or 1");
  const int d = img.d;
  // Cumulative rows of both same-basis blocks.
  std::vector<Eigen::MatrixXd> cdf;
  for (int b = 0; b < 2; ++b) {
    Eigen::MatrixXd blk = m.block(b, b);
    for (int i = 0; i < d; ++i) {
      const double s = blk.row(i).sum();
      if (!(s > 0)) throw std::invalid_argument("confusion row has no mass");
      double acc = 0;
      for (int j = 0; j < d; ++j) blk(i, j) = (acc += blk(i, j) / s);
    }
    cdf.push_back(blk);
  }
  SymbolImage out = img;
  const std::size_t n = img.symbols.size();
  const std::size_t chunk = 1 << 14;
  parallel_for((n + chunk - 1) / chunk, opt.threads, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const int b = opt.fixed_basis ? *opt.fixed_basis : (hash_uniform(seed, 2 * i) < 0.5 ? 0 : 1);
      const double u = hash_uniform(seed, 2 * i + 1);
      const int s = img.symbols[i];
      int j = 0;
      while (j < d - 1 && u >= cdf[static_cast<std::size_t>(b)](s, j)) ++j;
      out.symbols[i] = static_cast<std::uint8_t>(j);
    }
  });
  return out;
}

double symbol_error_rate(const SymbolImage& a, const SymbolImage& b) {
  if (a.symbols.size() != b.symbols.size()) throw std::invalid_argument("images differ in size");
  if (a.symbols.empty()) return 0.0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < a.symbols.size(); ++i) bad += a.symbols[i] != b.symbols[i];
  return static_cast<double>(bad) / static_cast<double>(a.symbols.size());
}

Eigen::MatrixXd empirical_confusion(const SymbolImage& sent, const SymbolImage& received) {
  if (sent.symbols.size() != received.symbols.size() || sent.d != received.d)
    throw std::invalid_argument("images differ in size or alphabet");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(sent.d, sent.d);
  for (std::size_t i = 0; i < sent.symbols.size(); ++i) c(sent.symbols[i], received.symbols[i]) += 1;
  for (int i = 0; i < sent.d; ++i) {
    const double s = c.row(i).sum();
    if (s > 0) c.row(i) /= s;
  }
  return c;
}

RgbImage read_ppm(std::istream& in) {
  auto token = [&]() {
    std::string t;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(ch);
    }
    return t;
  };
  if (token() != "P6") throw std::invalid_argument("not a binary PPM (P6) image");
  RgbImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw std::invalid_argument("only maxval 255 is supported");
  } catch (const std::logic_error& e) {
    throw std::invalid_argument(std::string("bad PPM header: ") + e.what());
  }
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("bad PPM size");
  img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) throw std::invalid_argument("PPM data truncated");
  return img;
}

void write_ppm(std::ostream& out, const RgbImage& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

void write_key(std::ostream& out, const KeyStream& key) {
  out.write(reinterpret_cast<const char*>(key.symbols.data()), static_cast<std::streamsize>(key.symbols.size()));
}

RgbImage test_pattern(int width, int height) {
  RgbImage img{width, height, {}};
  img.data.reserve(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double fx = (x + 0.5) / width, fy = (y + 0.5) / height;
      const double r = std::hypot(fx - 0.5, fy - 0.5);
      img.data.push_back(static_cast<std::uint8_t>(255 * fx));
      img.data.push_back(static_cast<std::uint8_t>(255 * fy));
      img.data.push_back(static_cast<std::uint8_t>(255 * std::clamp(1.0 - 1.6 * r, 0.0, 1.0)));
    }
  return img;
}

}  // namespace hdqkd
