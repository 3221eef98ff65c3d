#include <gtest/gtest.h>

#include <array>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "hdqkd/encdemo.hpp"

using namespace hdqkd;

TEST(Discretize, Examples) {
  RgbImage img{1, 1, {200, 64, 0}};
  EXPECT_EQ(discretize(img, 2).symbols, (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_EQ(discretize(img, 4).symbols, (std::vector<std::uint8_t>{3, 1, 0}));
  EXPECT_THROW(discretize(img, 3), std::invalid_argument);
}

TEST(Discretize, AtMostSixtyFourColours) {
  auto s = discretize(test_pattern(64, 64), 4);
  auto r = render(s);
  std::set<std::array<std::uint8_t, 3>> colours;
  for (std::size_t i = 0; i < r.data.size(); i += 3) colours.insert({r.data[i], r.data[i + 1], r.data[i + 2]});
  EXPECT_LE(colours.size(), 64u);
  EXPECT_GT(colours.size(), 1u);
  EXPECT_EQ(discretize(r, 4).symbols, s.symbols);
}

TEST(Cipher, RoundTrip) {
  for (int d : {2, 4}) {
    auto img = discretize(test_pattern(40, 30), d);
    auto key = make_key(img.symbols.size(), d, 9);
    auto enc = encrypt(img, key);
    EXPECT_NE(enc.symbols, img.symbols);
    EXPECT_EQ(decrypt(enc, key).symbols, img.symbols);
  }
}

TEST(Cipher, ZeroKeyIsIdentity) {
  auto img = discretize(test_pattern(20, 20), 4);
  KeyStream zero{4, std::vector<std::uint8_t>(img.symbols.size(), 0), 0, "prng"};
  EXPECT_EQ(encrypt(img, zero).symbols, img.symbols);
}

TEST(Cipher, MismatchesRejected) {
  auto img = discretize(test_pattern(4, 4), 4);
  EXPECT_THROW(encrypt(img, make_key(img.symbols.size() - 1, 4, 1)), std::invalid_argument);
  EXPECT_THROW(encrypt(img, make_key(img.symbols.size(), 2, 1)), std::invalid_argument);
}

TEST(Cipher, CiphertextUniform) {
  // constant image: ciphertext symbol counts follow the key, chi-square with 3 dof
  const std::size_t n = 120000;
  SymbolImage img{static_cast<int>(n / 3), 1, 4, std::vector<std::uint8_t>(n, 2)};
  auto enc = encrypt(img, make_key(n, 4, 77));
  std::array<double, 4> c{};
  for (auto s : enc.symbols) c[s] += 1;
  double chi2 = 0;
  for (double v : c) chi2 += (v - n / 4.0) * (v - n / 4.0) / (n / 4.0);
  EXPECT_LT(chi2, 16.27);  // p = 0.001
}

TEST(Channel, TheoreticalMatrixIsIdentity) {
  auto img = discretize(test_pattern(50, 50), 4);
  auto out = channel_corrupt(img, theoretical_matrix(mub_d4(1)), 3);
  EXPECT_EQ(out.symbols, img.symbols);
}

TEST(Channel, SymbolErrorMatchesQber) {
  const std::size_t n = 150000;
  auto k = make_key(n, 4, 5);
  SymbolImage img{static_cast<int>(n / 3), 1, 4, k.symbols};
  auto noisy = channel_corrupt(img, load_fixture("d4_noisy"), 11);
  auto corr = channel_corrupt(img, load_fixture("d4_corrected"), 11);
  EXPECT_NEAR(symbol_error_rate(img, noisy), 0.27, 0.01);
  EXPECT_NEAR(symbol_error_rate(img, corr), 0.11, 0.01);
}

TEST(Channel, FixedBasisConfusionConverges) {
  const std::size_t n = 200000;
  auto k = make_key(n, 4, 6);
  SymbolImage img{static_cast<int>(n / 3), 1, 4, k.symbols};
  auto m = load_fixture("d4_noisy");
  for (int b : {0, 1}) {
    auto out = channel_corrupt(img, m, 12, {b, 0});
    Eigen::MatrixXd blk = m.block(b, b);
    for (int i = 0; i < 4; ++i) blk.row(i) /= blk.row(i).sum();
    EXPECT_LT((empirical_confusion(img, out) - blk).cwiseAbs().maxCoeff(), 0.01);
  }
}

TEST(Channel, ThreadCountDoesNotMatter) {
  auto img = discretize(test_pattern(200, 150), 4);
  auto m = load_fixture("d4_raw");
  auto a = channel_corrupt(img, m, 21, {std::nullopt, 1});
  auto b = channel_corrupt(img, m, 21, {std::nullopt, 4});
  EXPECT_EQ(a.symbols, b.symbols);
}

TEST(Channel, DimensionMismatchRejected) {
  auto img = discretize(test_pattern(4, 4), 2);
  EXPECT_THROW(channel_corrupt(img, load_fixture("d4_raw"), 1), std::invalid_argument);
}

TEST(Ppm, RoundTrip) {
  auto img = test_pattern(17, 9);
  std::stringstream ss;
  write_ppm(ss, img);
  auto back = read_ppm(ss);
  EXPECT_EQ(back.width, 17);
  EXPECT_EQ(back.height, 9);
  EXPECT_EQ(back.data, img.data);
  std::stringstream bad("P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_ppm(bad), std::invalid_argument);
}

TEST(Key, FromSift) {
  auto m = load_fixture("d4_corrected");
  auto ex = simulate_exchange(m, 4000, 3);
  auto s = sift(ex.alice_bases, ex.bob_bases, ex.outcomes);
  auto key = key_from_sift(s, 1000, 4);
  EXPECT_EQ(key.source, "sift");
  ASSERT_EQ(key.symbols.size(), 1000u);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(key.symbols[i], s.pairs[i].alice);
  EXPECT_THROW(key_from_sift(s, s.pairs.size() + 1, 4), std::invalid_argument);
}
