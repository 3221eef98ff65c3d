#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "hdqkd/turbulence.hpp"

namespace fs = std::filesystem;
using hdqkd::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::string fixture(const std::string& name) { return std::string(HDQKD_FIXTURE_DIR) + "/" + name + ".csv"; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("hdqkd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, NoSubcommandIsAnInputError) { EXPECT_EQ(call({}).code, 2); }

TEST_F(Cli, UnknownFlagIsAnInputError) { EXPECT_EQ(call({"analyze", fixture("d4_raw"), "--bogus"}).code, 2); }

TEST_F(Cli, AnalyzeCorrectedD4) {
  auto r = call({"analyze", fixture("d4_corrected"), "--json", "--dim", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["result"]["Q"].get<double>(), 0.11, 0.005);
  EXPECT_NEAR(j["result"]["key_rates"][0]["R_bits_per_sifted_photon"].get<double>(), 0.65, 0.01);
  EXPECT_NEAR(j["result"]["key_rates"][1]["R_bits_per_sifted_photon"].get<double>(), 0.65, 0.02);
  EXPECT_EQ(j["version"], "1.0.0");
}

TEST_F(Cli, AnalyzeD2) {
  auto r = call({"analyze", fixture("d2_corrected"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  const double q = j["result"]["Q"].get<double>();
  EXPECT_NEAR(q, 0.05, 0.005);
  // The quoted 0.43 is the rate at the rounded 5%; the matrix itself gives Q = 0.0465.
  const double h = -q * std::log2(q) - (1 - q) * std::log2(1 - q);
  EXPECT_NEAR(j["result"]["key_rates"][0]["R_bits_per_sifted_photon"].get<double>(), 1 - 2 * h, 1e-9);
  EXPECT_EQ(j["result"]["key_rates"].size(), 1u);
}

TEST_F(Cli, AnalyzeMalformedCsvReportsLocation) {
  std::ofstream(path("bad.csv")) << "# dim=2 provenance=raw\nsent,zeta1,zeta2,xi1,xi2\nzeta1,0.9,abc,0.5,0.5\n";
  auto r = call({"analyze", path("bad.csv")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.csv:3:"), std::string::npos) << r.err;
}

TEST_F(Cli, AnalyzeMissingFile) { EXPECT_EQ(call({"analyze", path("nope.csv")}).code, 2); }

TEST_F(Cli, AnalyzeDimensionMismatch) { EXPECT_EQ(call({"analyze", fixture("d2_raw"), "--dim", "4"}).code, 2); }

TEST_F(Cli, SimulateIsDeterministic) {
  auto a = call({"simulate", "--seed", "5", "--bins", "10", "--no-numeric", "--out", path("a"), "--threads", "1"});
  auto b = call({"simulate", "--seed", "5", "--bins", "10", "--no-numeric", "--out", path("b"), "--threads", "3"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  for (auto f : {"matrix_raw.csv", "matrix_corrected.csv", "report.json", "config.ini"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  auto j = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["config"]["run"]["bins_per_setting"], 10);
  EXPECT_NE(slurp(dir / "a" / "matrix_raw.csv").find("seed=5"), std::string::npos);
}

TEST_F(Cli, SimulateWithoutTurbulence) {
  auto r = call({"simulate", "--no-turbulence", "--seed", "2", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_LE(j["raw"]["Q"].get<double>(), 0.02);
  EXPECT_EQ(j["raw"]["key_rates"].size(), 2u);
}

TEST_F(Cli, SimulateD2EmitsFourByFour) {
  auto r = call({"simulate", "--dim", "2", "--bins", "5", "--no-turbulence", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(slurp(dir / "o" / "matrix_raw.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty() && line[0] != '#' && line.rfind("sent", 0) != 0) {
      ++rows;
      EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
    }
  EXPECT_EQ(rows, 4);
}

TEST_F(Cli, ConfigFileRoundTrip) {
  std::ofstream(path("run.ini")) << "[run]\ndim = 2\nseed = 9\nbins_per_setting = 4\n\n[turbulence]\ncn2_m-2/3 = 6.4e-16\n"
                                    "\n[link]\ndark_rate_Hz = 800\n";
  auto r = call({"simulate", "--config", path("run.ini"), "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_EQ(j["config"]["run"]["dim"], 2);
  EXPECT_EQ(j["config"]["link"]["dark_rate_Hz"], 800.0);
  EXPECT_NEAR(j["fried_m"].get<double>(), 0.41, 0.01);
  // the written config reproduces the run
  auto again = call({"simulate", "--config", (dir / "o" / "config.ini").string(), "--out", path("p")});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(dir / "o" / "report.json"), slurp(dir / "p" / "report.json"));
}

TEST_F(Cli, FailedCorrectionKeepsRawMatrix) {
  // Five bins of one setting share a single deep wander excursion here.
  auto r = call({"simulate", "--dim", "2", "--bins", "5", "--seed", "1", "--out", path("o")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_TRUE(j["raw"].contains("Q"));
  ASSERT_TRUE(j["corrected"].contains("error"));
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "o" / "matrix_corrected.csv"));
}

TEST_F(Cli, BadConfigRejected) {
  std::ofstream(path("typo.ini")) << "[link]\ndark_rate = 800\n";
  auto r = call({"simulate", "--config", path("typo.ini"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("link.dark_rate"), std::string::npos);
  std::ofstream(path("neg.ini")) << "[link]\ncoincidence_window_s = -1\n";
  EXPECT_EQ(call({"simulate", "--config", path("neg.ini"), "--out", path("o")}).code, 2);
  EXPECT_EQ(call({"simulate", "--dim", "3", "--out", path("o")}).code, 2);
}

TEST_F(Cli, KeyrateSweep) {
  auto r = call({"keyrate-sweep", "--q-min", "0", "--q-max", "0.1", "--points", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'q') continue;
    std::vector<double> v;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    rows.push_back(v);
  }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], 0.0);
  EXPECT_NEAR(rows[0][1], 2.0, 1e-6);
  EXPECT_NEAR(rows[0][2], 2.0, 1e-12);
  for (const auto& row : rows) EXPECT_NEAR(row[1], row[2], 0.02);
  EXPECT_EQ(call({"keyrate-sweep", "--q-max", "0.9"}).code, 2);
}

TEST_F(Cli, FriedClosedLoop) {
  const double cn2 = 2.5e-15;
  const double sigma = std::sqrt(hdqkd::wander_sigma2(cn2, 300.0, 12e-3));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, sigma);
  hdqkd::CentroidSeries s;
  for (int i = 0; i < 2000; ++i) s.samples.emplace_back(g(rng), g(rng));
  {
    std::ofstream f(path("c.csv"));
    hdqkd::write_centroids_csv(f, s);
  }
  auto r = call({"fried", path("c.csv"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["r0_m"].get<double>(), 0.18, 0.18 * 0.05);
  auto text = call({"fried", path("c.csv")});
  EXPECT_NE(text.out.find("units"), std::string::npos);
  std::ofstream(path("empty.csv")) << "";
  EXPECT_EQ(call({"fried", path("empty.csv")}).code, 2);
}

TEST_F(Cli, FriedWithoutWanderIsDomainError) {
  std::ofstream(path("still.csv")) << "0.001,0.002\n0.001,0.002\n0.001,0.002\n";
  EXPECT_EQ(call({"fried", path("still.csv")}).code, 1);
}

TEST_F(Cli, EncryptDemoIdealChannelIsLossless) {
  auto r = call({"encrypt-demo", "--out", path("e"), "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "e" / "report.json"));
  EXPECT_EQ(j["symbol_error_rate"].get<double>(), 0.0);
  EXPECT_EQ(slurp(dir / "e" / "original.ppm"), slurp(dir / "e" / "decrypted.ppm"));
  EXPECT_NE(slurp(dir / "e" / "original.ppm"), slurp(dir / "e" / "encrypted.ppm"));
}

TEST_F(Cli, EncryptDemoNoisyNight) {
  // 96x64 test pattern is too small for the +-0.01 band; use a larger image
  std::vector<std::uint8_t> px(3 * 200 * 200);
  std::mt19937 rng(1);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng() & 0xff);
  {
    std::ofstream f(path("in.ppm"), std::ios::binary);
    f << "P6\n200 200\n255\n";
    f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  }
  auto args = std::vector<std::string>{"encrypt-demo", "--image", path("in.ppm"), "--matrix", fixture("d4_noisy"), "--seed", "8"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", path("a")});
  b.insert(b.end(), {"--out", path("b"), "--threads", "2"});
  ASSERT_EQ(call(a).code, 0);
  ASSERT_EQ(call(b).code, 0);
  auto j = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_NEAR(j["symbol_error_rate"].get<double>(), 0.27, 0.01);
  for (auto f : {"encrypted.ppm", "decrypted.ppm", "key.bin"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST_F(Cli, EncryptDemoSiftedKey) {
  auto r = call({"encrypt-demo", "--matrix", fixture("d4_corrected"), "--key-source", "sift", "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "s" / "report.json"));
  EXPECT_EQ(j["key_source"], "sift");
  EXPECT_EQ(call({"encrypt-demo", "--key-source", "magic", "--out", path("s")}).code, 2);
}

TEST_F(Cli, ScreensExport) {
  auto r = call({"screens", "--r0", "0.18", "--n", "64", "--count", "2", "--out", path("sc")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(dir / "sc" / "screen_001.bin", std::ios::binary);
  auto s = hdqkd::read_screen(f);
  EXPECT_EQ(s.n, 64);
  EXPECT_NEAR(s.r0, 0.18, 1e-12);
  EXPECT_EQ(call({"screens", "--n", "64", "--out", path("sc")}).code, 2);
  EXPECT_EQ(call({"screens", "--r0", "0.18", "--n", "0", "--out", path("sc")}).code, 2);
}
