#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hdqkd/encdemo.hpp"
#include "hdqkd/keyrate_dual.hpp"
#include "hdqkd/linksim.hpp"
#include "hdqkd/protocol.hpp"
#include "hdqkd/turbulence.hpp"
#include "hdqkd/version.hpp"
#include "run_config.hpp"

namespace hdqkd::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
  if (!f) throw InputError("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const std::string& p, bool binary = false) {
  std::ifstream f(p, binary ? std::ios::binary : std::ios::in);
  if (!f) throw InputError("cannot open " + p);
  return f;
}

std::string header(std::uint64_t seed) {
  return "hdqkd " + std::string(kVersion) + " seed=" + std::to_string(seed);
}

std::vector<KeyRate> key_rates(const QberReport& r, bool numeric, std::uint64_t seed, unsigned threads) {
  std::vector<KeyRate> out{key_rate_analytic(r.q, r.d)};
  if (numeric && r.d == 4) {
    OptimizerConfig oc;
    oc.seed = seed;
    oc.threads = threads;
    auto s = dual_key_rate(r.q, mub_d4(1), oc);
    out.push_back({4, r.q, s.k, KeyRateMethod::DualNumeric});
  }
  return out;
}

json rates_json(const QberReport& r, const std::vector<KeyRate>& rates) {
  json j = to_json(r);
  for (const auto& k : rates) j["key_rates"].push_back(to_json(k));
  return j;
}

// Shared flags that shape a RunConfig.
struct RunFlags {
  std::string config;
  std::optional<int> dim, oam, bins;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> cn2;
  std::optional<std::string> out;
  bool no_turbulence = false;
  bool no_correction = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "INI run configuration");
    app->add_option("--dim", dim, "dimension (2 or 4)");
    app->add_option("--oam", oam, "OAM charge l");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
    app->add_option("--cn2", cn2, "refractive index structure constant, m^-2/3");
    app->add_option("--bins", bins, "bins per measurement setting");
    app->add_option("--out", out, "output directory");
    app->add_flag("--no-turbulence", no_turbulence, "simulate the link without turbulence");
    app->add_flag("--no-correction", no_correction, "skip idler-referenced correction");
  }

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (dim) c.dim = *dim;
    if (oam) c.oam = *oam;
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (cn2) c.cn2 = *cn2;
    if (bins) c.bins_per_setting = *bins;
    if (out) c.out_dir = *out;
    if (no_turbulence) c.turbulence = false;
    if (no_correction) c.correct = false;
    c.validate();
    return c;
  }
};

int cmd_simulate(const RunFlags& flags, bool numeric, std::ostream& out, std::ostream& err) {
  const RunConfig c = flags.resolve();
  const MubSet mubs = make_mubs(c.dim, c.oam);
  const auto turb = c.turbulence_params();
  const auto records = run_protocol(mubs, c.budget, turb, c.bins_per_setting, c.seed, c.threads);
  const fs::path dir = prepare_dir(c.out_dir);

  const json cfg = to_json(c);
  const std::vector<std::string> comments{header(c.seed), "config=" + cfg.dump()};
  json report{{"version", kVersion}, {"seed", c.seed}, {"config", cfg}};
  if (turb) report["fried_m"] = turb->fried;

  auto emit = [&](const std::string& name, const DetectionMatrix& m) {
    auto f = open_out(dir / ("matrix_" + name + ".csv"));
    write_matrix_csv(f, m, comments);
    const auto q = qber(m, 1e-9);
    const auto rates = key_rates(q, numeric, c.seed, c.threads);
    report[name] = rates_json(q, rates);
    out << "[" << name << "]\n" << format_table(q, rates);
  };
  emit("raw", build_detection_matrix(records));
  if (c.correct) {
    // The raw matrix stays valid when correction has nothing left to work
    // with, so that case is reported rather than failing the run.
    try {
      auto m = build_detection_matrix(target_correction(records, c.correction));
      m.set_provenance(Provenance::TargetCorrected);
      emit("corrected", m);
    } catch (const TurbulenceTooSevere& e) {
      report["corrected"] = {{"error", e.what()}};
      err << "warning: " << e.what() << '\n';
    }
  }
  {
    auto f = open_out(dir / "config.ini");
    write_config(f, c);
  }
  auto f = open_out(dir / "report.json");
  f << report.dump(2) << '\n';
  out << "wrote " << (dir / "report.json").string() << '\n';
  return kOk;
}

int cmd_analyze(const std::string& path, std::optional<int> dim, double tol, bool numeric, bool as_json,
                std::uint64_t seed, unsigned threads, std::ostream& out) {
  auto in = open_in(path);
  const DetectionMatrix m = read_matrix_csv(in, path);
  if (dim && *dim != m.dim())
    throw InputError(path + ": matrix has d=" + std::to_string(m.dim()) + " but --dim " + std::to_string(*dim));
  const auto q = qber(m, tol);
  const auto rates = key_rates(q, numeric, seed, threads);
  if (as_json) {
    json j{{"version", kVersion}, {"seed", seed}, {"source", path}, {"result", rates_json(q, rates)}};
    out << j.dump(2) << '\n';
  } else {
    out << "# " << header(seed) << " source=" << path << " provenance=" << to_string(m.provenance()) << '\n'
        << format_table(q, rates);
  }
  return kOk;
}

int cmd_sweep(int dim, double qmin, double qmax, int points, std::uint64_t seed, unsigned threads,
              const std::string& out_path, std::ostream& out) {
  if (dim != 2 && dim != 4) throw InputError("--dim must be 2 or 4");
  if (points < 1) throw InputError("--points must be >= 1");
  if (!(qmin >= 0) || !(qmax >= qmin) || qmax > (dim - 1.0) / dim) throw InputError("Q range must lie in [0, (d-1)/d]");
  std::ostringstream os;
  os << "# " << header(seed) << " dim=" << dim << '\n';
  if (dim != 4) os << "# the numeric dual bound is defined for d=4 only; k_numeric left empty\n";
  os << "# k in bits per sifted photon\nq,k_numeric,k_analytic\n" << std::setprecision(10);
  OptimizerConfig oc;
  oc.seed = seed;
  oc.threads = threads;
  const MubSet mubs = make_mubs(4, 1);
  for (int i = 0; i < points; ++i) {
    const double q = points == 1 ? qmin : qmin + (qmax - qmin) * i / (points - 1);
    os << q << ',';
    if (dim == 4) os << dual_key_rate(q, mubs, oc).k;
    os << ',' << key_rate_analytic(q, dim).r << '\n';
  }
  if (out_path.empty()) {
    out << os.str();
  } else {
    auto f = open_out(out_path);
    f << os.str();
    out << "wrote " << out_path << '\n';
  }
  return kOk;
}

int cmd_fried(const std::string& path, double length, double wavelength, double waist, bool as_json,
              std::ostream& out) {
  auto in = open_in(path);
  CentroidSeries s;
  try {
    s = read_centroids_csv(in);
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
  if (s.samples.size() < 2) throw InputError(path + ": need at least 2 centroid samples");
  const auto t = fried_from_centroids(s, length, wavelength, waist);
  if (as_json) {
    json j{{"version", kVersion},
           {"source", path},
           {"samples", s.samples.size()},
           {"link_length_m", length},
           {"wavelength_m", wavelength},
           {"beam_waist_m", waist},
           {"wander_sigma2_m2", t.wander_sigma2},
           {"cn2_m-2/3", t.cn2},
           {"r0_m", t.fried}};
    out << j.dump(2) << '\n';
    return kOk;
  }
  out << "# hdqkd " << kVersion << " source=" << path << '\n'
      << "# units: sigma2 per axis in m^2, Cn2 in m^-2/3, r0 in m\n"
      << "# link_length_m=" << length << " wavelength_m=" << wavelength << " beam_waist_m=" << waist << '\n'
      << "samples,wander_sigma2_m2,cn2_m-2/3,r0_m\n"
      << std::setprecision(6) << s.samples.size() << ',' << t.wander_sigma2 << ',' << t.cn2 << ',' << t.fried << '\n';
  return kOk;
}

struct EncryptFlags {
  std::string image, matrix, key_source = "prng", out = ".";
  int dim = 4;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

int cmd_encrypt(const EncryptFlags& e, std::ostream& out) {
  if (e.dim != 2 && e.dim != 4) throw InputError("--dim must be 2 or 4");
  RgbImage img;
  if (e.image.empty()) {
    img = test_pattern(96, 64);
  } else {
    auto in = open_in(e.image, true);
    try {
      img = read_ppm(in);
    } catch (const std::invalid_argument& ex) {
      throw InputError(e.image + ": " + ex.what());
    }
  }
  DetectionMatrix m = theoretical_matrix(make_mubs(e.dim, 1));
  if (!e.matrix.empty()) {
    auto in = open_in(e.matrix);
    m = read_matrix_csv(in, e.matrix);
  }
  if (m.dim() != e.dim) throw InputError("matrix has d=" + std::to_string(m.dim()) + " but --dim " + std::to_string(e.dim));

  const SymbolImage plain = discretize(img, e.dim);
  const std::size_t n = plain.symbols.size();
  KeyStream key;
  if (e.key_source == "prng") {
    key = make_key(n, e.dim, e.seed);
  } else if (e.key_source == "sift") {
    std::size_t trials = 2 * n + 64;
    for (;;) {
      auto ex = simulate_exchange(m, trials, e.seed);
      auto s = sift(ex.alice_bases, ex.bob_bases, ex.outcomes);
      if (s.pairs.size() >= n) {
        key = key_from_sift(s, n, e.dim);
        break;
      }
      trials *= 2;
    }
  } else {
    throw InputError("--key-source must be prng or sift");
  }

  const SymbolImage cipher = encrypt(plain, key);
  const SymbolImage received = channel_corrupt(cipher, m, e.seed, {std::nullopt, e.threads});
  const SymbolImage decrypted = decrypt(received, key);
  const double ser = symbol_error_rate(plain, decrypted);

  const fs::path dir = prepare_dir(e.out);
  auto write_img = [&](const std::string& name, const SymbolImage& s) {
    auto f = open_out(dir / name, true);
    write_ppm(f, render(s));
  };
  write_img("original.ppm", plain);
  write_img("encrypted.ppm", cipher);
  write_img("decrypted.ppm", decrypted);
  {
    auto f = open_out(dir / "key.bin", true);
    write_key(f, key);
  }
  json report{{"version", kVersion},
              {"seed", e.seed},
              {"dim", e.dim},
              {"image", e.image.empty() ? "test-pattern" : e.image},
              {"matrix", e.matrix.empty() ? "theoretical" : e.matrix},
              {"key_source", key.source},
              {"width", img.width},
              {"height", img.height},
              {"symbols", n},
              {"symbol_error_rate", ser},
              {"matrix_qber", qber(m, kPublishedRowTolerance).q}};
  auto f = open_out(dir / "report.json");
  f << report.dump(2) << '\n';
  out << "symbol error rate " << std::fixed << std::setprecision(4) << ser << " over " << n << " symbols\n";
  return kOk;
}

struct ScreenFlags {
  std::optional<double> r0, cn2;
  double length = 300.0, wavelength = 850e-9;
  std::optional<double> pitch;
  int n = 256, count = 4;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out = ".";
};

int cmd_screens(const ScreenFlags& s, std::ostream& out) {
  if (s.r0.has_value() == s.cn2.has_value()) throw InputError("give exactly one of --r0 and --cn2");
  if (s.count < 1) throw InputError("--count must be >= 1");
  const double r0 = s.r0 ? *s.r0 : r0_from_cn2(*s.cn2, s.length, s.wavelength);
  if (!(r0 > 0) || !std::isfinite(r0)) throw InputError("r0 must be positive and finite");
  const double pitch = s.pitch ? *s.pitch : r0 / 16.0;
  std::vector<PhaseScreen> screens;
  try {
    screens = screen_ensemble(r0, s.n, pitch, s.count, s.seed, s.threads);
  } catch (const InvalidGrid& e) {
    throw InputError(e.what());
  }
  const fs::path dir = prepare_dir(s.out);
  json manifest{{"version", kVersion}, {"seed", s.seed}, {"r0_m", r0}, {"n", s.n}, {"pitch_m", pitch}, {"files", json::array()}};
  for (std::size_t i = 0; i < screens.size(); ++i) {
    std::ostringstream name;
    name << "screen_" << std::setw(3) << std::setfill('0') << i << ".bin";
    auto f = open_out(dir / name.str(), true);
    write_screen(f, screens[i]);
    manifest["files"].push_back(name.str());
  }
  auto f = open_out(dir / "screens.json");
  f << manifest.dump(2) << '\n';
  out << "wrote " << screens.size() << " screens (r0 " << r0 << " m, " << s.n << "x" << s.n << ") to " << dir.string()
      << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"High-dimensional QKD link simulator and analysis tools", "hdqkd"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunFlags sim_flags;
  bool sim_numeric = true;
  auto* sim = app.add_subcommand("simulate", "simulate a protocol run and write matrices and a report");
  sim_flags.add(sim);
  sim->add_flag("!--no-numeric", sim_numeric, "skip the numeric dual key rate");

  std::string an_path;
  std::optional<int> an_dim;
  double an_tol = kPublishedRowTolerance;
  bool an_numeric = true, an_json = false;
  std::uint64_t an_seed = 1;
  unsigned an_threads = 0;
  auto* an = app.add_subcommand("analyze", "QBER and key rates of a detection matrix CSV");
  an->add_option("matrix", an_path, "matrix CSV")->required();
  an->add_option("--dim", an_dim, "expected dimension");
  an->add_option("--row-tolerance", an_tol, "allowed block-row sum deviation");
  an->add_flag("!--no-numeric", an_numeric, "skip the numeric dual key rate");
  an->add_flag("--json", an_json, "emit JSON");
  an->add_option("--seed", an_seed, "optimizer seed");
  an->add_option("--threads", an_threads, "worker threads");

  int sw_dim = 4, sw_points = 9;
  double sw_min = 0.0, sw_max = 0.2;
  std::uint64_t sw_seed = 1;
  unsigned sw_threads = 0;
  std::string sw_out;
  auto* sw = app.add_subcommand("keyrate-sweep", "CSV of numeric and analytic key rates over a Q grid");
  sw->add_option("--dim", sw_dim, "dimension");
  sw->add_option("--q-min", sw_min, "first Q");
  sw->add_option("--q-max", sw_max, "last Q");
  sw->add_option("--points", sw_points, "number of grid points");
  sw->add_option("--seed", sw_seed, "optimizer seed");
  sw->add_option("--threads", sw_threads, "worker threads");
  sw->add_option("--out", sw_out, "output file (default stdout)");

  std::string fr_path;
  double fr_len = 300.0, fr_wl = 850e-9, fr_w0 = 12e-3;
  bool fr_json = false;
  auto* fr = app.add_subcommand("fried", "Fried parameter from a beam-centroid CSV (x,y in m)");
  fr->add_option("centroids", fr_path, "centroid CSV")->required();
  fr->add_option("--link-length-m", fr_len, "link length, m");
  fr->add_option("--wavelength-m", fr_wl, "wavelength, m");
  fr->add_option("--beam-waist-m", fr_w0, "beam waist at the sender, m");
  fr->add_flag("--json", fr_json, "emit JSON");

  EncryptFlags ef;
  auto* en = app.add_subcommand("encrypt-demo", "one-time-pad image through a measured confusion channel");
  en->add_option("--image", ef.image, "input PPM (P6); default is a test pattern");
  en->add_option("--matrix", ef.matrix, "detection matrix CSV; default is the ideal channel");
  en->add_option("--dim", ef.dim, "alphabet size (2 or 4)");
  en->add_option("--seed", ef.seed, "key and channel seed");
  en->add_option("--threads", ef.threads, "worker threads");
  en->add_option("--key-source", ef.key_source, "prng or sift");
  en->add_option("--out", ef.out, "output directory");

  ScreenFlags sf;
  auto* sc = app.add_subcommand("screens", "export Kolmogorov phase screens");
  sc->add_option("--r0", sf.r0, "Fried parameter, m");
  sc->add_option("--cn2", sf.cn2, "Cn2, m^-2/3 (converted with the link length and wavelength)");
  sc->add_option("--link-length-m", sf.length, "link length, m");
  sc->add_option("--wavelength-m", sf.wavelength, "wavelength, m");
  sc->add_option("--n", sf.n, "grid size");
  sc->add_option("--pitch-m", sf.pitch, "grid pitch, m (default r0/16)");
  sc->add_option("--count", sf.count, "number of screens");
  sc->add_option("--seed", sf.seed, "seed");
  sc->add_option("--threads", sf.threads, "worker threads");
  sc->add_option("--out", sf.out, "output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*sim) return cmd_simulate(sim_flags, sim_numeric, out, err);
    if (*an) return cmd_analyze(an_path, an_dim, an_tol, an_numeric, an_json, an_seed, an_threads, out);
    if (*sw) return cmd_sweep(sw_dim, sw_min, sw_max, sw_points, sw_seed, sw_threads, sw_out, out);
    if (*fr) return cmd_fried(fr_path, fr_len, fr_wl, fr_w0, fr_json, out);
    if (*en) return cmd_encrypt(ef, out);
    if (*sc) return cmd_screens(sf, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const MatrixParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kInputError;
}

}  // namespace hdqkd::cli
