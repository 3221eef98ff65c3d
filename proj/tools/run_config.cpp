#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hdqkd::cli {

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw InputError("'" + key + "': expected a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x)) throw InputError("'" + key + "': expected an integer, got '" + v + "'");
  return static_cast<long long>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw InputError("'" + key + "': expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

Setter dbl(double RunConfig::*f) {
  return [f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = to_double(k, v); };
}
Setter budget(double LinkBudget::*f) {
  return [f](RunConfig& c, const std::string& k, const std::string& v) { c.budget.*f = to_double(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"run.dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.dim = static_cast<int>(to_int(k, v)); }},
      {"run.oam", [](RunConfig& c, const std::string& k, const std::string& v) { c.oam = static_cast<int>(to_int(k, v)); }},
      {"run.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto x = to_int(k, v);
         if (x < 0) throw InputError("'seed' must be non-negative");
         c.seed = static_cast<std::uint64_t>(x);
       }},
      {"run.bins_per_setting",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.bins_per_setting = static_cast<int>(to_int(k, v)); }},
      {"run.threads",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto x = to_int(k, v);
         if (x < 0) throw InputError("'threads' must be non-negative");
         c.threads = static_cast<unsigned>(x);
       }},
      {"run.out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"turbulence.enabled", [](RunConfig& c, const std::string& k, const std::string& v) { c.turbulence = to_bool(k, v); }},
      {"turbulence.cn2_m-2/3", dbl(&RunConfig::cn2)},
      {"turbulence.link_length_m", dbl(&RunConfig::link_length)},
      {"turbulence.wavelength_m", dbl(&RunConfig::wavelength)},
      {"turbulence.beam_waist_m", dbl(&RunConfig::beam_waist)},
      {"link.signal_loss_dB", budget(&LinkBudget::signal_loss_db)},
      {"link.idler_loss_dB", budget(&LinkBudget::idler_loss_db)},
      {"link.pair_rate_Hz", budget(&LinkBudget::source_coincidence_rate)},
      {"link.signal_singles_Hz", budget(&LinkBudget::signal_singles_rate)},
      {"link.idler_singles_Hz", budget(&LinkBudget::idler_singles_rate)},
      {"link.coincidence_window_s", budget(&LinkBudget::coincidence_window)},
      {"link.dark_rate_Hz", budget(&LinkBudget::dark_rate)},
      {"link.lab_qber_d2", budget(&LinkBudget::lab_qber_d2)},
      {"link.lab_qber_d4", budget(&LinkBudget::lab_qber_d4)},
      {"link.coupling_waist_m", budget(&LinkBudget::coupling_waist)},
      {"link.wander_correlation_s", budget(&LinkBudget::wander_correlation_time)},
      {"link.rx_aperture_m", budget(&LinkBudget::rx_aperture)},
      {"link.bin_duration_s", budget(&LinkBudget::bin_duration)},
      {"link.accidentals",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "projected") c.budget.accidentals = AccidentalModel::ProjectedSingles;
         else if (v == "uniform") c.budget.accidentals = AccidentalModel::Uniform;
         else throw InputError("'" + k + "': expected projected or uniform");
       }},
      {"correction.enabled", [](RunConfig& c, const std::string& k, const std::string& v) { c.correct = to_bool(k, v); }},
      {"correction.mode",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "rescale") c.correction.mode = CorrectionMode::Rescale;
         else if (v == "discard") c.correction.mode = CorrectionMode::DiscardOnly;
         else throw InputError("'" + k + "': expected rescale or discard");
       }},
      {"correction.reference",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "run") c.correction.reference = CorrectionReference::RunMedian;
         else if (v == "setting") c.correction.reference = CorrectionReference::SettingMedian;
         else throw InputError("'" + k + "': expected run or setting");
       }},
      {"correction.discard_floor", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.correction.discard_floor = to_double(k, v);
       }},
  };
  return s;
}

const char* accidentals_name(AccidentalModel m) { return m == AccidentalModel::Uniform ? "uniform" : "projected"; }

}  // namespace

std::optional<TurbulenceParams> RunConfig::turbulence_params() const {
  if (!turbulence) return std::nullopt;
  return make_turbulence(cn2, link_length, wavelength, beam_waist);
}

void RunConfig::validate() const {
  if (dim != 2 && dim != 4) throw InputError("dim must be 2 or 4");
  if (oam < 1) throw InputError("oam must be a positive integer");
  if (bins_per_setting < 1) throw InputError("bins_per_setting must be >= 1");
  if (!(cn2 >= 0)) throw InputError("cn2 must be non-negative");
  if (!(link_length > 0) || !(wavelength > 0) || !(beam_waist > 0))
    throw InputError("link length, wavelength and beam waist must be positive");
  if (!(correction.discard_floor >= 0 && correction.discard_floor < 1)) throw InputError("discard_floor must be in [0, 1)");
  try {
    budget.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw InputError(source + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = setters().find(full);
      if (it == setters().end()) throw InputError(source + ": unknown key '" + full + "'");
      it->second(c, full, value.data());
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  return parse_config(in, path);
}

// threads and out_dir are left out: they do not change results.
void write_config(std::ostream& out, const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto& b = c.budget;
  os << "[run]\ndim = " << c.dim << "\noam = " << c.oam << "\nseed = " << c.seed
     << "\nbins_per_setting = " << c.bins_per_setting << "\n\n[turbulence]\nenabled = " << (c.turbulence ? "true" : "false") << "\ncn2_m-2/3 = " << c.cn2
     << "\nlink_length_m = " << c.link_length << "\nwavelength_m = " << c.wavelength
     << "\nbeam_waist_m = " << c.beam_waist << "\n\n[link]\nsignal_loss_dB = " << b.signal_loss_db
     << "\nidler_loss_dB = " << b.idler_loss_db << "\npair_rate_Hz = " << b.source_coincidence_rate
     << "\nsignal_singles_Hz = " << b.signal_singles_rate << "\nidler_singles_Hz = " << b.idler_singles_rate
     << "\ncoincidence_window_s = " << b.coincidence_window << "\ndark_rate_Hz = " << b.dark_rate
     << "\nlab_qber_d2 = " << b.lab_qber_d2 << "\nlab_qber_d4 = " << b.lab_qber_d4
     << "\ncoupling_waist_m = " << b.coupling_waist << "\nwander_correlation_s = " << b.wander_correlation_time
     << "\nrx_aperture_m = " << b.rx_aperture << "\nbin_duration_s = " << b.bin_duration
     << "\naccidentals = " << accidentals_name(b.accidentals) << "\n\n[correction]\nenabled = "
     << (c.correct ? "true" : "false")
     << "\nmode = " << (c.correction.mode == CorrectionMode::Rescale ? "rescale" : "discard")
     << "\nreference = " << (c.correction.reference == CorrectionReference::RunMedian ? "run" : "setting")
     << "\ndiscard_floor = " << c.correction.discard_floor << '\n';
  out << os.str();
}

nlohmann::json to_json(const RunConfig& c) {
  const auto& b = c.budget;
  return {
      {"run", {{"dim", c.dim}, {"oam", c.oam}, {"seed", c.seed}, {"bins_per_setting", c.bins_per_setting}}},
      {"turbulence",
       {{"enabled", c.turbulence},
        {"cn2_m-2/3", c.cn2},
        {"link_length_m", c.link_length},
        {"wavelength_m", c.wavelength},
        {"beam_waist_m", c.beam_waist}}},
      {"link",
       {{"signal_loss_dB", b.signal_loss_db},
        {"idler_loss_dB", b.idler_loss_db},
        {"pair_rate_Hz", b.source_coincidence_rate},
        {"signal_singles_Hz", b.signal_singles_rate},
        {"idler_singles_Hz", b.idler_singles_rate},
        {"coincidence_window_s", b.coincidence_window},
        {"dark_rate_Hz", b.dark_rate},
        {"lab_qber_d2", b.lab_qber_d2},
        {"lab_qber_d4", b.lab_qber_d4},
        {"coupling_waist_m", b.coupling_waist},
        {"wander_correlation_s", b.wander_correlation_time},
        {"rx_aperture_m", b.rx_aperture},
        {"bin_duration_s", b.bin_duration},
        {"accidentals", accidentals_name(b.accidentals)}}},
      {"correction",
       {{"enabled", c.correct},
        {"mode", c.correction.mode == CorrectionMode::Rescale ? "rescale" : "discard"},
        {"reference", c.correction.reference == CorrectionReference::RunMedian ? "run" : "setting"},
        {"discard_floor", c.correction.discard_floor}}},
  };
}

}  // namespace hdqkd::cli
