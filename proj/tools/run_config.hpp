#pragma once

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>

#include "hdqkd/linksim.hpp"
#include "hdqkd/turbulence.hpp"

namespace hdqkd::cli {

// Bad user input: unreadable files, malformed configs, flags out of range.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything a simulation run depends on. Keys in the INI form carry their
// SI unit as a suffix, e.g. link_length_m or dark_rate_Hz.
struct RunConfig {
  int dim = 4;
  int oam = 1;
  std::uint64_t seed = 1;
  int bins_per_setting = 50;
  unsigned threads = 0;

  bool turbulence = true;
  double cn2 = 2.5e-15;  // m^(-2/3)
  double link_length = 300.0;
  double wavelength = 850e-9;
  double beam_waist = 12e-3;

  LinkBudget budget = reference_budget();

  bool correct = true;
  CorrectionOptions correction;

  std::string out_dir = ".";

  std::optional<TurbulenceParams> turbulence_params() const;
  void validate() const;  // throws InputError
};

// Sections [run], [turbulence], [link], [correction]. Unknown keys are errors.
RunConfig parse_config(std::istream& in, const std::string& source);
RunConfig load_config(const std::string& path);
void write_config(std::ostream& out, const RunConfig& c);

nlohmann::json to_json(const RunConfig& c);

}  // namespace hdqkd::cli
