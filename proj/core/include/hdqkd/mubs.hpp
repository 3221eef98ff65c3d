#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hdqkd/spinorbit.hpp"

namespace hdqkd {

enum class MubFamily { Zeta, Xi, Psi, Phi };

// A basis state named the way the detection matrices name it, e.g. psi3.
struct StateLabel {
  MubFamily family = MubFamily::Psi;
  int index = 1;  // 1-based
  auto operator<=>(const StateLabel&) const = default;
};

std::string to_string(const StateLabel& s);
StateLabel parse_state_label(const std::string& text);  // throws std::invalid_argument

class MubSet {
 public:
  int dim() const { return d_; }
  int ell() const { return ell_; }
  const ModeBasis& modes() const { return modes_; }
  const std::vector<StateVector>& basis(int b) const { return bases_.at(b); }
  const std::vector<StateLabel>& labels(int b) const { return labels_.at(b); }
  const StateVector& state(const StateLabel& label) const;
  // Which of the two bases a label belongs to (0 or 1); throws if foreign.
  int basis_of(const StateLabel& label) const;
  // Generator matrices for d=4 (empty for d=2).
  const Eigen::MatrixXcd& m0() const { return m0_; }
  const Eigen::MatrixXcd& m1() const { return m1_; }

  // Row-per-state complex amplitude table.
  void write_text(std::ostream& os) const;

  friend MubSet mub_d2(int ell);
  friend MubSet mub_d4(int ell);

 private:
  int d_ = 0;
  int ell_ = 0;
  ModeBasis modes_;
  std::array<std::vector<StateVector>, 2> bases_;
  std::array<std::vector<StateLabel>, 2> labels_;
  Eigen::MatrixXcd m0_, m1_;
};

MubSet mub_d2(int ell);
MubSet mub_d4(int ell);
MubSet make_mubs(int d, int ell);

// Natural-basis orderings the generator matrices act on.
ModeBasis natural_basis_m0(int ell);  // {H+l, H-l, V+l, V-l}
ModeBasis natural_basis_m1(int ell);  // {H+l, V+l, H-l, V-l}

enum class ElementKind { HWP, QWP, QPlate, None };

struct Element {
  ElementKind kind = ElementKind::None;
  double value = 0.0;  // waveplate angle in degrees or q-plate charge
};

struct PrepRecipe {
  StateLabel target;
  std::vector<Element> elements;  // in the order the photon meets them
  AngleFrame frame = AngleFrame::Standard;
};

std::vector<PrepRecipe> recipes_d2(int ell);
std::vector<PrepRecipe> recipes_d4(int ell);

// OAM space used while a recipe runs: {-l, 0, +l}.
std::vector<int> prep_oam_space(int ell);
StateVector recipe_input_state(int ell);  // |H,0>
StateVector apply_recipe(const PrepRecipe& recipe, const StateVector& input, int ell);

// Fidelity of the prepared state with the labelled target of `mubs`.
double verify_recipe(const PrepRecipe& recipe, const StateVector& input, const MubSet& mubs);

}  // namespace hdqkd
