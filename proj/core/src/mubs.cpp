#include "hdqkd/mubs.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>

namespace hdqkd {

namespace {

const char* family_name(MubFamily f) {
  switch (f) {
    case MubFamily::Zeta: return "zeta";
    case MubFamily::Xi: return "xi";
    case MubFamily::Psi: return "psi";
    case MubFamily::Phi: return "phi";
  }
  return "?";
}

void check_ell(int ell) {
  if (ell < 1) throw std::invalid_argument("OAM value l must be >= 1");
}

}  // namespace

std::string to_string(const StateLabel& s) {
  return family_name(s.family) + std::to_string(s.index);
}

StateLabel parse_state_label(const std::string& text) {
  for (auto f : {MubFamily::Zeta, MubFamily::Xi, MubFamily::Psi, MubFamily::Phi}) {
    std::string name = family_name(f);
    if (text.size() > name.size() && text.compare(0, name.size(), name) == 0) {
      std::string rest = text.substr(name.size());
      if (rest.find_first_not_of("0123456789") != std::string::npos) break;
      int idx = std::stoi(rest);
      if (idx < 1 || idx > 4) break;
      return {f, idx};
    }
  }
  throw std::invalid_argument("unknown state label '" + text + "'");
}

const StateVector& MubSet::state(const StateLabel& label) const {
  int b = basis_of(label);
  return bases_[b].at(label.index - 1);
}

int MubSet::basis_of(const StateLabel& label) const {
  for (int b = 0; b < 2; ++b)
    for (const auto& l : labels_[b])
      if (l == label) return b;
  throw std::invalid_argument("label " + to_string(label) + " is not part of this MUB set");
}

void MubSet::write_text(std::ostream& os) const {
  os << "# d=" << d_ << " l=" << ell_ << "\n# modes:";
  for (const auto& m : modes_) os << " |" << to_string(m) << ">";
  os << "\n";
  os << std::setprecision(12);
  for (int b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < bases_[b].size(); ++i) {
      os << to_string(labels_[b][i]);
      for (Eigen::Index k = 0; k < bases_[b][i].amplitudes().size(); ++k) {
        cplx a = bases_[b][i].amplitudes()(k);
        os << ' ' << a.real() << (a.imag() < 0 ? "-" : "+") << std::abs(a.imag()) << 'i';
      }
      os << "\n";
    }
  }
}

ModeBasis natural_basis_m0(int ell) {
  return {{Polarization::H, ell}, {Polarization::H, -ell}, {Polarization::V, ell}, {Polarization::V, -ell}};
}

ModeBasis natural_basis_m1(int ell) {
  return {{Polarization::H, ell}, {Polarization::V, ell}, {Polarization::H, -ell}, {Polarization::V, -ell}};
}

MubSet mub_d2(int ell) {
  check_ell(ell);
  MubSet s;
  s.d_ = 2;
  s.ell_ = ell;
  s.modes_ = {{Polarization::L, -ell}, {Polarization::R, ell}};
  const double r = 1.0 / std::sqrt(2.0);
  auto make = [&](cplx b) { return StateVector(s.modes_, Eigen::Vector2cd(r, r * b)); };
  s.bases_[0] = {make(1.0), make(-1.0)};
  s.bases_[1] = {make(kI), make(-kI)};
  s.labels_[0] = {{MubFamily::Zeta, 1}, {MubFamily::Zeta, 2}};
  s.labels_[1] = {{MubFamily::Xi, 1}, {MubFamily::Xi, 2}};
  return s;
}

MubSet mub_d4(int ell) {
  check_ell(ell);
  MubSet s;
  s.d_ = 4;
  s.ell_ = ell;
  s.modes_ = natural_basis_m0(ell);
  s.m0_ = Eigen::MatrixXcd::Identity(4, 4);
  s.m1_.resize(4, 4);
  s.m1_ << 1.0, kI, 1.0, -kI,
           1.0, kI, -1.0, kI,
           1.0, -kI, 1.0, kI,
           -1.0, kI, 1.0, kI;
  s.m1_ *= 0.5;
  // psi^i = M0^{ik}|k> over the M0 ordering, phi^j = M1^{jk}|k> over the M1
  // ordering; both are stored over the M0 ordering.
  ModeBasis m1_modes = natural_basis_m1(ell);
  for (int i = 0; i < 4; ++i) {
    s.bases_[0].push_back(StateVector(s.modes_, s.m0_.row(i).transpose()));
    StateVector phi(m1_modes, s.m1_.row(i).transpose());
    s.bases_[1].push_back(phi.in_basis(s.modes_));
    s.labels_[0].push_back({MubFamily::Psi, i + 1});
    s.labels_[1].push_back({MubFamily::Phi, i + 1});
  }
  return s;
}

MubSet make_mubs(int d, int ell) {
  if (d == 2) return mub_d2(ell);
  if (d == 4) return mub_d4(ell);
  throw std::invalid_argument("only d=2 and d=4 are supported");
}

std::vector<PrepRecipe> recipes_d2(int ell) {
  check_ell(ell);
  const double q = ell / 2.0;
  auto r = [&](MubFamily f, int i, double angle) {
    return PrepRecipe{{f, i}, {{ElementKind::HWP, angle}, {ElementKind::QPlate, q}}, AngleFrame::Mirrored};
  };
  return {r(MubFamily::Zeta, 1, 0.0), r(MubFamily::Zeta, 2, 45.0), r(MubFamily::Xi, 1, 22.5),
          r(MubFamily::Xi, 2, -22.5)};
}

std::vector<PrepRecipe> recipes_d4(int ell) {
  check_ell(ell);
  const double q = ell / 2.0;
  auto sandwich = [&](MubFamily f, int i, ElementKind k, double a, std::optional<double> b) {
    PrepRecipe r{{f, i}, {{k, a}, {ElementKind::QPlate, q}}, AngleFrame::Standard};
    r.elements.push_back(b ? Element{k, *b} : Element{ElementKind::None, 0.0});
    return r;
  };
  using K = ElementKind;
  return {
      sandwich(MubFamily::Psi, 1, K::QWP, -45.0, -45.0),
      sandwich(MubFamily::Psi, 2, K::QWP, 45.0, 45.0),
      sandwich(MubFamily::Psi, 3, K::QWP, -45.0, 45.0),
      sandwich(MubFamily::Psi, 4, K::QWP, 45.0, -45.0),
      sandwich(MubFamily::Phi, 1, K::HWP, 0.0, 0.0),
      sandwich(MubFamily::Phi, 2, K::HWP, 45.0, 0.0),
      sandwich(MubFamily::Phi, 3, K::HWP, 0.0, std::nullopt),
      sandwich(MubFamily::Phi, 4, K::HWP, 45.0, std::nullopt),
  };
}

std::vector<int> prep_oam_space(int ell) { return {-ell, 0, ell}; }

StateVector recipe_input_state(int ell) {
  return StateVector::mode(linear_modes(prep_oam_space(ell)), {Polarization::H, 0});
}

StateVector apply_recipe(const PrepRecipe& recipe, const StateVector& input, int ell) {
  const auto space = prep_oam_space(ell);
  StateVector s = input.in_basis(linear_modes(space));
  for (const auto& e : recipe.elements) {
    const double angle = frame_angle(e.value, recipe.frame) * kDeg;
    switch (e.kind) {
      case ElementKind::HWP: s = hwp(angle, space).apply(s); break;
      case ElementKind::QWP: s = qwp(angle, space).apply(s); break;
      case ElementKind::QPlate: s = qplate(e.value, space).apply(s); break;
      case ElementKind::None: break;
    }
  }
  return s;
}

double verify_recipe(const PrepRecipe& recipe, const StateVector& input, const MubSet& mubs) {
  StateVector out = apply_recipe(recipe, input, mubs.ell());
  const StateVector& target = mubs.state(recipe.target);
  // The prepared state lives on {-l,0,+l}; any weight left at l=0 or on modes
  // outside the target's span counts against the fidelity.
  StateVector t = target.in_basis(out.basis_order());
  return born_probability(out, t);
}

}  // namespace hdqkd
