#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdqkd/mubs.hpp"

namespace hdqkd {

enum class Provenance { Raw, TargetCorrected, Theoretical, Simulated };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

// 0 for zeta/psi, 1 for xi/phi.
int basis_index(MubFamily f);

// 2d x 2d probabilities, rows = states Alice sends, columns = Bob's projectors.
// Labels are explicit, so a matrix listed as psi1,psi3,psi2,psi4 keeps that
// order and lookups go through labels.
class DetectionMatrix {
 public:
  DetectionMatrix(std::vector<StateLabel> rows, std::vector<StateLabel> cols, Eigen::MatrixXd p,
                  Provenance provenance);

  int dim() const { return d_; }
  const std::vector<StateLabel>& row_labels() const { return rows_; }
  const std::vector<StateLabel>& col_labels() const { return cols_; }
  const Eigen::MatrixXd& probabilities() const { return p_; }
  Provenance provenance() const { return prov_; }
  void set_provenance(Provenance p) { prov_ = p; }

  double at(const StateLabel& sent, const StateLabel& proj) const;
  int row_of(const StateLabel& l) const;
  int col_of(const StateLabel& l) const;

  // Largest |row sum - 1| over every (row, measurement-basis block).
  double max_block_row_deviation() const;
  bool is_normalized(double tol = 1e-9) const;
  DetectionMatrix block_normalized() const;

  // d x d block for prep basis a and measurement basis b, in label index order
  // (entry (i,j) is P(proj = label j+1 | sent = label i+1)).
  Eigen::MatrixXd block(int prep_basis, int meas_basis) const;

  // Reorders rows and columns to the given label lists.
  DetectionMatrix reordered(const std::vector<StateLabel>& rows, const std::vector<StateLabel>& cols) const;

 private:
  int d_ = 0;
  std::vector<StateLabel> rows_, cols_;
  Eigen::MatrixXd p_;
  Provenance prov_ = Provenance::Raw;
};

// zeta1,zeta2,xi1,xi2 for d=2; psi1,psi3,psi2,psi4,phi1..phi4 for d=4.
std::vector<StateLabel> published_label_order(int d);
std::vector<StateLabel> natural_label_order(int d);

DetectionMatrix theoretical_matrix(const MubSet& mubs);

struct MatrixParseError : std::runtime_error {
  MatrixParseError(const std::string& source, int line, int column, const std::string& what);
  int line = 0;
  int column = 0;
};

// CSV: '#' comment lines (optionally "key=value" pairs such as provenance=raw),
// one header row naming projectors, then one row per sent state.
DetectionMatrix read_matrix_csv(std::istream& in, const std::string& source = "<input>");
DetectionMatrix read_matrix_file(const std::string& path);
void write_matrix_csv(std::ostream& out, const DetectionMatrix& m,
                      const std::vector<std::string>& comments = {});

nlohmann::json to_json(const DetectionMatrix& m);
DetectionMatrix matrix_from_json(const nlohmann::json& j);

}  // namespace hdqkd
