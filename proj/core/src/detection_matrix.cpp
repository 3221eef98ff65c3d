#include "hdqkd/detection_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace hdqkd {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Raw: return "raw";
    case Provenance::TargetCorrected: return "target_corrected";
    case Provenance::Theoretical: return "theoretical";
    case Provenance::Simulated: return "simulated";
  }
  return "raw";
}

Provenance parse_provenance(const std::string& s) {
  for (auto p : {Provenance::Raw, Provenance::TargetCorrected, Provenance::Theoretical, Provenance::Simulated})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

int basis_index(MubFamily f) {
  return (f == MubFamily::Zeta || f == MubFamily::Psi) ? 0 : 1;
}

namespace {

void check_labels(const std::vector<StateLabel>& labels, int d, const char* what) {
  std::set<StateLabel> seen(labels.begin(), labels.end());
  if (seen.size() != labels.size()) throw std::invalid_argument(std::string(what) + " labels repeat");
  const bool d2 = d == 2;
  int count[2] = {0, 0};
  for (const auto& l : labels) {
    const bool is_d2 = l.family == MubFamily::Zeta || l.family == MubFamily::Xi;
    if (is_d2 != d2 || l.index > d)
      throw std::invalid_argument(std::string(what) + " label " + to_string(l) + " does not fit d=" +
                                  std::to_string(d));
    ++count[basis_index(l.family)];
  }
  if (count[0] != d || count[1] != d)
    throw std::invalid_argument(std::string(what) + " labels must cover both bases");
}

}  // namespace

DetectionMatrix::DetectionMatrix(std::vector<StateLabel> rows, std::vector<StateLabel> cols,
                                 Eigen::MatrixXd p, Provenance provenance)
    : rows_(std::move(rows)), cols_(std::move(cols)), p_(std::move(p)), prov_(provenance) {
  if (rows_.size() != cols_.size() || (rows_.size() != 4 && rows_.size() != 8))
    throw std::invalid_argument("detection matrix must be 4x4 or 8x8");
  d_ = static_cast<int>(rows_.size()) / 2;
  if (p_.rows() != 2 * d_ || p_.cols() != 2 * d_) throw std::invalid_argument("probability block has wrong size");
  check_labels(rows_, d_, "row");
  check_labels(cols_, d_, "column");
  if ((p_.array() < 0).any() || !p_.allFinite()) throw std::invalid_argument("probabilities must be finite and >= 0");
}

int DetectionMatrix::row_of(const StateLabel& l) const {
  auto it = std::find(rows_.begin(), rows_.end(), l);
  if (it == rows_.end()) throw std::invalid_argument("no row " + to_string(l));
  return static_cast<int>(it - rows_.begin());
}

int DetectionMatrix::col_of(const StateLabel& l) const {
  auto it = std::find(cols_.begin(), cols_.end(), l);
  if (it == cols_.end()) throw std::invalid_argument("no column " + to_string(l));
  return static_cast<int>(it - cols_.begin());
}

double DetectionMatrix::at(const StateLabel& sent, const StateLabel& proj) const {
  return p_(row_of(sent), col_of(proj));
}

double DetectionMatrix::max_block_row_deviation() const {
  double worst = 0.0;
  for (int r = 0; r < 2 * d_; ++r) {
    double sum[2] = {0, 0};
    for (int c = 0; c < 2 * d_; ++c) sum[basis_index(cols_[static_cast<std::size_t>(c)].family)] += p_(r, c);
    worst = std::max({worst, std::abs(sum[0] - 1.0), std::abs(sum[1] - 1.0)});
  }
  return worst;
}

bool DetectionMatrix::is_normalized(double tol) const { return max_block_row_deviation() <= tol; }

DetectionMatrix DetectionMatrix::block_normalized() const {
  Eigen::MatrixXd q = p_;
  for (int r = 0; r < 2 * d_; ++r) {
    double sum[2] = {0, 0};
    for (int c = 0; c < 2 * d_; ++c) sum[basis_index(cols_[static_cast<std::size_t>(c)].family)] += p_(r, c);
    for (int c = 0; c < 2 * d_; ++c) {
      const double s = sum[basis_index(cols_[static_cast<std::size_t>(c)].family)];
      if (s <= 0) throw std::invalid_argument("row " + to_string(rows_[static_cast<std::size_t>(r)]) + " has an empty block");
      q(r, c) = p_(r, c) / s;
    }
  }
  return DetectionMatrix(rows_, cols_, q, prov_);
}

Eigen::MatrixXd DetectionMatrix::block(int prep_basis, int meas_basis) const {
  Eigen::MatrixXd b(d_, d_);
  for (const auto& r : rows_) {
    if (basis_index(r.family) != prep_basis) continue;
    for (const auto& c : cols_) {
      if (basis_index(c.family) != meas_basis) continue;
      b(r.index - 1, c.index - 1) = at(r, c);
    }
  }
  return b;
}

DetectionMatrix DetectionMatrix::reordered(const std::vector<StateLabel>& rows,
                                           const std::vector<StateLabel>& cols) const {
  Eigen::MatrixXd q(2 * d_, 2 * d_);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(rows[i], cols[j]);
  return DetectionMatrix(rows, cols, q, prov_);
}

std::vector<StateLabel> published_label_order(int d) {
  if (d == 2) return {{MubFamily::Zeta, 1}, {MubFamily::Zeta, 2}, {MubFamily::Xi, 1}, {MubFamily::Xi, 2}};
  if (d == 4)
    return {{MubFamily::Psi, 1}, {MubFamily::Psi, 3}, {MubFamily::Psi, 2}, {MubFamily::Psi, 4},
            {MubFamily::Phi, 1}, {MubFamily::Phi, 2}, {MubFamily::Phi, 3}, {MubFamily::Phi, 4}};
  throw std::invalid_argument("only d=2 and d=4 are supported");
}

std::vector<StateLabel> natural_label_order(int d) {
  if (d != 2 && d != 4) throw std::invalid_argument("only d=2 and d=4 are supported");
  const MubFamily a = d == 2 ? MubFamily::Zeta : MubFamily::Psi;
  const MubFamily b = d == 2 ? MubFamily::Xi : MubFamily::Phi;
  std::vector<StateLabel> out;
  for (int i = 1; i <= d; ++i) out.push_back({a, i});
  for (int i = 1; i <= d; ++i) out.push_back({b, i});
  return out;
}

DetectionMatrix theoretical_matrix(const MubSet& mubs) {
  auto labels = natural_label_order(mubs.dim());
  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      p(i, j) = born_probability(mubs.state(labels[static_cast<std::size_t>(i)]),
                                 mubs.state(labels[static_cast<std::size_t>(j)]));
  return DetectionMatrix(labels, labels, p, Provenance::Theoretical);
}

MatrixParseError::MatrixParseError(const std::string& source, int l, int c, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(l) + ":" + std::to_string(c) + ": " + what),
      line(l),
      column(c) {}

namespace {

struct Cell {
  std::string text;
  int column;  // 1-based character position
};

std::vector<Cell> split_csv(const std::string& line) {
  std::vector<Cell> out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    std::string raw = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    std::size_t a = raw.find_first_not_of(" \t\r");
    std::size_t b = raw.find_last_not_of(" \t\r");
    out.push_back({a == std::string::npos ? "" : raw.substr(a, b - a + 1),
                   static_cast<int>(start + (a == std::string::npos ? 0 : a)) + 1});
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

DetectionMatrix read_matrix_csv(std::istream& in, const std::string& source) {
  std::string line;
  int lineno = 0;
  Provenance prov = Provenance::Raw;
  int declared_dim = 0;
  std::vector<StateLabel> cols, rows;
  std::vector<std::vector<double>> values;
  int header_line = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tok;
      while (ls >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        try {
          if (key == "provenance") prov = parse_provenance(val);
          if (key == "dim") declared_dim = std::stoi(val);
        } catch (const std::exception& e) {
          throw MatrixParseError(source, lineno, static_cast<int>(line.find(tok)) + 1, e.what());
        }
      }
      continue;
    }
    auto cells = split_csv(line);
    if (cols.empty()) {
      header_line = lineno;
      for (std::size_t i = 1; i < cells.size(); ++i) {
        try {
          cols.push_back(parse_state_label(cells[i].text));
        } catch (const std::exception& e) {
          throw MatrixParseError(source, lineno, cells[i].column, e.what());
        }
      }
      if (cols.size() != 4 && cols.size() != 8)
        throw MatrixParseError(source, lineno, 1, "header must name 4 or 8 projectors");
      continue;
    }
    if (cells.size() != cols.size() + 1)
      throw MatrixParseError(source, lineno, cells.back().column,
                             "expected " + std::to_string(cols.size() + 1) + " fields, found " +
                                 std::to_string(cells.size()));
    try {
      rows.push_back(parse_state_label(cells[0].text));
    } catch (const std::exception& e) {
      throw MatrixParseError(source, lineno, cells[0].column, e.what());
    }
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const std::string& t = cells[i].text;
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (t.empty() || used != t.size() || !std::isfinite(v) || v < 0)
        throw MatrixParseError(source, lineno, cells[i].column, "invalid probability '" + t + "'");
      row.push_back(v);
    }
    values.push_back(std::move(row));
  }
  if (cols.empty()) throw MatrixParseError(source, lineno, 1, "no header row");
  if (rows.size() != cols.size())
    throw MatrixParseError(source, lineno, 1,
                           "expected " + std::to_string(cols.size()) + " data rows, found " + std::to_string(rows.size()));
  const auto n = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  try {
    DetectionMatrix m(rows, cols, p, prov);
    if (declared_dim != 0 && declared_dim != m.dim())
      throw std::invalid_argument("declared dim=" + std::to_string(declared_dim) + " does not match data");
    return m;
  } catch (const std::invalid_argument& e) {
    throw MatrixParseError(source, header_line, 1, e.what());
  }
}

DetectionMatrix read_matrix_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MatrixParseError(path, 0, 0, "cannot open file");
  return read_matrix_csv(f, path);
}

void write_matrix_csv(std::ostream& out, const DetectionMatrix& m, const std::vector<std::string>& comments) {
  out << "# dim=" << m.dim() << " provenance=" << to_string(m.provenance()) << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "sent";
  for (const auto& c : m.col_labels()) out << ',' << to_string(c);
  out << '\n' << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < m.row_labels().size(); ++i) {
    out << to_string(m.row_labels()[i]);
    for (std::size_t j = 0; j < m.col_labels().size(); ++j)
      out << ',' << m.probabilities()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

nlohmann::json to_json(const DetectionMatrix& m) {
  nlohmann::json j;
  j["dim"] = m.dim();
  j["provenance"] = to_string(m.provenance());
  for (const auto& r : m.row_labels()) j["rows"].push_back(to_string(r));
  for (const auto& c : m.col_labels()) j["cols"].push_back(to_string(c));
  for (Eigen::Index i = 0; i < m.probabilities().rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index k = 0; k < m.probabilities().cols(); ++k) row.push_back(m.probabilities()(i, k));
    j["probabilities"].push_back(row);
  }
  return j;
}

DetectionMatrix matrix_from_json(const nlohmann::json& j) {
  std::vector<StateLabel> rows, cols;
  for (const auto& r : j.at("rows")) rows.push_back(parse_state_label(r.get<std::string>()));
  for (const auto& c : j.at("cols")) cols.push_back(parse_state_label(c.get<std::string>()));
  const auto& pj = j.at("probabilities");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) p(i, k) = pj.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  return DetectionMatrix(rows, cols, p, parse_provenance(j.at("provenance").get<std::string>()));
}

}  // namespace hdqkd
