#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hdqkd/mubs.hpp"

namespace hdqkd {

struct NonHermitian : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ExponentOverflow : std::overflow_error {
  using std::overflow_error::overflow_error;
};

// Constraints on the joint Alice-Bob state: <Gamma_k> = gamma_k with
// Gamma = {1, E_X, E_Z}, plus the key-map projectors Z_A^i = |psi^i><psi| x 1.
struct ConstraintSet {
  int d = 0;
  std::vector<Eigen::MatrixXcd> gamma_ops;
  std::vector<double> gamma;
  std::vector<Eigen::MatrixXcd> key_map;
  int joint_dim() const { return d * d; }
};

ConstraintSet build_bb84_constraints(int d, double q, const MubSet& mubs);

// exp(M) for Hermitian M via eigendecomposition.
Eigen::MatrixXcd hermitian_exp(const Eigen::MatrixXcd& m);

// sum_j Z_j X Z_j
Eigen::MatrixXcd pinch(const Eigen::MatrixXcd& x, const std::vector<Eigen::MatrixXcd>& key_map);

// The trace norm is available for comparison only: pinching is trace
// preserving, so it cannot see the key map.
enum class NormChoice { Operator, Trace };

// -||pinch(exp(-1 - lambda.Gamma))|| - lambda.gamma
double dual_objective(const Eigen::VectorXd& lambda, const ConstraintSet& cs,
                      NormChoice norm = NormChoice::Operator);
Eigen::VectorXd dual_gradient(const Eigen::VectorXd& lambda, const ConstraintSet& cs,
                              NormChoice norm = NormChoice::Operator);

struct OptimizerConfig {
  int restarts = 8;
  int max_iterations = 4000;
  double tolerance = 1e-9;  // on |change of objective| between iterations
  double start_range = 10.0;  // restarts draw lambda_X, lambda_Z from [0, start_range]
  std::uint64_t seed = 1;
  unsigned threads = 0;
  NormChoice norm = NormChoice::Operator;
};

struct DualSolution {
  Eigen::VectorXd lambda;  // (lambda_1, lambda_X, lambda_Z)
  double theta = 0.0;  // nats
  double h_cond = 0.0;  // H(Z_A|Z_B), bits
  double k = 0.0;  // bits per sifted photon
  bool converged = false;
  int iterations = 0;
  std::vector<double> restart_thetas;
  double max_hermiticity_error = 0.0;
};

// Multi-start gradient ascent, each restart finished by Nelder-Mead and axis
// line searches because the operator norm has kinks where its top eigenvalue
// is degenerate. The identity multiplier is eliminated in
// closed form (lambda_1 = ln N - 1 with N the pinched norm at lambda_1 = -1),
// leaving a smooth problem in (lambda_X, lambda_Z). A non-converged result is
// still a valid lower bound and is returned with converged = false.
DualSolution maximize_theta(const ConstraintSet& cs, const OptimizerConfig& cfg = {});

// Convenience: build the d=4 constraints for Q and solve.
DualSolution dual_key_rate(double q, const MubSet& mubs, const OptimizerConfig& cfg = {});

}  // namespace hdqkd
