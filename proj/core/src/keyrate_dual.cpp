#include "hdqkd/keyrate_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hdqkd/parallel.hpp"
#include "hdqkd/protocol.hpp"
#include "hdqkd/rng.hpp"

namespace hdqkd {

namespace {

constexpr double kHermTol = 1e-10;
constexpr double kMaxExponent = 700.0;

double hermiticity_error(const Eigen::MatrixXcd& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd projector(const Eigen::VectorXcd& v) { return v * v.adjoint(); }

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

struct NormEval {
  double value = 0.0;
  Eigen::VectorXd grad;  // d value / d lambda
  double herm_err = 0.0;
};

// ||pinch(exp(-1 - lambda.Gamma))|| and its gradient. The gradient uses the
// Daleckii-Krein form of the derivative of exp in the eigenbasis of the exponent.
NormEval pinched_norm(const Eigen::VectorXd& lambda, const ConstraintSet& cs, NormChoice norm,
                      bool want_grad) {
  const auto n = static_cast<Eigen::Index>(cs.joint_dim());
  if (lambda.size() != static_cast<Eigen::Index>(cs.gamma_ops.size()))
    throw std::invalid_argument("lambda has wrong length");
  if (!lambda.allFinite()) throw std::invalid_argument("lambda must be finite");
  Eigen::MatrixXcd a = -Eigen::MatrixXcd::Identity(n, n);
  for (Eigen::Index k = 0; k < lambda.size(); ++k) a -= lambda(k) * cs.gamma_ops[static_cast<std::size_t>(k)];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev.maxCoeff() > kMaxExponent) throw ExponentOverflow("dual exponent overflows");
  const Eigen::MatrixXcd& u = es.eigenvectors();
  Eigen::VectorXd eexp = ev.array().exp();
  Eigen::MatrixXcd r = u * eexp.cast<cplx>().asDiagonal() * u.adjoint();
  Eigen::MatrixXcd x = pinch(r, cs.key_map);

  NormEval out;
  out.herm_err = std::max(hermiticity_error(r), hermiticity_error(x));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> px(x);
  Eigen::MatrixXcd w;  // d||X|| = Tr(dX W)
  if (norm == NormChoice::Operator) {
    out.value = px.eigenvalues()(n - 1);
    if (want_grad) {
      Eigen::VectorXcd v = px.eigenvectors().col(n - 1);
      w = pinch(projector(v), cs.key_map);
    }
  } else {
    out.value = px.eigenvalues().sum();
    if (want_grad) w = Eigen::MatrixXcd::Identity(n, n);
  }
  if (!want_grad) return out;

  Eigen::MatrixXd f(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double di = ev(i) - ev(j);
      f(i, j) = std::abs(di) < 1e-12 ? eexp(i) : (eexp(i) - eexp(j)) / di;
    }
  Eigen::MatrixXcd wt = u.adjoint() * w * u;
  out.grad.resize(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    // dA/dlambda_k = -Gamma_k
    Eigen::MatrixXcd g = u.adjoint() * cs.gamma_ops[static_cast<std::size_t>(k)] * u;
    cplx acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) acc += f(i, j) * g(i, j) * wt(j, i);
    out.grad(k) = -acc.real();
  }
  return out;
}

Eigen::VectorXd gamma_vec(const ConstraintSet& cs) {
  return Eigen::Map<const Eigen::VectorXd>(cs.gamma.data(), static_cast<Eigen::Index>(cs.gamma.size()));
}

// Reduced objective over the non-identity multipliers mu: the identity
// multiplier that maximizes the full objective is ln N - 1.
struct Reduced {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  Eigen::VectorXd full_lambda;
  double herm_err = 0.0;
};

Reduced reduced_eval(const Eigen::VectorXd& mu, const ConstraintSet& cs, NormChoice norm) {
  Eigen::VectorXd lam(mu.size() + 1);
  lam(0) = -1.0;
  lam.tail(mu.size()) = mu;
  NormEval ne = pinched_norm(lam, cs, norm, true);
  Reduced r;
  if (!(ne.value > 0)) return r;
  const Eigen::VectorXd gam = gamma_vec(cs);
  r.value = -std::log(ne.value) - mu.dot(gam.tail(mu.size()));
  r.grad = -ne.grad.tail(mu.size()) / ne.value - gam.tail(mu.size());
  r.full_lambda = lam;
  r.full_lambda(0) = std::log(ne.value) - 1.0;
  r.herm_err = ne.herm_err;
  return r;
}

struct RestartResult {
  Reduced best;
  bool converged = false;
  int iterations = 0;
  double herm_err = 0.0;
};

RestartResult ascend(Eigen::VectorXd mu, const ConstraintSet& cs, const OptimizerConfig& cfg) {
  RestartResult res;
  Reduced cur = reduced_eval(mu, cs, cfg.norm);
  res.herm_err = cur.herm_err;
  double step = 1.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    res.iterations = it + 1;
    const double g2 = cur.grad.squaredNorm();
    if (g2 == 0.0) {
      res.converged = true;
      break;
    }
    Reduced next;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::VectorXd trial = mu + step * cur.grad;
      try {
        next = reduced_eval(trial, cs, cfg.norm);
      } catch (const ExponentOverflow&) {
        step *= 0.5;
        continue;
      }
      if (next.value >= cur.value + 1e-4 * step * g2) {
        mu = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.converged = true;  // no ascent direction left at machine precision
      break;
    }
    const double delta = next.value - cur.value;
    cur = next;
    res.herm_err = std::max(res.herm_err, cur.herm_err);
    step *= 2.0;
    if (std::abs(delta) < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.best = cur;
  return res;
}

// The operator norm has kinks where the top eigenvalue of the pinched matrix
// is degenerate, which the key-map symmetry makes common. Gradient steps stall
// there, so each restart is finished with a Nelder-Mead search that only needs
// objective values.
void polish(RestartResult& res, const ConstraintSet& cs, const OptimizerConfig& cfg, bool rotated) {
  const Eigen::Index m = res.best.full_lambda.size() - 1;
  auto eval = [&](const Eigen::VectorXd& mu) {
    try {
      return reduced_eval(mu, cs, cfg.norm);
    } catch (const ExponentOverflow&) {
      return Reduced{};
    }
  };
  std::vector<Reduced> simplex{res.best};
  std::vector<Eigen::VectorXd> pts{res.best.full_lambda.tail(m)};
  const double h = std::max(0.5, 0.05 * pts.front().cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::VectorXd p = pts.front();
    if (rotated) {
      p.array() += (k % 2 == 0 ? h : -h) / std::sqrt(static_cast<double>(m));
      p(k) += h;
    } else {
      p(k) += h;
    }
    pts.push_back(p);
    simplex.push_back(eval(p));
  }
  const auto n = pts.size();
  std::vector<std::size_t> order(n);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return simplex[a].value > simplex[b].value; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 2];
    double size = 0.0;
    for (std::size_t i = 1; i < n; ++i) size = std::max(size, (pts[order[i]] - pts[best]).cwiseAbs().maxCoeff());
    if (simplex[best].value - simplex[worst].value < 0.1 * cfg.tolerance && size < 1e-9) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i + 1 < n; ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(n - 1);
    auto along = [&](double t) { return Eigen::VectorXd(centroid + t * (pts[worst] - centroid)); };
    Eigen::VectorXd xr = along(-1.0);
    Reduced fr = eval(xr);
    if (fr.value > simplex[best].value) {
      Eigen::VectorXd xe = along(-2.0);
      Reduced fe = eval(xe);
      if (fe.value > fr.value) {
        pts[worst] = xe;
        simplex[worst] = fe;
      } else {
        pts[worst] = xr;
        simplex[worst] = fr;
      }
    } else if (fr.value > simplex[second].value) {
      pts[worst] = xr;
      simplex[worst] = fr;
    } else {
      Eigen::VectorXd xc = fr.value > simplex[worst].value ? along(-0.5) : along(0.5);
      Reduced fc = eval(xc);
      if (fc.value > std::max(fr.value, simplex[worst].value)) {
        pts[worst] = xc;
        simplex[worst] = fc;
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          simplex[i] = eval(pts[i]);
        }
      }
    }
    res.iterations += 1;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (simplex[i].value > res.best.value) res.best = simplex[i];
  res.herm_err = std::max(res.herm_err, res.best.herm_err);
}

// Golden-section maximization along one direction from the current best.
// The simplex can collapse onto a kink line away from the optimum; a line
// search along the ridge moves it on.
void line_search(RestartResult& res, const ConstraintSet& cs, const OptimizerConfig& cfg,
                 const Eigen::VectorXd& dir) {
  const Eigen::Index m = dir.size();
  const Eigen::VectorXd x0 = res.best.full_lambda.tail(m);
  auto eval = [&](double t) {
    try {
      return reduced_eval(x0 + t * dir, cs, cfg.norm);
    } catch (const ExponentOverflow&) {
      return Reduced{};
    }
  };
  // Bracket a maximum: expand geometrically on the rising side.
  double h = 0.25;
  Reduced fp = eval(h), fm = eval(-h);
  double sign = 1.0;
  if (fm.value > fp.value) sign = -1.0;
  double a = -h, b = h;
  if (std::max(fp.value, fm.value) > res.best.value) {
    double t = h;
    Reduced prev = sign > 0 ? fp : fm;
    for (int k = 0; k < 60; ++k) {
      const double tn = 2.0 * t;
      Reduced next = eval(sign * tn);
      if (!(next.value > prev.value)) {
        a = sign > 0 ? t / 2 : -tn;
        b = sign > 0 ? tn : -t / 2;
        break;
      }
      t = tn;
      prev = next;
    }
  }
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  Reduced fc = eval(c), fd = eval(d);
  for (int k = 0; k < 200 && b - a > 1e-11; ++k) {
    if (fc.value > fd.value) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = eval(d);
    }
  }
  for (const Reduced* r : {&fc, &fd, &fp, &fm})
    if (r->value > res.best.value) res.best = *r;
  res.herm_err = std::max(res.herm_err, res.best.herm_err);
}

}  // namespace

ConstraintSet build_bb84_constraints(int d, double q, const MubSet& mubs) {
  if (d != 4 || mubs.dim() != 4) throw std::invalid_argument("dual constraints are defined for d=4 only");
  if (!(q >= 0.0) || q > 0.75) throw std::domain_error("Q outside [0, 3/4]");
  ConstraintSet cs;
  cs.d = d;
  const Eigen::Index n = d * d;
  Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd ex = id, ez = id;
  for (int i = 0; i < d; ++i) {
    Eigen::MatrixXcd pp = projector(mubs.basis(0)[static_cast<std::size_t>(i)].amplitudes());
    Eigen::MatrixXcd pf = projector(mubs.basis(1)[static_cast<std::size_t>(i)].amplitudes());
    ex -= kron(pp, pp);
    ez -= kron(pf, pf);
    cs.key_map.push_back(kron(pp, Eigen::MatrixXcd::Identity(d, d)));
  }
  cs.gamma_ops = {id, ex, ez};
  cs.gamma = {1.0, q, q};
  return cs;
}

Eigen::MatrixXcd hermitian_exp(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw NonHermitian("matrix is not square");
  if (hermiticity_error(m) > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw NonHermitian("matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  if (es.eigenvalues().maxCoeff() > kMaxExponent) throw ExponentOverflow("matrix exponential overflows");
  Eigen::VectorXcd e = es.eigenvalues().array().exp().cast<cplx>();
  return es.eigenvectors() * e.asDiagonal() * es.eigenvectors().adjoint();
}

Eigen::MatrixXcd pinch(const Eigen::MatrixXcd& x, const std::vector<Eigen::MatrixXcd>& key_map) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(x.rows(), x.cols());
  for (const auto& z : key_map) {
    if (z.rows() != x.rows() || z.cols() != x.cols()) throw std::invalid_argument("pinch: dimension mismatch");
    out += z * x * z;
  }
  return out;
}

double dual_objective(const Eigen::VectorXd& lambda, const ConstraintSet& cs, NormChoice norm) {
  return -pinched_norm(lambda, cs, norm, false).value - lambda.dot(gamma_vec(cs));
}

Eigen::VectorXd dual_gradient(const Eigen::VectorXd& lambda, const ConstraintSet& cs, NormChoice norm) {
  return -pinched_norm(lambda, cs, norm, true).grad - gamma_vec(cs);
}

DualSolution maximize_theta(const ConstraintSet& cs, const OptimizerConfig& cfg) {
  const int restarts = std::max(cfg.restarts, 1);
  const Eigen::Index m = static_cast<Eigen::Index>(cs.gamma_ops.size()) - 1;
  std::vector<RestartResult> results(static_cast<std::size_t>(restarts));
  parallel_for(results.size(), cfg.threads, [&](std::size_t i) {
    auto rng = make_stream(cfg.seed, i);
    std::uniform_real_distribution<double> u(0.0, cfg.start_range);
    Eigen::VectorXd mu(m);
    for (Eigen::Index k = 0; k < m; ++k) mu(k) = u(rng);
    results[i] = ascend(mu, cs, cfg);
    // Fresh simplices, alternately rotated, until a round stops improving.
    for (int round = 0; round < 12; ++round) {
      const double before = results[i].best.value;
      polish(results[i], cs, cfg, round % 2 == 1);
      for (Eigen::Index k = 0; k < m; ++k) {
        line_search(results[i], cs, cfg, Eigen::VectorXd::Unit(m, k));
        if (m > 1) {
          Eigen::VectorXd diag = Eigen::VectorXd::Ones(m);
          diag(k) = -1.0;
          line_search(results[i], cs, cfg, diag);
        }
      }
      if (round > 0 && results[i].best.value - before < 1e-13) break;
    }
  });

  DualSolution sol;
  const RestartResult* best = &results.front();
  for (const auto& r : results) {
    sol.restart_thetas.push_back(r.best.value);
    sol.max_hermiticity_error = std::max(sol.max_hermiticity_error, r.herm_err);
    if (r.best.value > best->best.value) best = &r;
  }
  sol.lambda = best->best.full_lambda;
  sol.theta = best->best.value;
  sol.converged = best->converged;
  sol.iterations = best->iterations;
  sol.h_cond = entropy_d(cs.gamma[1], cs.d);
  sol.k = sol.theta / std::log(2.0) - sol.h_cond;
  if (sol.max_hermiticity_error > kHermTol) sol.converged = false;
  return sol;
}

DualSolution dual_key_rate(double q, const MubSet& mubs, const OptimizerConfig& cfg) {
  return maximize_theta(build_bb84_constraints(4, q, mubs), cfg);
}

}  // namespace hdqkd
