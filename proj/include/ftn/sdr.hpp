#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ftn/common.hpp"
#include "ftn/rng.hpp"

namespace ftn {

// Whitened detection model y = V a + w, w ~ N(0, noise_var I), a in {-1,+1}^n.
// The symbol amplitude is folded into V at construction so the detection
// formulas hold with unit-amplitude a. V may be tall (rows >= cols).
struct DetectionProblem {
  Eigen::MatrixXd V;
  Eigen::VectorXd y;
  double amplitude = 1.0;
  double noise_var = 1.0;

  int n() const { return static_cast<int>(V.cols()); }
};

inline DetectionProblem make_problem(const Eigen::MatrixXd& V,
                                     const Eigen::VectorXd& y, double amplitude,
                                     double noise_var) {
  if (y.size() != V.rows()) throw std::invalid_argument("y/V dimension mismatch");
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise_var must be > 0");
  DetectionProblem p;
  p.V = amplitude * V;
  p.y = y;
  p.amplitude = amplitude;
  p.noise_var = noise_var;
  return p;
}

// tr{V^T V a a^T} - 2 a^T V^T y; equals ||y - V a||^2 - ||y||^2.
inline double objective(const Eigen::MatrixXd& V, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& a) {
  const Eigen::VectorXd Va = V * a;
  return Va.squaredNorm() - 2.0 * y.dot(Va);
}

inline double objective(const DetectionProblem& p, const Eigen::VectorXd& a) {
  return objective(p.V, p.y, a);
}

struct SolverConfig {
  double tol = 1e-5;
  int max_iter = 2000;
  double over_relax = 1.6;
  double rho = 1.0;
  bool adaptive_rho = true;
  int q = 100;               // Gaussian-randomization draw count
  std::uint64_t rng_seed = 1;
};

struct SdpSolution {
  Eigen::VectorXd a_relaxed;
  Eigen::MatrixXd A_relaxed;
  double objective = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

namespace detail {

inline Eigen::MatrixXd psd_project(const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd S =
      es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (S + S.transpose());
}

}  // namespace detail

// Minimizes tr{V^T V A} - 2 a^T V^T y over the lifted variable
// Z = [[A, a], [a^T, 1]] subject to diag(Z) = 1 and Z PSD, by operator
// splitting: an affine step that re-pins the unit diagonal alternates with
// an eigendecomposition-based projection onto the PSD cone, plus scaled dual
// updates and over-relaxation. The returned point is re-scaled onto the
// unit-diagonal slice of the cone, so it is feasible to machine precision.
inline SdpSolution solve_sdp(const DetectionProblem& p, const SolverConfig& cfg) {
  const int n = p.n();
  const int m = n + 1;

  const Eigen::MatrixXd Q = p.V.transpose() * p.V;
  const Eigen::VectorXd b = p.V.transpose() * p.y;

  Eigen::MatrixXd C(m, m);
  C.topLeftCorner(n, n) = Q;
  C.topRightCorner(n, 1) = -b;
  C.bottomLeftCorner(1, n) = -b.transpose();
  C(n, n) = 0.0;
  double cscale = C.norm() / m;
  if (!(cscale > 1e-300)) cscale = 1.0;
  const Eigen::MatrixXd Cn = C / cscale;

  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd Z(m, m), Zr(m, m), Snew(m, m);

  double rho = cfg.rho;
  const double al = cfg.over_relax;
  bool converged = false;
  int it = 0;
  double last_res = 0.0;

  for (it = 1; it <= cfg.max_iter; ++it) {
    Z = S - U - Cn / rho;
    Z.diagonal().setOnes();

    Zr = al * Z + (1.0 - al) * S;
    Snew = detail::psd_project(Zr + U);
    U += Zr - Snew;

    const double r_norm = (Z - Snew).norm();
    const double s_norm = rho * (Snew - S).norm();
    S = Snew;

    const double eps_pri = cfg.tol * (m + std::max(Z.norm(), S.norm()));
    const double eps_dual = cfg.tol * (m + rho * U.norm());
    last_res = std::max(r_norm / eps_pri, s_norm / eps_dual);
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      converged = true;
      break;
    }
    if (cfg.adaptive_rho && it % 10 == 0) {
      if (r_norm > 10.0 * s_norm && rho < 1e6) {
        rho *= 2.0;
        U *= 0.5;
      } else if (s_norm > 10.0 * r_norm && rho > 1e-4) {
        rho *= 0.5;
        U *= 2.0;
      }
    }
  }

  // congruence rescale onto the unit diagonal keeps PSD exactly
  const Eigen::VectorXd d = S.diagonal().cwiseMax(1e-12);
  const Eigen::VectorXd dr = d.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd Zh = dr.asDiagonal() * S * dr.asDiagonal();

  SdpSolution sol;
  sol.a_relaxed = Zh.topRightCorner(n, 1);
  sol.A_relaxed = Zh.topLeftCorner(n, n);
  sol.objective = Q.cwiseProduct(sol.A_relaxed).sum() - 2.0 * b.dot(sol.a_relaxed);
  sol.iterations = std::min(it, cfg.max_iter);
  sol.residual = last_res;
  sol.converged = converged;
  return sol;
}

struct CandidateSet {
  std::vector<Eigen::VectorXd> sequences;
  std::vector<double> objectives;
  int best_index = 0;
};

inline Eigen::VectorXd sign_quantize(const Eigen::VectorXd& x) {
  Eigen::VectorXd s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s[i] = x[i] >= 0.0 ? 1.0 : -1.0;
  return s;
}

// Draws q candidates from N(a', A' - a' a'^T) (covariance eigendecomposed
// with negative eigenvalues floored at zero), quantizes by sign, and keeps
// the direct rounding of a' as candidate 0 so randomization never does worse
// than rounding.
inline CandidateSet gaussian_randomization(const SdpSolution& sol,
                                           const DetectionProblem& p, int q,
                                           std::uint64_t rng_seed) {
  if (q < 1) throw std::invalid_argument("q must be >= 1");
  const int n = p.n();

  Eigen::MatrixXd Sigma = sol.A_relaxed - sol.a_relaxed * sol.a_relaxed.transpose();
  Sigma = 0.5 * (Sigma + Sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const bool degenerate = lam.maxCoeff() <= 1e-12;
  const Eigen::MatrixXd B =
      es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  CandidateSet cs;
  cs.sequences.reserve(q + 1);
  cs.objectives.reserve(q + 1);

  const Eigen::VectorXd rounded = sign_quantize(sol.a_relaxed);
  cs.sequences.push_back(rounded);
  cs.objectives.push_back(objective(p, rounded));

  Rng rng(rng_seed);
  Eigen::VectorXd xi(n);
  for (int draw = 0; draw < q; ++draw) {
    if (degenerate) {
      cs.sequences.push_back(rounded);
      cs.objectives.push_back(cs.objectives[0]);
      continue;
    }
    for (int i = 0; i < n; ++i) xi[i] = rng.gaussian();
    const Eigen::VectorXd cand = sign_quantize(sol.a_relaxed + B * xi);
    cs.sequences.push_back(cand);
    cs.objectives.push_back(objective(p, cand));
  }

  cs.best_index = 0;
  for (std::size_t i = 1; i < cs.objectives.size(); ++i)
    if (cs.objectives[i] < cs.objectives[cs.best_index])
      cs.best_index = static_cast<int>(i);
  return cs;
}

inline Eigen::VectorXd detect_hard(const DetectionProblem& p,
                                   const SolverConfig& cfg) {
  const SdpSolution sol = solve_sdp(p, cfg);
  const CandidateSet cs = gaussian_randomization(sol, p, cfg.q, cfg.rng_seed);
  return cs.sequences[cs.best_index];
}

}  // namespace ftn
