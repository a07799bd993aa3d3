#pragma once

// Independent reference implementations used by self-tests and the test
// suite: a textbook recursive SC decoder and brute-force sequence search.
// Deliberately written in a different style from the production code paths
// (vector recursion, direct norm evaluation) so agreement is meaningful.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ftn/common.hpp"
#include "ftn/polar.hpp"
#include "ftn/rng.hpp"
#include "ftn/sdr.hpp"
#include "ftn/waveform.hpp"

namespace ftn {

namespace detail {

struct RefScNode {
  std::vector<std::uint8_t> u;  // decisions, natural order
  std::vector<std::uint8_t> x;  // re-encoded codeword of this subtree
};

inline RefScNode reference_sc_node(const std::vector<double>& llr,
                                   const std::vector<std::uint8_t>& frozen,
                                   int lo) {
  const int len = static_cast<int>(llr.size());
  if (len == 1) {
    const std::uint8_t u =
        frozen[lo] ? std::uint8_t{0} : (llr[0] >= 0.0 ? std::uint8_t{0} : std::uint8_t{1});
    return {{u}, {u}};
  }
  const int half = len / 2;
  std::vector<double> upper(half);
  for (int i = 0; i < half; ++i) {
    const double mu = llr[i], nu = llr[i + half];
    const bool flip = (mu < 0.0) != (nu < 0.0);
    upper[i] = (flip ? -1.0 : 1.0) * std::min(std::abs(mu), std::abs(nu));
  }
  const RefScNode left = reference_sc_node(upper, frozen, lo);

  std::vector<double> lower(half);
  for (int i = 0; i < half; ++i)
    lower[i] = (left.x[i] ? -llr[i] : llr[i]) + llr[i + half];
  const RefScNode right = reference_sc_node(lower, frozen, lo + half);

  RefScNode out;
  out.u.reserve(len);
  out.u.insert(out.u.end(), left.u.begin(), left.u.end());
  out.u.insert(out.u.end(), right.u.begin(), right.u.end());
  out.x.resize(len);
  for (int i = 0; i < half; ++i) {
    out.x[i] = left.x[i] ^ right.x[i];
    out.x[i + half] = right.x[i];
  }
  return out;
}

}  // namespace detail

inline ScResult reference_sc_decode(const PolarCode& code,
                                    const std::vector<double>& channel_llrs,
                                    double clamp = 40.0) {
  std::vector<double> llrs = channel_llrs;
  for (double& v : llrs) v = std::clamp(v, -clamp, clamp);
  const detail::RefScNode root =
      detail::reference_sc_node(llrs, code.frozen_mask, 0);
  ScResult out;
  out.decoded_u = root.u;
  for (int i = 0; i < code.n_bits; ++i)
    if (!code.frozen_mask[i]) out.info_bits.push_back(root.u[i]);
  return out;
}

struct MlseResult {
  Eigen::VectorXd best;
  double min_objective = 0.0;
};

// Brute-force minimum of ||y - V a||^2 - ||y||^2 over all sign sequences,
// evaluated directly from the residual norm.
inline MlseResult exhaustive_mlse(const DetectionProblem& p) {
  const int n = p.n();
  if (n > 20) throw std::invalid_argument("exhaustive search limited to n <= 20");
  const double ysq = p.y.squaredNorm();
  MlseResult res;
  res.min_objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd a(n);
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    for (int i = 0; i < n; ++i) a[i] = ((mask >> i) & 1ULL) ? 1.0 : -1.0;
    const double obj = (p.y - p.V * a).squaredNorm() - ysq;
    if (obj < res.min_objective) {
      res.min_objective = obj;
      res.best = a;
    }
  }
  return res;
}

inline Eigen::VectorXd random_sign_vector(int n, Rng& rng) {
  Eigen::VectorXd a(n);
  for (int i = 0; i < n; ++i) a[i] = rng.bit() ? 1.0 : -1.0;
  return a;
}

// CandidateSet holding every sign sequence, for pool-convergence tests.
inline CandidateSet all_sequences_candidates(const DetectionProblem& p) {
  const int n = p.n();
  if (n > 16) throw std::invalid_argument("full candidate enumeration limited to n <= 16");
  CandidateSet cs;
  Eigen::VectorXd a(n);
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    for (int i = 0; i < n; ++i) a[i] = ((mask >> i) & 1ULL) ? 1.0 : -1.0;
    cs.sequences.push_back(a);
    cs.objectives.push_back(objective(p, a));
  }
  cs.best_index = 0;
  for (std::size_t i = 1; i < cs.objectives.size(); ++i)
    if (cs.objectives[i] < cs.objectives[cs.best_index])
      cs.best_index = static_cast<int>(i);
  return cs;
}

struct TestInstance {
  DetectionProblem problem;
  Eigen::VectorXd truth;
};

// Random whitened-domain instance on a prebuilt ISI model at a given Es/N0.
inline TestInstance make_test_instance(const IsiModel& isi, double amplitude,
                                       double es_n0_db, Rng& rng) {
  const double noise_var = 0.5 * std::pow(10.0, -es_n0_db / 10.0);
  const Eigen::VectorXd a = random_sign_vector(isi.N, rng);
  Eigen::VectorXd y = amplitude * (isi.V * a);
  for (int i = 0; i < isi.N; ++i) y[i] += std::sqrt(noise_var) * rng.gaussian();
  return {make_problem(isi.V, y, amplitude, noise_var), a};
}

}  // namespace ftn

#include "ftn/bcjr.hpp"

namespace ftn {

// Exact linear model of a truncated-trellis observation with forced +1
// guards and all-+1 virtual past: y = W a_payload + offset + noise, where W
// is tall (full frame rows by payload columns). Lets the enumeration oracle
// reproduce BCJR posteriors bit for bit.
inline DetectionProblem trellis_payload_problem(const IsiTrellis& tr,
                                                const Eigen::VectorXd& y,
                                                int guard, double noise_var) {
  const int T = static_cast<int>(y.size());
  const int n = T - 2 * guard;
  if (n <= 0) throw std::invalid_argument("no payload positions");
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(T, n);
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(T);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k <= tr.memory; ++k) {
      const int j = t - k - guard;  // payload index of the contributing symbol
      if (j >= 0 && j < n)
        W(t, j) = tr.taps[k];
      else
        offset[t] += tr.taps[k];  // guards and virtual past are +1
    }
  return make_problem(W, y - offset, 1.0, noise_var);
}

}  // namespace ftn
