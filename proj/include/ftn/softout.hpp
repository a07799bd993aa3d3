#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "ftn/common.hpp"
#include "ftn/sdr.hpp"

namespace ftn {

struct SoftConfig {
  int p_best = 70;
  double llr_clamp = 30.0;
};

struct ScoredSequence {
  Eigen::VectorXd seq;
  double objective = 0.0;
};

inline std::vector<std::uint64_t> seq_key(const Eigen::VectorXd& a) {
  return pack_signs(std::span<const double>(a.data(), a.size()));
}

// Lowest-objective prefix of the candidate set with exact duplicates removed;
// ties broken by candidate index so results are stable.
inline std::vector<ScoredSequence> select_p_best(const CandidateSet& cands,
                                                 int P) {
  if (P < 1) throw std::invalid_argument("P must be >= 1");
  std::vector<int> order(cands.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return cands.objectives[a] < cands.objectives[b];
  });

  std::vector<ScoredSequence> out;
  std::set<std::vector<std::uint64_t>> seen;
  for (int idx : order) {
    if (static_cast<int>(out.size()) >= P) break;
    if (!seen.insert(seq_key(cands.sequences[idx])).second) continue;
    out.push_back({cands.sequences[idx], cands.objectives[idx]});
  }
  return out;
}

// log p(y | a, V) up to the constant normalizer, which cancels in LLR ratios.
inline double sequence_loglik(const DetectionProblem& p,
                              const Eigen::VectorXd& a) {
  if (!(p.noise_var > 0.0)) throw std::invalid_argument("noise_var must be > 0");
  return -(p.y - p.V * a).squaredNorm() / (2.0 * p.noise_var);
}

// Augments the pool with every Hamming-distance-1 neighbor of every pool
// sequence (at most P*N additions after dedup). Flip objectives come from
// the rank-one update of the quadratic form, not a fresh matrix product.
inline std::vector<ScoredSequence> empty_set_repair(
    const std::vector<ScoredSequence>& pool, const DetectionProblem& p) {
  const int n = p.n();
  const Eigen::MatrixXd Q = p.V.transpose() * p.V;
  const Eigen::VectorXd b = p.V.transpose() * p.y;

  std::vector<ScoredSequence> out = pool;
  std::set<std::vector<std::uint64_t>> seen;
  for (const auto& e : pool) seen.insert(seq_key(e.seq));

  Eigen::VectorXd g(n);
  for (const auto& e : pool) {
    g.noalias() = Q * e.seq;
    for (int i = 0; i < n; ++i) {
      const double si = e.seq[i];
      const double delta = -4.0 * si * g[i] + 4.0 * Q(i, i) + 4.0 * si * b[i];
      Eigen::VectorXd flipped = e.seq;
      flipped[i] = -si;
      if (!seen.insert(seq_key(flipped)).second) continue;
      out.push_back({std::move(flipped), e.objective + delta});
    }
  }
  return out;
}

// Per-bit LLRs from the candidate pool: log-sum-exp of sequence likelihoods
// with the bit at +1 minus the same with the bit at -1, under a uniform
// prior over the pool (the prior cancels). If any bit lacks a sign
// representative the pool is repaired once, globally, before computing.
inline std::vector<double> compute_llrs(const DetectionProblem& p,
                                        const std::vector<ScoredSequence>& pbest,
                                        const SoftConfig& cfg) {
  if (pbest.empty()) throw std::invalid_argument("candidate pool is empty");
  const int n = p.n();

  bool needs_repair = false;
  for (int i = 0; i < n && !needs_repair; ++i) {
    bool pos = false, neg = false;
    for (const auto& e : pbest) (e.seq[i] > 0.0 ? pos : neg) = true;
    needs_repair = !(pos && neg);
  }
  const std::vector<ScoredSequence> pool =
      needs_repair ? empty_set_repair(pbest, p) : pbest;

  const double ysq = p.y.squaredNorm();
  const double inv2v = 1.0 / (2.0 * p.noise_var);
  std::vector<double> pos(n, kNegInf), neg(n, kNegInf);
  for (const auto& e : pool) {
    const double ll = -(e.objective + ysq) * inv2v;
    for (int i = 0; i < n; ++i) {
      double& acc = e.seq[i] > 0.0 ? pos[i] : neg[i];
      acc = logaddexp(acc, ll);
    }
  }

  std::vector<double> llrs(n);
  for (int i = 0; i < n; ++i)
    llrs[i] = std::clamp(pos[i] - neg[i], -cfg.llr_clamp, cfg.llr_clamp);
  return llrs;
}

// Exact per-bit LLRs by Gray-code enumeration of all 2^n sequences with
// incremental objective updates. Test oracle; guarded to small n.
inline std::vector<double> exact_llr_oracle(const DetectionProblem& p) {
  const int n = p.n();
  if (n > 20) throw std::invalid_argument("exact LLR enumeration limited to n <= 20");
  if (!(p.noise_var > 0.0)) throw std::invalid_argument("noise_var must be > 0");

  const Eigen::MatrixXd Q = p.V.transpose() * p.V;
  const Eigen::VectorXd b = p.V.transpose() * p.y;
  const double ysq = p.y.squaredNorm();
  const double inv2v = 1.0 / (2.0 * p.noise_var);

  Eigen::VectorXd a = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd g = Q * a;
  double obj = a.dot(g) - 2.0 * b.dot(a);

  std::vector<double> pos(n, kNegInf), neg(n, kNegInf);
  const std::uint64_t total = 1ULL << n;
  for (std::uint64_t step = 0;; ++step) {
    const double ll = -(obj + ysq) * inv2v;
    for (int i = 0; i < n; ++i) {
      double& acc = a[i] > 0.0 ? pos[i] : neg[i];
      acc = logaddexp(acc, ll);
    }
    if (step + 1 == total) break;
    const int i = std::countr_zero(step + 1);
    const double si = a[i];
    obj += -4.0 * si * g[i] + 4.0 * Q(i, i) + 4.0 * si * b[i];
    g.noalias() -= 2.0 * si * Q.col(i);
    a[i] = -si;
  }

  std::vector<double> llrs(n);
  for (int i = 0; i < n; ++i) llrs[i] = pos[i] - neg[i];
  return llrs;
}

}  // namespace ftn
