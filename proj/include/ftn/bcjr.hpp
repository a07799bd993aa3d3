#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ftn/common.hpp"
#include "ftn/waveform.hpp"

namespace ftn {

// Trellis over the truncated causal ISI response: state = last M symbols,
// input = current symbol, branch output = amplitude * sum v_k a_{t-k} over
// the first M+1 steady-state taps of V. State bit j set means a_{t-1-j} = +1;
// input index 1 means a_t = +1.
struct IsiTrellis {
  int memory = 0;
  int n_states = 1;
  std::vector<double> taps;        // amplitude folded in
  std::vector<double> branch_out;  // [state * 2 + input]
};

inline IsiTrellis build_trellis(const IsiModel& isi, int M,
                                double amplitude = 1.0) {
  if (M < 0 || M > 12)
    throw std::invalid_argument("trellis memory must be in [0, 12]");
  const std::vector<double> raw = steady_state_taps(isi);
  if (M >= static_cast<int>(raw.size()))
    throw std::invalid_argument("trellis memory exceeds ISI length");

  IsiTrellis tr;
  tr.memory = M;
  tr.n_states = 1 << M;
  tr.taps.resize(M + 1);
  for (int k = 0; k <= M; ++k) tr.taps[k] = amplitude * raw[k];

  tr.branch_out.resize(tr.n_states * 2);
  for (int s = 0; s < tr.n_states; ++s) {
    double past = 0.0;
    for (int j = 0; j < M; ++j)
      past += tr.taps[j + 1] * (((s >> j) & 1) ? 1.0 : -1.0);
    tr.branch_out[s * 2 + 0] = past - tr.taps[0];
    tr.branch_out[s * 2 + 1] = past + tr.taps[0];
  }
  return tr;
}

struct BcjrDebug {
  std::vector<double> log_norm;  // per-step posterior log-sum, 0 when normalized
};

// Log-domain forward-backward over the full padded observation. The first
// and last `guard` inputs are known +1 symbols (frame padding), the virtual
// past before the frame is all +1, so recursions start and end in the
// all-ones state. Returns LLRs log p(a_t=+1|y) - log p(a_t=-1|y) for the
// payload positions only.
inline std::vector<double> bcjr_llrs(const IsiTrellis& tr,
                                     const Eigen::VectorXd& y, double noise_var,
                                     int guard, BcjrDebug* debug = nullptr) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise_var must be > 0");
  const int T = static_cast<int>(y.size());
  if (2 * guard > T) throw std::invalid_argument("guard exceeds frame");
  const int S = tr.n_states;
  const int mask = S - 1;
  const double inv2v = 1.0 / (2.0 * noise_var);

  auto forced = [&](int t) { return t < guard || t >= T - guard; };
  auto metric = [&](int t, int s, int in) {
    const double d = y[t] - tr.branch_out[s * 2 + in];
    return -d * d * inv2v;
  };

  std::vector<double> alpha(static_cast<std::size_t>(T + 1) * S, kNegInf);
  std::vector<double> beta(static_cast<std::size_t>(T + 1) * S, kNegInf);
  alpha[mask] = 0.0;  // all-ones state
  for (int t = 0; t < T; ++t) {
    const double* at = &alpha[static_cast<std::size_t>(t) * S];
    double* an = &alpha[static_cast<std::size_t>(t + 1) * S];
    const int in_lo = forced(t) ? 1 : 0;
    for (int s = 0; s < S; ++s) {
      if (at[s] == kNegInf) continue;
      for (int in = in_lo; in < 2; ++in) {
        const int ns = ((s << 1) | in) & mask;
        an[ns] = logaddexp(an[ns], at[s] + metric(t, s, in));
      }
    }
  }
  for (int s = 0; s < S; ++s) beta[static_cast<std::size_t>(T) * S + s] = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    double* bt = &beta[static_cast<std::size_t>(t) * S];
    const double* bn = &beta[static_cast<std::size_t>(t + 1) * S];
    const int in_lo = forced(t) ? 1 : 0;
    for (int s = 0; s < S; ++s) {
      double acc = kNegInf;
      for (int in = in_lo; in < 2; ++in) {
        const int ns = ((s << 1) | in) & mask;
        if (bn[ns] == kNegInf) continue;
        acc = logaddexp(acc, metric(t, s, in) + bn[ns]);
      }
      bt[s] = acc;
    }
  }

  if (debug) {
    double logZ = kNegInf;
    for (int s = 0; s < S; ++s)
      logZ = logaddexp(logZ, alpha[static_cast<std::size_t>(T) * S + s]);
    debug->log_norm.assign(T + 1, 0.0);
    for (int t = 0; t <= T; ++t) {
      double acc = kNegInf;
      for (int s = 0; s < S; ++s)
        acc = logaddexp(acc, alpha[static_cast<std::size_t>(t) * S + s] +
                                 beta[static_cast<std::size_t>(t) * S + s]);
      debug->log_norm[t] = acc - logZ;
    }
  }

  std::vector<double> llrs;
  llrs.reserve(T - 2 * guard);
  for (int t = guard; t < T - guard; ++t) {
    const double* at = &alpha[static_cast<std::size_t>(t) * S];
    const double* bn = &beta[static_cast<std::size_t>(t + 1) * S];
    double num = kNegInf, den = kNegInf;
    for (int s = 0; s < S; ++s) {
      if (at[s] == kNegInf) continue;
      const int np = ((s << 1) | 1) & mask;
      const int nm = (s << 1) & mask;
      if (bn[np] != kNegInf)
        num = logaddexp(num, at[s] + metric(t, s, 1) + bn[np]);
      if (bn[nm] != kNegInf)
        den = logaddexp(den, at[s] + metric(t, s, 0) + bn[nm]);
    }
    llrs.push_back(num - den);
  }
  return llrs;
}

}  // namespace ftn
