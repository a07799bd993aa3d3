#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ftn/common.hpp"

namespace ftn {

struct PulseSpec {
  double rolloff = 0.3;
  double tau = 0.8;
  int samples_per_symbol = 0;
  int truncation_symbols = 16;
};

inline void validate(const PulseSpec& spec) {
  if (!(spec.rolloff >= 0.0 && spec.rolloff <= 1.0))
    throw std::invalid_argument("rolloff must be in [0,1]");
  if (!(spec.tau > 0.0 && spec.tau <= 1.0))
    throw std::invalid_argument("tau must be in (0,1]");
  if (spec.samples_per_symbol < 1)
    throw std::invalid_argument("samples_per_symbol must be positive");
  if (spec.truncation_symbols < 1)
    throw std::invalid_argument("truncation_symbols must be positive");
}

// Smallest oversampling factor >= base/tau for which a tau-spaced shift is
// an integer number of samples, so autocorrelation needs no interpolation.
inline int compatible_oversampling(double tau, int base = 10) {
  const int start = std::max(1, static_cast<int>(std::lround(base / tau)));
  for (int s = start; s <= start + 400; ++s) {
    const double shift = tau * s;
    if (std::abs(shift - std::lround(shift)) < 1e-9) return s;
  }
  throw std::invalid_argument("no sample-aligned oversampling found for tau");
}

inline PulseSpec make_pulse_spec(double tau, double rolloff) {
  PulseSpec spec;
  spec.rolloff = rolloff;
  spec.tau = tau;
  spec.truncation_symbols = 16;
  if (!(rolloff >= 0.0 && rolloff <= 1.0))
    throw std::invalid_argument("rolloff must be in [0,1]");
  if (!(tau > 0.0 && tau <= 1.0))
    throw std::invalid_argument("tau must be in (0,1]");
  spec.samples_per_symbol = compatible_oversampling(tau);
  return spec;
}

// Closed-form root-raised-cosine impulse response, symbol period T = 1,
// with the removable singularities at t = 0 and |t| = 1/(4a) evaluated by
// their analytic limits.
inline double rrc_value(double t, double a) {
  if (std::abs(t) < 1e-8) {
    return 1.0 - a + 4.0 * a / M_PI;
  }
  if (a > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * a)) < 1e-8) {
    const double c = M_PI / (4.0 * a);
    return (a / std::sqrt(2.0)) *
           ((1.0 + 2.0 / M_PI) * std::sin(c) + (1.0 - 2.0 / M_PI) * std::cos(c));
  }
  const double num =
      std::sin(M_PI * t * (1.0 - a)) + 4.0 * a * t * std::cos(M_PI * t * (1.0 + a));
  const double den = M_PI * t * (1.0 - 16.0 * a * a * t * t);
  return num / den;
}

// Sampled unit-energy RRC pulse, symmetric about its center sample.
inline std::vector<double> rrc_pulse(const PulseSpec& spec) {
  validate(spec);
  const int side = spec.truncation_symbols * spec.samples_per_symbol;
  const double dt = 1.0 / spec.samples_per_symbol;
  std::vector<double> h(2 * side + 1);
  for (int i = 0; i <= side; ++i) {
    const double v = rrc_value(i * dt, spec.rolloff);
    h[side + i] = v;
    h[side - i] = v;
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  energy *= dt;
  const double scale = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= scale;
  return h;
}

// One-sided sampled autocorrelation gamma(k*tau*T), k = 0..L, where L is the
// last lag at or above gamma_floor; sub-floor taps inside the range are
// zeroed so the ISI length is well defined.
inline std::vector<double> autocorrelation(const std::vector<double>& pulse,
                                           const PulseSpec& spec,
                                           double gamma_floor = 1e-4) {
  validate(spec);
  const double shift_f = spec.tau * spec.samples_per_symbol;
  const long shift = std::lround(shift_f);
  if (std::abs(shift_f - static_cast<double>(shift)) > 1e-9)
    throw std::invalid_argument(
        "tau * samples_per_symbol must be an integer number of samples");
  const double dt = 1.0 / spec.samples_per_symbol;
  const long n = static_cast<long>(pulse.size());
  std::vector<double> g;
  for (long k = 0; k * shift < n; ++k) {
    double acc = 0.0;
    for (long i = k * shift; i < n; ++i) acc += pulse[i] * pulse[i - k * shift];
    g.push_back(acc * dt);
  }
  std::size_t L = 0;
  for (std::size_t k = 1; k < g.size(); ++k)
    if (std::abs(g[k]) >= gamma_floor) L = k;
  g.resize(L + 1);
  for (std::size_t k = 1; k <= L; ++k)
    if (std::abs(g[k]) < gamma_floor) g[k] = 0.0;
  return g;
}

class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(const std::string& what, double min_eigenvalue)
      : std::runtime_error(what), min_eigenvalue(min_eigenvalue) {}
  double min_eigenvalue;
};

// gamma holds one-sided lags; gamma(-k) = gamma(k). V is lower-triangular
// with V^T V = Gamma + eps*I: take the upper factor U of Gamma = U U^T
// (flip of the standard Cholesky, exact because a symmetric Toeplitz matrix
// is persymmetric) and set V = U^T.
struct IsiModel {
  std::vector<double> gamma;
  Eigen::MatrixXd Gamma;
  Eigen::MatrixXd V;
  int L = 0;
  int N = 0;
  double epsilon = 0.0;
  double min_eigenvalue = 0.0;
};

inline IsiModel build_isi_model(const std::vector<double>& gamma, int N) {
  if (gamma.empty()) throw std::invalid_argument("gamma must be nonempty");
  if (N < 2) throw std::invalid_argument("N must be >= 2");
  const int L = static_cast<int>(gamma.size()) - 1;

  IsiModel m;
  m.gamma = gamma;
  m.L = L;
  m.N = N;
  m.Gamma = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const int d = std::abs(i - j);
      if (d <= L) m.Gamma(i, j) = gamma[d];
    }

  // The lag-window floor can leave Gamma slightly indefinite when the folded
  // pulse spectrum has a null (tau below 1/(1+rolloff)), so the ladder must
  // reach one decade above that perturbation scale.
  double eps = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool ok = false;
  while (true) {
    Eigen::MatrixXd Greg = m.Gamma;
    Greg.diagonal().array() += eps;
    llt.compute(Greg);
    if (llt.info() == Eigen::Success) {
      ok = true;
      break;
    }
    if (eps >= 1e-3) break;
    eps = (eps == 0.0) ? 1e-10 : eps * 10.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.Gamma);
  const double min_eig = es.eigenvalues().minCoeff();
  if (!ok)
    throw FactorizationError(
        "ISI matrix is not factorizable even with maximum regularization; "
        "smallest eigenvalue " +
            std::to_string(min_eig),
        min_eig);
  m.epsilon = eps;
  m.min_eigenvalue = min_eig + eps;
  if (!(m.min_eigenvalue > 0.0))
    throw FactorizationError("regularized ISI matrix is not positive definite",
                             m.min_eigenvalue);

  const Eigen::MatrixXd Lc = llt.matrixL();
  m.V = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j <= i; ++j) m.V(i, j) = Lc(N - 1 - j, N - 1 - i);
  return m;
}

// Steady-state causal taps v_0..v_L of the whitened response: the first row
// of V with full support, which corresponds to the most-converged column of
// the underlying Cholesky factor.
inline std::vector<double> steady_state_taps(const IsiModel& m) {
  const int r = std::min(m.L, m.N - 1);
  std::vector<double> taps(r + 1);
  for (int k = 0; k <= r; ++k) taps[k] = m.V(r, r - k);
  return taps;
}

// Smallest memory M whose discarded tail holds under 1% of the tap energy,
// capped for trellis tractability.
inline int default_memory(const IsiModel& m, double tail_fraction = 0.01,
                          int cap = 10) {
  const std::vector<double> taps = steady_state_taps(m);
  const int top = static_cast<int>(taps.size()) - 1;
  double total = 0.0;
  for (double v : taps) total += v * v;
  double tail = 0.0;
  int memory = std::min(top, cap);
  for (int M = top - 1; M >= 0; --M) {
    tail += taps[M + 1] * taps[M + 1];
    if (tail >= tail_fraction * total) break;
    memory = std::min(M, cap);
  }
  return memory;
}

}  // namespace ftn
