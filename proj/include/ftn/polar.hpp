#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ftn/common.hpp"

namespace ftn {

struct PolarCode {
  int n_bits = 0;
  int k_bits = 0;
  int stages = 0;
  std::vector<std::uint8_t> frozen_mask;  // 1 = frozen to 0
};

struct ScResult {
  std::vector<std::uint8_t> info_bits;
  std::vector<std::uint8_t> decoded_u;
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Bit-channel reliabilities by the Bhattacharyya recursion in log domain:
// the degraded branch maps z -> 2z - z^2 and the upgraded branch z -> z^2,
// starting from the BPSK-AWGN value z0 = exp(-Es/N0) at the design SNR.
inline std::vector<double> bhattacharyya_log(int N, double design_snr_db) {
  std::vector<double> logz{-std::pow(10.0, design_snr_db / 10.0)};
  while (static_cast<int>(logz.size()) < N) {
    std::vector<double> next(2 * logz.size());
    for (std::size_t i = 0; i < logz.size(); ++i) {
      const double lz = logz[i];
      next[2 * i] = lz + std::log(2.0 - std::exp(lz));
      next[2 * i + 1] = 2.0 * lz;
    }
    logz.swap(next);
  }
  return logz;
}

inline PolarCode construct(int N, int K, double design_snr_db = 2.0) {
  if (!is_power_of_two(N) || N < 2)
    throw std::invalid_argument("codeword length must be a power of two >= 2");
  if (K <= 0 || K > N) throw std::invalid_argument("0 < K <= N required");

  const std::vector<double> logz = bhattacharyya_log(N, design_snr_db);
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logz[a] < logz[b]; });

  PolarCode code;
  code.n_bits = N;
  code.k_bits = K;
  code.stages = 0;
  while ((1 << code.stages) < N) ++code.stages;
  code.frozen_mask.assign(N, 1);
  for (int i = 0; i < K; ++i) code.frozen_mask[order[i]] = 0;
  return code;
}

// In-place GF(2) butterfly: multiplies x by the s-fold Kronecker power of
// F = [[1,0],[1,1]] without materializing the generator matrix.
inline void polar_transform(std::vector<std::uint8_t>& x) {
  const int N = static_cast<int>(x.size());
  for (int len = 1; len < N; len <<= 1)
    for (int j = 0; j < N; ++j)
      if ((j & len) == 0) x[j] = x[j] ^ x[j | len];
}

inline std::vector<std::uint8_t> encode(const PolarCode& code,
                                        const std::vector<std::uint8_t>& info_bits) {
  if (static_cast<int>(info_bits.size()) != code.k_bits)
    throw std::invalid_argument("info length must equal K");
  std::vector<std::uint8_t> u(code.n_bits, 0);
  int pos = 0;
  for (int i = 0; i < code.n_bits; ++i)
    if (!code.frozen_mask[i]) u[i] = info_bits[pos++] & 1;
  polar_transform(u);
  return u;
}

// Successive-cancellation decoder. Channel LLRs use log p(bit 0)/p(bit 1);
// combining rules are the min-sum f and the sign-adjusted sum g; ties and
// frozen positions decode to 0. One decode per instance at a time.
class ScDecoder {
 public:
  explicit ScDecoder(const PolarCode& code) : code_(&code) {
    llr_buf_.resize(code.stages);
    sum_buf_.resize(code.stages);
    for (int d = 0; d < code.stages; ++d) {
      llr_buf_[d].resize(code.n_bits >> (d + 1));
      sum_buf_[d].resize(code.n_bits >> (d + 1));
    }
    u_hat_.resize(code.n_bits);
  }

  ScResult decode(const std::vector<double>& channel_llrs,
                  double clamp = 40.0) {
    const int N = code_->n_bits;
    if (static_cast<int>(channel_llrs.size()) != N)
      throw std::invalid_argument("LLR length must equal N");
    std::vector<double> llrs = channel_llrs;
    for (double& v : llrs) {
      if (std::isnan(v)) throw std::invalid_argument("LLR input is NaN");
      v = std::clamp(v, -clamp, clamp);
    }
    descend(0, 0, N, llrs.data());
    ScResult out;
    out.decoded_u = u_hat_;
    out.info_bits.reserve(code_->k_bits);
    for (int i = 0; i < N; ++i)
      if (!code_->frozen_mask[i]) out.info_bits.push_back(u_hat_[i]);
    return out;
  }

 private:
  static double f_comb(double mu, double nu) {
    const double s = ((mu >= 0.0) == (nu >= 0.0)) ? 1.0 : -1.0;
    return s * std::min(std::abs(mu), std::abs(nu));
  }
  static double g_comb(double mu, double nu, int u_sum) {
    return (u_sum ? -mu : mu) + nu;
  }

  void descend(int depth, int lo, int len, const double* llr) {
    if (len == 1) {
      u_hat_[lo] = code_->frozen_mask[lo] ? 0 : (llr[0] >= 0.0 ? 0 : 1);
      return;
    }
    const int half = len / 2;
    double* buf = llr_buf_[depth].data();
    for (int i = 0; i < half; ++i) buf[i] = f_comb(llr[i], llr[i + half]);
    descend(depth + 1, lo, half, buf);

    // partial sums: re-encode the decided left half
    std::uint8_t* ps = sum_buf_[depth].data();
    for (int i = 0; i < half; ++i) ps[i] = u_hat_[lo + i];
    for (int l = 1; l < half; l <<= 1)
      for (int j = 0; j < half; ++j)
        if ((j & l) == 0) ps[j] = ps[j] ^ ps[j | l];

    for (int i = 0; i < half; ++i) buf[i] = g_comb(llr[i], llr[i + half], ps[i]);
    descend(depth + 1, lo + half, half, buf);
  }

  const PolarCode* code_;
  std::vector<std::vector<double>> llr_buf_;
  std::vector<std::vector<std::uint8_t>> sum_buf_;
  std::vector<std::uint8_t> u_hat_;
};

inline ScResult sc_decode(const PolarCode& code,
                          const std::vector<double>& channel_llrs,
                          double clamp = 40.0) {
  ScDecoder dec(code);
  return dec.decode(channel_llrs, clamp);
}

inline std::vector<int> frozen_indices(const PolarCode& code) {
  std::vector<int> idx;
  for (int i = 0; i < code.n_bits; ++i)
    if (code.frozen_mask[i]) idx.push_back(i);
  return idx;
}

inline PolarCode code_from_frozen(int N, const std::vector<int>& frozen) {
  if (!is_power_of_two(N) || N < 2)
    throw std::invalid_argument("codeword length must be a power of two >= 2");
  PolarCode code;
  code.n_bits = N;
  code.stages = 0;
  while ((1 << code.stages) < N) ++code.stages;
  code.frozen_mask.assign(N, 0);
  for (int i : frozen) {
    if (i < 0 || i >= N) throw std::invalid_argument("frozen index out of range");
    code.frozen_mask[i] = 1;
  }
  code.k_bits = N - static_cast<int>(frozen.size());
  if (code.k_bits <= 0) throw std::invalid_argument("no information positions left");
  return code;
}

}  // namespace ftn
