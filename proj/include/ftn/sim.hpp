#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ftn/bcjr.hpp"
#include "ftn/common.hpp"
#include "ftn/polar.hpp"
#include "ftn/rng.hpp"
#include "ftn/sdr.hpp"
#include "ftn/softout.hpp"
#include "ftn/waveform.hpp"

namespace ftn {

enum class Detector { sosdr, hardsdr, bcjr, genie };

inline std::string detector_name(Detector d) {
  switch (d) {
    case Detector::sosdr: return "sosdr";
    case Detector::hardsdr: return "hardsdr";
    case Detector::bcjr: return "bcjr";
    case Detector::genie: return "genie";
  }
  return "?";
}

inline Detector parse_detector(const std::string& s) {
  if (s == "sosdr") return Detector::sosdr;
  if (s == "hardsdr") return Detector::hardsdr;
  if (s == "bcjr") return Detector::bcjr;
  if (s == "genie") return Detector::genie;
  throw std::invalid_argument("unknown detector: " + s);
}

struct FrameConfig {
  double tau = 0.8;
  double rolloff = 0.3;
  int n = 64;
  int k = 32;
  bool uncoded = false;
  Detector detector = Detector::sosdr;
  int q = 100;
  std::vector<int> p_list = {70};
  double design_snr_db = 2.0;
  std::uint64_t seed = 1;
  SolverConfig solver;
  SoftConfig soft;
};

// sigma^2 = N0/2 per real dimension for unit symbol energy.
inline double esn0_db_to_noise_var(double es_n0_db) {
  return 0.5 * std::pow(10.0, -es_n0_db / 10.0);
}

inline double ebn0_to_esn0_db(double eb_n0_db, int k, int n) {
  return eb_n0_db + 10.0 * std::log10(static_cast<double>(k) / n);
}

// Everything computed once per (tau, N, K) sweep corner: the ISI model over
// the padded frame, the amplitude-folded payload submodel for SDR detection,
// the BCJR trellis, and the polar code.
struct LinkModel {
  FrameConfig cfg;
  PolarCode code;       // unused when cfg.uncoded
  IsiModel isi;         // built at frame length N + 2*guard
  int guard = 0;        // known +1 padding per side (trellis memory)
  double amplitude = 1.0;
  Eigen::MatrixXd v_payload;       // unscaled payload block of V
  Eigen::VectorXd lead_correction; // amplitude * V[payload rows, guard cols] * 1
  IsiTrellis trellis;
};

inline LinkModel build_link(const FrameConfig& cfg) {
  if (cfg.n < 2) throw std::invalid_argument("block length must be >= 2");
  LinkModel m;
  m.cfg = cfg;

  const PulseSpec spec = make_pulse_spec(cfg.tau, cfg.rolloff);
  const std::vector<double> pulse = rrc_pulse(spec);
  const std::vector<double> gamma = autocorrelation(pulse, spec);

  const int L = static_cast<int>(gamma.size()) - 1;
  {
    const IsiModel probe = build_isi_model(gamma, std::max(cfg.n, 2 * L + 3));
    m.guard = default_memory(probe);
  }

  const double rate = cfg.uncoded ? 1.0 : static_cast<double>(cfg.k) / cfg.n;
  m.amplitude = std::sqrt(cfg.tau * rate);

  const int frame = cfg.n + 2 * m.guard;
  m.isi = build_isi_model(gamma, frame);
  m.v_payload = m.isi.V.block(m.guard, m.guard, cfg.n, cfg.n);
  if (m.guard > 0)
    m.lead_correction = m.amplitude * m.isi.V.block(m.guard, 0, cfg.n, m.guard) *
                        Eigen::VectorXd::Ones(m.guard);
  else
    m.lead_correction = Eigen::VectorXd::Zero(cfg.n);
  m.trellis = build_trellis(m.isi, m.guard, m.amplitude);

  if (!cfg.uncoded) m.code = construct(cfg.n, cfg.k, cfg.design_snr_db);
  return m;
}

struct BlockRecord {
  std::vector<std::uint8_t> tx_bits;      // info bits (codeword bits if uncoded)
  std::vector<std::uint8_t> tx_codeword;  // payload bits on the channel
  Eigen::VectorXd tx_symbols;             // unit +-1 payload symbols
  Eigen::VectorXd rx_whitened;            // full padded frame
  std::vector<double> llrs;               // filled by detection
  std::vector<std::uint8_t> decoded_bits; // filled by detection
  int bit_errors = 0;
  bool block_error = false;
};

// y = V a + q_w generated directly in the whitened domain; +1 guard symbols
// pad both ends of the frame for trellis termination.
inline BlockRecord transmit_block(const LinkModel& m, Rng& rng,
                                  double noise_var) {
  const FrameConfig& cfg = m.cfg;
  BlockRecord rec;
  const int n_info = cfg.uncoded ? cfg.n : cfg.k;
  rec.tx_bits.resize(n_info);
  for (int i = 0; i < n_info; ++i)
    rec.tx_bits[i] = static_cast<std::uint8_t>(rng.bit());
  rec.tx_codeword = cfg.uncoded ? rec.tx_bits : encode(m.code, rec.tx_bits);

  const int frame = cfg.n + 2 * m.guard;
  Eigen::VectorXd s = Eigen::VectorXd::Ones(frame);
  rec.tx_symbols.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    rec.tx_symbols[i] = bit_to_symbol(rec.tx_codeword[i]);
    s[m.guard + i] = rec.tx_symbols[i];
  }

  rec.rx_whitened = m.amplitude * (m.isi.V * s);
  const double sd = std::sqrt(noise_var);
  for (int i = 0; i < frame; ++i) rec.rx_whitened[i] += sd * rng.gaussian();
  return rec;
}

// Payload-rows detection model: the contribution of the known leading guard
// symbols is subtracted from y, trailing rows carry no payload information
// under the causal model and are dropped.
inline DetectionProblem payload_problem(const LinkModel& m,
                                        const BlockRecord& rec,
                                        double noise_var) {
  const Eigen::VectorXd y_sub =
      rec.rx_whitened.segment(m.guard, m.cfg.n) - m.lead_correction;
  return make_problem(m.v_payload, y_sub, m.amplitude, noise_var);
}

struct DecodeOutcome {
  std::vector<std::uint8_t> bits;
  int bit_errors = 0;
};

namespace detail {

inline DecodeOutcome decide_from_llrs(const LinkModel& m, const BlockRecord& rec,
                                      const std::vector<double>& llrs,
                                      ScDecoder* decoder) {
  DecodeOutcome out;
  if (m.cfg.uncoded) {
    out.bits.resize(m.cfg.n);
    for (int i = 0; i < m.cfg.n; ++i) out.bits[i] = llrs[i] >= 0.0 ? 0 : 1;
  } else {
    out.bits = decoder->decode(llrs).info_bits;
  }
  for (std::size_t i = 0; i < out.bits.size(); ++i)
    out.bit_errors += out.bits[i] != rec.tx_bits[i];
  return out;
}

}  // namespace detail

struct SolveDiag {
  bool valid = false;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Per-thread detection workspace; one block in flight per instance.
class BlockDetector {
 public:
  explicit BlockDetector(const LinkModel& m)
      : m_(&m), decoder_(m.cfg.uncoded ? dummy_code() : m.code) {}

  const SolveDiag& last_diag() const { return diag_; }

  // One outcome per cfg.p_list entry for sosdr, a single outcome otherwise.
  std::vector<DecodeOutcome> run(BlockRecord& rec, double noise_var,
                                 std::uint64_t gr_seed) {
    const FrameConfig& cfg = m_->cfg;
    std::vector<DecodeOutcome> outs;
    diag_ = SolveDiag{};
    switch (cfg.detector) {
      case Detector::sosdr: {
        const DetectionProblem prob = payload_problem(*m_, rec, noise_var);
        const SdpSolution sol = solve_sdp(prob, cfg.solver);
        diag_ = {true, sol.iterations, sol.residual, sol.converged};
        const CandidateSet cands =
            gaussian_randomization(sol, prob, cfg.q, gr_seed);
        for (int P : cfg.p_list) {
          const std::vector<ScoredSequence> pool = select_p_best(cands, P);
          rec.llrs = compute_llrs(prob, pool, cfg.soft);
          outs.push_back(detail::decide_from_llrs(*m_, rec, rec.llrs, &decoder_));
        }
        break;
      }
      case Detector::hardsdr: {
        const DetectionProblem prob = payload_problem(*m_, rec, noise_var);
        const SdpSolution sol = solve_sdp(prob, cfg.solver);
        diag_ = {true, sol.iterations, sol.residual, sol.converged};
        const CandidateSet cands =
            gaussian_randomization(sol, prob, cfg.q, gr_seed);
        const Eigen::VectorXd& hard = cands.sequences[cands.best_index];
        rec.llrs.resize(cfg.n);
        for (int i = 0; i < cfg.n; ++i)
          rec.llrs[i] = hard[i] > 0.0 ? cfg.soft.llr_clamp : -cfg.soft.llr_clamp;
        outs.push_back(detail::decide_from_llrs(*m_, rec, rec.llrs, &decoder_));
        break;
      }
      case Detector::bcjr: {
        rec.llrs = bcjr_llrs(m_->trellis, rec.rx_whitened, noise_var, m_->guard);
        for (double& v : rec.llrs)
          v = std::clamp(v, -cfg.soft.llr_clamp, cfg.soft.llr_clamp);
        outs.push_back(detail::decide_from_llrs(*m_, rec, rec.llrs, &decoder_));
        break;
      }
      case Detector::genie: {
        rec.llrs.resize(cfg.n);
        for (int i = 0; i < cfg.n; ++i)
          rec.llrs[i] =
              rec.tx_codeword[i] ? -cfg.soft.llr_clamp : cfg.soft.llr_clamp;
        outs.push_back(detail::decide_from_llrs(*m_, rec, rec.llrs, &decoder_));
        break;
      }
    }
    return outs;
  }

 private:
  static const PolarCode& dummy_code() {
    static const PolarCode code = construct(2, 1, 0.0);
    return code;
  }
  const LinkModel* m_;
  ScDecoder decoder_;
  SolveDiag diag_;
};

struct RunOptions {
  std::uint64_t max_blocks = 100000;
  std::uint64_t target_bit_errors = 200;
  int jobs = 1;
  std::ostream* debug = nullptr;  // per-block solver diagnostics, single worker
};

struct PointStats {
  Detector detector;
  double tau = 0.0;
  int p = 0;
  int q = 0;
  double es_n0_db = 0.0;
  double ber = 0.0;
  double bler = 0.0;
  double ci_halfwidth = 0.0;
  std::uint64_t blocks = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t block_errors = 0;
  double seconds = 0.0;
};

namespace detail {

inline std::uint64_t point_tag(const FrameConfig& cfg, double es_n0_db) {
  std::uint64_t h = fnv1a(detector_name(cfg.detector));
  h = fnv1a_u64(std::bit_cast<std::uint64_t>(cfg.tau), h);
  h = fnv1a_u64(std::bit_cast<std::uint64_t>(es_n0_db), h);
  h = fnv1a_u64(static_cast<std::uint64_t>(cfg.n), h);
  h = fnv1a_u64(static_cast<std::uint64_t>(cfg.k), h);
  h = fnv1a_u64(static_cast<std::uint64_t>(cfg.uncoded), h);
  h = fnv1a_u64(static_cast<std::uint64_t>(cfg.q), h);
  return h;
}

struct EntryAccum {
  std::uint64_t bit_errors = 0;
  std::uint64_t block_errors = 0;
};

}  // namespace detail

// Monte-Carlo sweep point. Blocks are simulated in fixed-size chunks with
// per-block seeds derived from (master seed, point tag, block index) and the
// stop rule evaluated at chunk boundaries, so results are identical for any
// worker count.
inline std::vector<PointStats> run_point(const LinkModel& m, double es_n0_db,
                                         const RunOptions& opt) {
  const FrameConfig& cfg = m.cfg;
  const double noise_var = esn0_db_to_noise_var(es_n0_db);
  const std::uint64_t tag = detail::point_tag(cfg, es_n0_db);
  const std::size_t entries =
      cfg.detector == Detector::sosdr ? cfg.p_list.size() : 1;
  const int bits_per_block = cfg.uncoded ? cfg.n : cfg.k;
  const int jobs = opt.debug ? 1 : std::max(1, opt.jobs);
  constexpr std::uint64_t kChunk = 256;

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<detail::EntryAccum> acc(entries);
  std::uint64_t done = 0;

  while (done < opt.max_blocks) {
    const std::uint64_t count = std::min(kChunk, opt.max_blocks - done);
    std::vector<std::vector<detail::EntryAccum>> local(
        jobs, std::vector<detail::EntryAccum>(entries));

    auto worker = [&](int w) {
      BlockDetector det(m);
      const std::uint64_t lo = done + count * w / jobs;
      const std::uint64_t hi = done + count * (w + 1) / jobs;
      for (std::uint64_t idx = lo; idx < hi; ++idx) {
        Rng rng(derive_seed(cfg.seed, tag, idx));
        BlockRecord rec = transmit_block(m, rng, noise_var);
        const std::uint64_t gr_seed =
            derive_seed(cfg.seed ^ 0x517cc1b727220a95ULL, tag, idx);
        const std::vector<DecodeOutcome> outs = det.run(rec, noise_var, gr_seed);
        for (std::size_t e = 0; e < entries; ++e) {
          local[w][e].bit_errors += outs[e].bit_errors;
          local[w][e].block_errors += outs[e].bit_errors > 0;
        }
        if (opt.debug && det.last_diag().valid) {
          const SolveDiag& d = det.last_diag();
          char line[160];
          std::snprintf(line, sizeof(line), "%s,%.3f,%.2f,%llu,%d,%.3e,%d\n",
                        detector_name(cfg.detector).c_str(), cfg.tau, es_n0_db,
                        static_cast<unsigned long long>(idx), d.iterations,
                        d.residual, d.converged ? 1 : 0);
          *opt.debug << line;
        }
      }
    };
    if (jobs == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, w);
      for (auto& t : pool) t.join();
    }
    for (int w = 0; w < jobs; ++w)
      for (std::size_t e = 0; e < entries; ++e) {
        acc[e].bit_errors += local[w][e].bit_errors;
        acc[e].block_errors += local[w][e].block_errors;
      }
    done += count;

    std::uint64_t min_errors = acc[0].bit_errors;
    for (const auto& a : acc) min_errors = std::min(min_errors, a.bit_errors);
    if (min_errors >= opt.target_bit_errors) break;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::vector<PointStats> stats(entries);
  for (std::size_t e = 0; e < entries; ++e) {
    PointStats& st = stats[e];
    st.detector = cfg.detector;
    st.tau = cfg.tau;
    st.p = cfg.detector == Detector::sosdr ? cfg.p_list[e] : 0;
    st.q = (cfg.detector == Detector::sosdr || cfg.detector == Detector::hardsdr)
               ? cfg.q
               : 0;
    st.es_n0_db = es_n0_db;
    st.blocks = done;
    st.bit_errors = acc[e].bit_errors;
    st.block_errors = acc[e].block_errors;
    const std::uint64_t bits = done * static_cast<std::uint64_t>(bits_per_block);
    st.ber = bits ? static_cast<double>(acc[e].bit_errors) / bits : 0.0;
    st.bler = done ? static_cast<double>(acc[e].block_errors) / done : 0.0;
    st.ci_halfwidth = wilson_halfwidth(acc[e].bit_errors, bits);
    st.seconds = seconds;
  }
  return stats;
}

}  // namespace ftn
