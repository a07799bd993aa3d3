#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ftn/sim.hpp"

using namespace ftn;
using Catch::Approx;

namespace {

Eigen::VectorXd frame_symbols(const LinkModel& m, const BlockRecord& rec) {
  const int frame = m.cfg.n + 2 * m.guard;
  Eigen::VectorXd s = Eigen::VectorXd::Ones(frame);
  for (int i = 0; i < m.cfg.n; ++i)
    s[m.guard + i] = bit_to_symbol(rec.tx_codeword[i]);
  return s;
}

bool same_stats(const PointStats& a, const PointStats& b) {
  return a.detector == b.detector && a.tau == b.tau && a.p == b.p &&
         a.q == b.q && a.es_n0_db == b.es_n0_db && a.ber == b.ber &&
         a.bler == b.bler && a.ci_halfwidth == b.ci_halfwidth &&
         a.blocks == b.blocks && a.bit_errors == b.bit_errors &&
         a.block_errors == b.block_errors;  // seconds is wall time, skipped
}

}  // namespace

TEST_CASE("snr conversions", "[sim]") {
  CHECK(esn0_db_to_noise_var(0.0) == Approx(0.5).margin(1e-12));
  CHECK(esn0_db_to_noise_var(10.0) == Approx(0.05).margin(1e-12));
  CHECK(ebn0_to_esn0_db(5.0, 32, 64) == Approx(1.989700043360187).margin(1e-9));
  CHECK(ebn0_to_esn0_db(5.0, 64, 64) == Approx(5.0).margin(1e-12));
}

TEST_CASE("detector names round-trip", "[sim]") {
  for (Detector d : {Detector::sosdr, Detector::hardsdr, Detector::bcjr,
                     Detector::genie})
    CHECK(parse_detector(detector_name(d)) == d);
  CHECK_THROWS_AS(parse_detector("viterbi"), std::invalid_argument);
}

TEST_CASE("link construction wires the pieces together", "[sim]") {
  FrameConfig cfg;
  cfg.tau = 0.8;
  cfg.n = 32;
  cfg.k = 16;
  const LinkModel m = build_link(cfg);

  CHECK(m.amplitude == Approx(std::sqrt(0.4)).margin(1e-12));
  CHECK(m.isi.N == 32 + 2 * m.guard);
  CHECK(m.guard > 0);
  CHECK(m.trellis.memory == m.guard);
  CHECK(m.code.n_bits == 32);
  CHECK(m.code.k_bits == 16);
  CHECK((m.v_payload - m.isi.V.block(m.guard, m.guard, 32, 32)).norm() == 0.0);
  REQUIRE(m.lead_correction.size() == 32);
  const Eigen::VectorXd expect =
      m.amplitude * m.isi.V.block(m.guard, 0, 32, m.guard) *
      Eigen::VectorXd::Ones(m.guard);
  CHECK((m.lead_correction - expect).norm() == 0.0);

  FrameConfig un = cfg;
  un.uncoded = true;
  CHECK(build_link(un).amplitude == Approx(std::sqrt(0.8)).margin(1e-12));

  FrameConfig bad = cfg;
  bad.n = 1;
  CHECK_THROWS_AS(build_link(bad), std::invalid_argument);
  FrameConfig odd = cfg;
  odd.n = 10;
  odd.k = 5;
  CHECK_THROWS_AS(build_link(odd), std::invalid_argument);
}

TEST_CASE("noiseless transmit matches the linear model", "[sim]") {
  FrameConfig cfg;
  cfg.tau = 0.8;
  cfg.n = 16;
  cfg.k = 8;
  const LinkModel m = build_link(cfg);
  Rng rng(42);
  const BlockRecord rec = transmit_block(m, rng, 0.0);

  REQUIRE(rec.tx_bits.size() == 8);
  REQUIRE(rec.tx_codeword.size() == 16);
  REQUIRE(rec.tx_symbols.size() == 16);
  const Eigen::VectorXd s = frame_symbols(m, rec);
  const Eigen::VectorXd clean = m.amplitude * (m.isi.V * s);
  REQUIRE((rec.rx_whitened - clean).cwiseAbs().maxCoeff() < 1e-12);

  // after guard subtraction the payload rows are an exact linear model
  const DetectionProblem prob = payload_problem(m, rec, 0.25);
  REQUIRE((prob.y - prob.V * rec.tx_symbols).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("uncoded blocks put info bits on the channel", "[sim]") {
  FrameConfig cfg;
  cfg.n = 16;
  cfg.uncoded = true;
  const LinkModel m = build_link(cfg);
  Rng rng(7);
  const BlockRecord rec = transmit_block(m, rng, 0.1);
  REQUIRE(rec.tx_bits.size() == 16);
  CHECK(rec.tx_codeword == rec.tx_bits);
}

TEST_CASE("every detector recovers a near-noiseless block", "[sim]") {
  for (Detector d : {Detector::sosdr, Detector::hardsdr, Detector::bcjr,
                     Detector::genie}) {
    FrameConfig cfg;
    cfg.tau = 0.8;
    cfg.n = 16;
    cfg.k = 8;
    cfg.detector = d;
    cfg.q = 10;
    cfg.p_list = {4};
    const LinkModel m = build_link(cfg);
    const double noise_var = 1e-8;
    Rng rng(1234);
    BlockRecord rec = transmit_block(m, rng, noise_var);
    BlockDetector det(m);
    const auto outs = det.run(rec, noise_var, 555);
    REQUIRE(!outs.empty());
    for (const auto& o : outs) {
      INFO(detector_name(d));
      CHECK(o.bit_errors == 0);
      CHECK(o.bits == rec.tx_bits);
    }
  }
}

TEST_CASE("whitened noise is white", "[sim]") {
  FrameConfig cfg;
  cfg.tau = 0.8;
  cfg.n = 8;
  cfg.k = 4;
  const LinkModel m = build_link(cfg);
  const int frame = cfg.n + 2 * m.guard;
  const double noise_var = 0.5;
  const int blocks = 4000;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(frame, frame);
  for (int b = 0; b < blocks; ++b) {
    Rng rng(derive_seed(5150, 3, static_cast<std::uint64_t>(b)));
    const BlockRecord rec = transmit_block(m, rng, noise_var);
    const Eigen::VectorXd e =
        rec.rx_whitened - m.amplitude * (m.isi.V * frame_symbols(m, rec));
    cov += e * e.transpose();
  }
  cov /= blocks;

  for (int i = 0; i < frame; ++i) {
    CHECK(cov(i, i) == Approx(noise_var).epsilon(0.08));
    for (int j = 0; j < i; ++j) CHECK(std::abs(cov(i, j)) <= 0.08 * noise_var);
  }
}

TEST_CASE("received energy matches the quadratic form", "[sim]") {
  FrameConfig cfg;
  cfg.tau = 0.7;
  cfg.n = 12;
  cfg.k = 6;
  cfg.uncoded = true;
  const LinkModel m = build_link(cfg);
  const int frame = cfg.n + 2 * m.guard;

  // E||V s||^2 with unit random payload: trace plus the guard-guard cross terms
  const Eigen::MatrixXd G = m.isi.V.transpose() * m.isi.V;
  double expected = G.trace();
  for (int i = 0; i < frame; ++i)
    for (int j = 0; j < frame; ++j) {
      const bool gi = i < m.guard || i >= m.guard + cfg.n;
      const bool gj = j < m.guard || j >= m.guard + cfg.n;
      if (i != j && gi && gj) expected += G(i, j);
    }
  expected *= m.amplitude * m.amplitude;

  const int blocks = 3000;
  double sum = 0.0, sumsq = 0.0;
  for (int b = 0; b < blocks; ++b) {
    Rng rng(derive_seed(31337, 4, static_cast<std::uint64_t>(b)));
    const BlockRecord rec = transmit_block(m, rng, 0.0);
    const double e = rec.rx_whitened.squaredNorm();
    sum += e;
    sumsq += e * e;
  }
  const double mean = sum / blocks;
  const double se =
      std::sqrt((sumsq / blocks - mean * mean) / blocks);
  REQUIRE(std::abs(mean - expected) <= 5.0 * se + 1e-9);
}

TEST_CASE("runs are deterministic and worker-count invariant", "[sim]") {
  FrameConfig cfg;
  cfg.tau = 0.8;
  cfg.n = 8;
  cfg.k = 4;
  cfg.detector = Detector::sosdr;
  cfg.q = 15;
  cfg.p_list = {5, 8};
  cfg.seed = 99;
  const LinkModel m = build_link(cfg);

  RunOptions opt;
  opt.max_blocks = 512;
  opt.target_bit_errors = 40;
  opt.jobs = 1;
  const auto a = run_point(m, 3.0, opt);
  const auto b = run_point(m, 3.0, opt);
  opt.jobs = 3;
  const auto c = run_point(m, 3.0, opt);

  REQUIRE(a.size() == 2);
  REQUIRE(b.size() == 2);
  REQUIRE(c.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    REQUIRE(same_stats(a[e], b[e]));
    REQUIRE(same_stats(a[e], c[e]));
  }
  CHECK(a[0].p == 5);
  CHECK(a[1].p == 8);
  CHECK(a[0].bit_errors >= 40);
}

TEST_CASE("master seed changes the traffic", "[sim]") {
  FrameConfig cfg;
  cfg.n = 16;
  cfg.k = 8;
  const LinkModel m = build_link(cfg);
  std::vector<std::uint8_t> first, second;
  for (std::uint64_t b = 0; b < 4; ++b) {
    Rng r1(derive_seed(1, 7, b));
    Rng r2(derive_seed(2, 7, b));
    const BlockRecord rec1 = transmit_block(m, r1, 0.1);
    const BlockRecord rec2 = transmit_block(m, r2, 0.1);
    first.insert(first.end(), rec1.tx_bits.begin(), rec1.tx_bits.end());
    second.insert(second.end(), rec2.tx_bits.begin(), rec2.tx_bits.end());
  }
  CHECK(first != second);
}

TEST_CASE("stop rules cap the run", "[sim]") {
  FrameConfig cfg;
  cfg.n = 16;
  cfg.k = 8;
  cfg.detector = Detector::genie;
  const LinkModel m = build_link(cfg);

  RunOptions opt;
  opt.max_blocks = 64;
  opt.target_bit_errors = 1;  // unreachable for the genie
  const auto stats = run_point(m, 0.0, opt);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].blocks == 64);
  CHECK(stats[0].bit_errors == 0);
  CHECK(stats[0].ber == 0.0);
  CHECK(stats[0].bler == 0.0);

  FrameConfig noisy = cfg;
  noisy.detector = Detector::bcjr;
  const LinkModel m2 = build_link(noisy);
  RunOptions opt2;
  opt2.max_blocks = 512;
  opt2.target_bit_errors = 30;
  const auto s2 = run_point(m2, 0.0, opt2);
  REQUIRE(s2.size() == 1);
  CHECK(s2[0].bit_errors >= 30);
  CHECK(s2[0].blocks <= 512);
  CHECK(s2[0].blocks % 256 == 0);  // stop rule acts at chunk boundaries
}

TEST_CASE("debug stream reports one line per block", "[sim]") {
  FrameConfig cfg;
  cfg.n = 8;
  cfg.k = 4;
  cfg.detector = Detector::sosdr;
  cfg.q = 5;
  cfg.p_list = {3};
  const LinkModel m = build_link(cfg);

  std::ostringstream oss;
  RunOptions opt;
  opt.max_blocks = 16;
  opt.target_bit_errors = 1000000;
  opt.jobs = 4;  // forced back to one worker by the debug stream
  opt.debug = &oss;
  const auto stats = run_point(m, 4.0, opt);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].blocks == 16);

  int lines = 0;
  std::string line;
  std::istringstream iss(oss.str());
  while (std::getline(iss, line)) {
    ++lines;
    CHECK(line.rfind("sosdr,0.800,4.00,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(lines == 16);
}

TEST_CASE("point stats carry the sweep identity", "[sim]") {
  FrameConfig cfg;
  cfg.n = 8;
  cfg.k = 4;
  cfg.q = 9;
  RunOptions opt;
  opt.max_blocks = 8;
  opt.target_bit_errors = 1;

  cfg.detector = Detector::hardsdr;
  {
    const auto st = run_point(build_link(cfg), 2.0, opt);
    REQUIRE(st.size() == 1);
    CHECK(st[0].detector == Detector::hardsdr);
    CHECK(st[0].p == 0);
    CHECK(st[0].q == 9);
    CHECK(st[0].es_n0_db == 2.0);
    CHECK(st[0].ci_halfwidth ==
          wilson_halfwidth(st[0].bit_errors, st[0].blocks * 4));
  }
  cfg.detector = Detector::bcjr;
  {
    const auto st = run_point(build_link(cfg), 2.0, opt);
    CHECK(st[0].p == 0);
    CHECK(st[0].q == 0);
  }
  cfg.detector = Detector::genie;
  {
    const auto st = run_point(build_link(cfg), 2.0, opt);
    CHECK(st[0].q == 0);
    CHECK(st[0].ber == 0.0);
  }
}

TEST_CASE("ber is non-increasing in snr for every detector", "[sim]") {
  FrameConfig cfg;
  cfg.tau = 0.8;
  cfg.n = 8;
  cfg.k = 4;
  cfg.q = 15;
  cfg.p_list = {8};
  cfg.seed = 4242;
  RunOptions opt;
  opt.max_blocks = 768;
  opt.target_bit_errors = 1u << 20;  // run the full block budget
  for (Detector d :
       {Detector::sosdr, Detector::hardsdr, Detector::bcjr, Detector::genie}) {
    cfg.detector = d;
    const LinkModel m = build_link(cfg);
    double prev_ber = 1.0, prev_ci = 0.0;
    for (double esn0 : {0.0, 4.0, 8.0}) {
      const auto st = run_point(m, esn0, opt);
      INFO(detector_name(d) << " at " << esn0 << " dB");
      CHECK(st[0].ber <= prev_ber + prev_ci + st[0].ci_halfwidth);
      prev_ber = st[0].ber;
      prev_ci = st[0].ci_halfwidth;
    }
  }
}
