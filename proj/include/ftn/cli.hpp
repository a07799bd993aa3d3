#pragma once

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ftn/oracles.hpp"
#include "ftn/sim.hpp"

namespace ftn {

inline constexpr const char* kVersion = "0.1.0";

struct BerArgs {
  std::vector<double> taus = {0.8};
  std::string snr = "0:1:8";
  std::vector<std::string> detectors = {"sosdr"};
  std::vector<int> p_list = {70};
  int q = 100;
  int n = 64;
  int k = 32;
  double rolloff = 0.3;
  bool uncoded = false;
  bool ebn0 = false;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0: FTN_SDR_THREADS, then hardware concurrency
  std::uint64_t max_blocks = 100000;
  std::uint64_t target_errors = 200;
  bool timing = false;
  double design_snr_db = 2.0;
  double solver_tol = 1e-5;
  int solver_max_iter = 2000;
  double llr_clamp = 30.0;
  std::string out;
  std::string config;
  std::string plot_dir;
  std::string solver_debug;
};

inline std::vector<double> parse_snr_grid(const std::string& s) {
  auto number = [](const std::string& part) {
    std::size_t used = 0;
    const double v = std::stod(part, &used);
    if (used != part.size() || !std::isfinite(v))
      throw std::invalid_argument("bad snr value: " + part);
    return v;
  };
  const auto c1 = s.find(':');
  if (c1 == std::string::npos) return {number(s)};
  const auto c2 = s.find(':', c1 + 1);
  if (c2 == std::string::npos)
    throw std::invalid_argument("snr grid must be lo:step:hi");
  const double lo = number(s.substr(0, c1));
  const double step = number(s.substr(c1 + 1, c2 - c1 - 1));
  const double hi = number(s.substr(c2 + 1));
  if (!(step > 0.0)) throw std::invalid_argument("snr step must be > 0");
  if (hi < lo - 1e-12) throw std::invalid_argument("snr hi must be >= lo");
  std::vector<double> grid;
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) grid.push_back(lo + i * step);
  return grid;
}

inline int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FTN_SDR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

inline std::string csv_header() {
  return "detector,tau,P,Q,esn0_db,ber,bler,ci_halfwidth,blocks,seconds";
}

inline std::string csv_row(const PointStats& st, bool timing) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.3f,%d,%d,%.2f,%.6e,%.6e,%.3e,%llu,%.3f",
                detector_name(st.detector).c_str(), st.tau, st.p, st.q,
                st.es_n0_db, st.ber, st.bler, st.ci_halfwidth,
                static_cast<unsigned long long>(st.blocks),
                timing ? st.seconds : 0.0);
  return buf;
}

inline std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Applies config-file values for every field the user did not set on the
// command line; flags always win.
inline void apply_config(const nlohmann::json& j, BerArgs& a,
                         const std::function<bool(const std::string&)>& user_set) {
  auto want = [&](const char* key) { return j.contains(key) && !user_set(key); };
  if (want("tau")) a.taus = j["tau"].get<std::vector<double>>();
  if (want("snr")) a.snr = j["snr"].get<std::string>();
  if (want("detector")) a.detectors = j["detector"].get<std::vector<std::string>>();
  if (want("p")) a.p_list = j["p"].get<std::vector<int>>();
  if (want("q")) a.q = j["q"].get<int>();
  if (want("n")) a.n = j["n"].get<int>();
  if (want("k")) a.k = j["k"].get<int>();
  if (want("rolloff")) a.rolloff = j["rolloff"].get<double>();
  if (want("uncoded")) a.uncoded = j["uncoded"].get<bool>();
  if (want("ebn0")) a.ebn0 = j["ebn0"].get<bool>();
  if (want("seed")) a.seed = j["seed"].get<std::uint64_t>();
  if (want("jobs")) a.jobs = j["jobs"].get<int>();
  if (want("max_blocks")) a.max_blocks = j["max_blocks"].get<std::uint64_t>();
  if (want("target_errors")) a.target_errors = j["target_errors"].get<std::uint64_t>();
  if (want("timing")) a.timing = j["timing"].get<bool>();
  if (want("design_snr_db")) a.design_snr_db = j["design_snr_db"].get<double>();
  if (want("solver_tol")) a.solver_tol = j["solver_tol"].get<double>();
  if (want("solver_max_iter")) a.solver_max_iter = j["solver_max_iter"].get<int>();
  if (want("llr_clamp")) a.llr_clamp = j["llr_clamp"].get<double>();
}

inline nlohmann::json config_snapshot(const BerArgs& a) {
  nlohmann::json j;
  j["tau"] = a.taus;
  j["snr"] = a.snr;
  j["detector"] = a.detectors;
  j["p"] = a.p_list;
  j["q"] = a.q;
  j["n"] = a.n;
  j["k"] = a.k;
  j["rolloff"] = a.rolloff;
  j["uncoded"] = a.uncoded;
  j["ebn0"] = a.ebn0;
  j["seed"] = a.seed;
  j["jobs"] = a.jobs;
  j["max_blocks"] = a.max_blocks;
  j["target_errors"] = a.target_errors;
  j["timing"] = a.timing;
  j["design_snr_db"] = a.design_snr_db;
  j["solver_tol"] = a.solver_tol;
  j["solver_max_iter"] = a.solver_max_iter;
  j["llr_clamp"] = a.llr_clamp;
  return j;
}

namespace detail {

inline void emit_plot(const std::string& dir, const std::string& snr_label,
                      const std::vector<PointStats>& rows) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::map<std::string, std::vector<const PointStats*>> curves;
  for (const auto& st : rows) {
    char name[128];
    std::snprintf(name, sizeof(name), "%s_tau%.3f_p%d",
                  detector_name(st.detector).c_str(), st.tau, st.p);
    curves[name].push_back(&st);
  }
  std::ofstream gp(fs::path(dir) / "plot.gp");
  gp << "set logscale y\n"
     << "set xlabel '" << snr_label << " [dB]'\n"
     << "set ylabel 'BER'\n"
     << "set grid\n"
     << "plot ";
  bool first = true;
  for (const auto& [name, pts] : curves) {
    std::ofstream dat(fs::path(dir) / (name + ".dat"));
    for (const auto* st : pts) {
      char line[64];
      std::snprintf(line, sizeof(line), "%.2f %.6e\n", st->es_n0_db, st->ber);
      dat << line;
    }
    if (!first) gp << ", \\\n     ";
    gp << "'" << name << ".dat' with linespoints title '" << name << "'";
    first = false;
  }
  gp << "\n";
}

}  // namespace detail

inline int cmd_ber(BerArgs args, std::ostream& out, std::ostream& err) {
  try {
    if (!args.config.empty()) {
      // config already merged by the front end when flags are known; when
      // called directly, file values win only for defaults
      std::ifstream f(args.config);
      if (!f) throw std::invalid_argument("cannot open config: " + args.config);
      nlohmann::json j = nlohmann::json::parse(f);
      apply_config(j, args, [](const std::string&) { return false; });
    }
    const std::vector<double> grid_in = parse_snr_grid(args.snr);
    if (args.taus.empty()) throw std::invalid_argument("no tau given");
    if (args.detectors.empty()) throw std::invalid_argument("no detector given");
    if (args.p_list.empty()) throw std::invalid_argument("no P given");
    for (int p : args.p_list)
      if (p < 1 || p > args.q + 1)
        throw std::invalid_argument("P must be in [1, Q+1]");
    const int jobs = resolve_jobs(args.jobs);

    std::ofstream debug_stream;
    if (!args.solver_debug.empty()) {
      debug_stream.open(args.solver_debug);
      debug_stream << "detector,tau,esn0_db,block,iterations,residual,converged\n";
    }

    std::vector<PointStats> rows;
    std::ostringstream csv;
    csv << csv_header() << "\n";
    out << csv_header() << "\n";

    for (double tau : args.taus) {
      for (const std::string& dname : args.detectors) {
        FrameConfig cfg;
        cfg.tau = tau;
        cfg.rolloff = args.rolloff;
        cfg.n = args.n;
        cfg.k = args.k;
        cfg.uncoded = args.uncoded;
        cfg.detector = parse_detector(dname);
        cfg.q = args.q;
        cfg.p_list = args.p_list;
        cfg.design_snr_db = args.design_snr_db;
        cfg.seed = args.seed;
        cfg.solver.tol = args.solver_tol;
        cfg.solver.max_iter = args.solver_max_iter;
        cfg.soft.llr_clamp = args.llr_clamp;
        const LinkModel model = build_link(cfg);

        RunOptions opt;
        opt.max_blocks = args.max_blocks;
        opt.target_bit_errors = args.target_errors;
        opt.jobs = jobs;
        opt.debug = debug_stream.is_open() ? &debug_stream : nullptr;

        for (double snr : grid_in) {
          const double esn0 =
              args.ebn0 ? ebn0_to_esn0_db(snr, args.uncoded ? args.n : args.k,
                                          args.n)
                        : snr;
          const std::vector<PointStats> stats = run_point(model, esn0, opt);
          for (const PointStats& st : stats) {
            rows.push_back(st);
            const std::string line = csv_row(st, args.timing);
            csv << line << "\n";
            out << line << "\n" << std::flush;
          }
        }
      }
    }

    if (!args.out.empty()) {
      std::ofstream f(args.out);
      if (!f) throw std::invalid_argument("cannot open output: " + args.out);
      f << csv.str();

      nlohmann::json manifest;
      manifest["version"] = kVersion;
      manifest["timestamp"] = iso_timestamp();
      manifest["seed"] = args.seed;
      manifest["config"] = config_snapshot(args);
      if (!args.uncoded) {
        const PolarCode code = construct(args.n, args.k, args.design_snr_db);
        manifest["frozen_indices"] = frozen_indices(code);
      }
      nlohmann::json results = nlohmann::json::array();
      for (const PointStats& st : rows) {
        nlohmann::json r;
        r["detector"] = detector_name(st.detector);
        r["tau"] = st.tau;
        r["p"] = st.p;
        r["q"] = st.q;
        r["esn0_db"] = st.es_n0_db;
        r["ber"] = st.ber;
        r["bler"] = st.bler;
        r["ci_halfwidth"] = st.ci_halfwidth;
        r["blocks"] = st.blocks;
        r["bit_errors"] = st.bit_errors;
        r["block_errors"] = st.block_errors;
        r["seconds"] = st.seconds;
        results.push_back(r);
      }
      manifest["results"] = results;
      std::ofstream mf(args.out + ".manifest.json");
      mf << manifest.dump(2) << "\n";
    }
    if (!args.plot_dir.empty())
      detail::emit_plot(args.plot_dir, args.ebn0 ? "Eb/N0" : "Es/N0", rows);
    return 0;
  } catch (const FactorizationError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
};

// Oracle suites behind `selftest`: brute-force sequence search, exact LLR
// enumeration, the reference SC decoder, and the structural invariants of
// each module at small N.
inline std::vector<CheckResult> run_selftest(int n, int instances,
                                             std::uint64_t seed) {
  std::vector<CheckResult> results;
  auto check = [&](const std::string& name, bool pass,
                   const std::string& detail = "") {
    results.push_back({name, pass, detail});
  };
  char msg[256];

  // waveform: factor recomposition and triangularity
  for (double tau : {0.8, 0.7, 0.6}) {
    const PulseSpec spec = make_pulse_spec(tau, 0.3);
    const std::vector<double> gamma = autocorrelation(rrc_pulse(spec), spec);
    const IsiModel isi = build_isi_model(gamma, 32);
    Eigen::MatrixXd Greg = isi.Gamma;
    Greg.diagonal().array() += isi.epsilon;
    const double err = (isi.V.transpose() * isi.V - Greg).norm();
    const double lower =
        isi.V.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm();
    std::snprintf(msg, sizeof(msg), "tau=%.1f recomposition error %.2e", tau, err);
    check("waveform.recomposition", err <= 1e-8 * std::max(1.0, Greg.norm()) &&
                                        lower == 0.0 && isi.min_eigenvalue > 0.0,
          msg);
  }
  {
    const PulseSpec spec = make_pulse_spec(1.0, 0.3);
    const std::vector<double> gamma = autocorrelation(rrc_pulse(spec), spec);
    bool ok = true;
    for (std::size_t k2 = 1; k2 < gamma.size(); ++k2)
      ok = ok && std::abs(gamma[k2]) < 1e-3;
    check("waveform.nyquist-orthogonality", ok);
  }

  // polar: reference-decoder agreement and butterfly identity
  {
    const PolarCode code = construct(8, 4, 2.0);
    Rng rng(splitmix64(seed));
    bool agree = true;
    for (int t = 0; t < std::max(instances, 100) && agree; ++t) {
      std::vector<double> llrs(8);
      for (double& v : llrs) v = 3.0 * rng.gaussian();
      const ScResult a = sc_decode(code, llrs);
      const ScResult b = reference_sc_decode(code, llrs);
      agree = a.decoded_u == b.decoded_u && a.info_bits == b.info_bits;
    }
    check("polar.reference-agreement", agree);

    Rng rng2(splitmix64(seed) ^ 0x1234);
    bool bf = true;
    for (int t = 0; t < 20 && bf; ++t) {
      std::vector<std::uint8_t> u(16);
      for (auto& b2 : u) b2 = static_cast<std::uint8_t>(rng2.bit());
      std::vector<std::uint8_t> x = u;
      polar_transform(x);
      // explicit Kronecker-power multiply
      Eigen::Matrix<int, 2, 2> F;
      F << 1, 0, 1, 1;
      Eigen::MatrixXi E = Eigen::MatrixXi::Identity(1, 1);
      for (int s = 0; s < 4; ++s) {
        Eigen::MatrixXi K(E.rows() * 2, E.cols() * 2);
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) K.block(r * E.rows(), c * E.cols(), E.rows(), E.cols()) = F(r, c) * E;
        E = K;
      }
      for (int j = 0; j < 16 && bf; ++j) {
        int acc = 0;
        for (int i = 0; i < 16; ++i) acc ^= (u[i] & E(i, j));
        bf = (acc == x[j]);
      }
    }
    check("polar.butterfly-matrix-identity", bf);

    const PolarCode big = construct(64, 32, 2.0);
    Rng rng3(splitmix64(seed) ^ 0x5678);
    bool rt = true;
    for (int t = 0; t < 200 && rt; ++t) {
      std::vector<std::uint8_t> info(32);
      for (auto& b2 : info) b2 = static_cast<std::uint8_t>(rng3.bit());
      const std::vector<std::uint8_t> cw = encode(big, info);
      std::vector<double> llrs(64);
      for (int i = 0; i < 64; ++i) llrs[i] = cw[i] ? -40.0 : 40.0;
      rt = sc_decode(big, llrs).info_bits == info;
    }
    check("polar.noiseless-roundtrip", rt);
  }

  // sdr: relaxation lower bound, rounding bound, candidate 0
  {
    const int nn = std::min(n, 14);
    SolverConfig cfg;
    cfg.tol = 1e-8;
    cfg.max_iter = 20000;
    double worst_gap = -1e9;
    bool relax_ok = true, round_ok = true, cand0_ok = true;
    Rng rng(splitmix64(seed) ^ 0x9999);
    int idx = 0;
    for (double tau : {0.8, 0.7, 0.6}) {
      const PulseSpec spec = make_pulse_spec(tau, 0.3);
      const IsiModel isi =
          build_isi_model(autocorrelation(rrc_pulse(spec), spec), nn);
      for (int t = 0; t < std::max(instances / 3, 10); ++t, ++idx) {
        const double esn0 = (idx % 3) * 4.0 + 2.0;
        const TestInstance ti =
            make_test_instance(isi, std::sqrt(tau), esn0, rng);
        const SdpSolution sol = solve_sdp(ti.problem, cfg);
        const MlseResult mlse = exhaustive_mlse(ti.problem);
        worst_gap = std::max(worst_gap, sol.objective - mlse.min_objective);
        relax_ok = relax_ok && sol.objective <= mlse.min_objective + 1e-5;
        const CandidateSet cs = gaussian_randomization(sol, ti.problem, 100,
                                                       rng.raw());
        const double best = cs.objectives[cs.best_index];
        round_ok = round_ok && best >= sol.objective - 1e-7;
        cand0_ok = cand0_ok && best <= cs.objectives[0] + 1e-12;
      }
    }
    std::snprintf(msg, sizeof(msg), "worst objective excess %.3e (limit 1e-5)",
                  worst_gap);
    check("sdr.relaxation-lower-bound", relax_ok, msg);
    check("sdr.rounding-bound", round_ok);
    check("sdr.candidate0-guarantee", cand0_ok);
  }

  // softout: exact enumeration equivalence and sign symmetry
  {
    const int nn = std::min(n, 12);
    const PulseSpec spec = make_pulse_spec(0.8, 0.3);
    const IsiModel isi =
        build_isi_model(autocorrelation(rrc_pulse(spec), spec), nn);
    Rng rng(splitmix64(seed) ^ 0xaaaa);
    double worst = 0.0;
    bool sym_ok = true;
    for (int t = 0; t < std::max(instances / 5, 5); ++t) {
      const TestInstance ti = make_test_instance(isi, std::sqrt(0.8), 4.0, rng);
      const CandidateSet all = all_sequences_candidates(ti.problem);
      const std::vector<ScoredSequence> pool =
          select_p_best(all, 1 << nn);
      SoftConfig scfg;
      scfg.llr_clamp = 1e9;
      const std::vector<double> got = compute_llrs(ti.problem, pool, scfg);
      const std::vector<double> want = exact_llr_oracle(ti.problem);
      for (int i = 0; i < nn; ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]));

      DetectionProblem neg = ti.problem;
      neg.y = -neg.y;
      const std::vector<double> flipped = exact_llr_oracle(neg);
      for (int i = 0; i < nn; ++i)
        sym_ok = sym_ok && std::abs(flipped[i] + want[i]) <= 1e-9;
    }
    std::snprintf(msg, sizeof(msg), "max |LLR error| %.2e (limit 1e-9)", worst);
    check("softout.exact-llr-equivalence", worst <= 1e-9, msg);
    check("softout.negation-symmetry", sym_ok);
  }

  // bcjr: enumeration agreement on the truncated channel, normalization
  {
    FrameConfig cfg;
    cfg.tau = 0.7;
    cfg.n = std::min(n, 10);
    cfg.uncoded = true;
    cfg.detector = Detector::bcjr;
    const LinkModel model = build_link(cfg);
    Rng rng(splitmix64(seed) ^ 0xbbbb);
    double worst = 0.0, worst_norm = 0.0;
    for (int t = 0; t < std::max(instances / 5, 5); ++t) {
      Rng block_rng(rng.raw());
      const BlockRecord rec = transmit_block(model, block_rng, 0.1);
      BcjrDebug dbg;
      const std::vector<double> got =
          bcjr_llrs(model.trellis, rec.rx_whitened, 0.1, model.guard, &dbg);
      const DetectionProblem ref = trellis_payload_problem(
          model.trellis, rec.rx_whitened, model.guard, 0.1);
      const std::vector<double> want = exact_llr_oracle(ref);
      for (int i = 0; i < cfg.n; ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]));
      for (double v : dbg.log_norm) worst_norm = std::max(worst_norm, std::abs(v));
    }
    std::snprintf(msg, sizeof(msg), "max |LLR diff| %.2e (limit 1e-6)", worst);
    check("bcjr.enumeration-agreement", worst <= 1e-6, msg);
    std::snprintf(msg, sizeof(msg), "max |log posterior sum| %.2e (limit 1e-9)",
                  worst_norm);
    check("bcjr.posterior-normalization", worst_norm <= 1e-9, msg);
  }

  return results;
}

inline int cmd_selftest(int n, int instances, std::uint64_t seed,
                        std::ostream& out, std::ostream& err) {
  try {
    const std::vector<CheckResult> results = run_selftest(n, instances, seed);
    bool all = true;
    for (const CheckResult& r : results) {
      out << (r.pass ? "PASS " : "FAIL ") << r.name;
      if (!r.detail.empty()) out << "  [" << r.detail << "]";
      out << "\n";
      all = all && r.pass;
    }
    out << (all ? "selftest: all checks passed\n"
                : "selftest: FAILURES present\n");
    return all ? 0 : 2;
  } catch (const std::exception& e) {
    err << "selftest aborted: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ftn
