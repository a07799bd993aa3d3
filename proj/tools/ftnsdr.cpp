#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ftn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"coded faster-than-Nyquist detection testbench"};
  app.require_subcommand(1);

  ftn::BerArgs a;
  CLI::App* ber = app.add_subcommand("ber", "Monte-Carlo BER/BLER sweep, CSV out");
  ber->add_option("--tau", a.taus, "FTN acceleration factor(s)")->delimiter(',');
  ber->add_option("--snr", a.snr, "SNR grid lo:step:hi in dB (Es/N0 unless --ebn0)");
  ber->add_option("--detector", a.detectors, "sosdr,hardsdr,bcjr,genie")
      ->delimiter(',');
  ber->add_option("--p", a.p_list, "soft-output list size(s) P")->delimiter(',');
  ber->add_option("--q", a.q, "Gaussian-randomization draws");
  ber->add_option("--n", a.n, "block length N");
  ber->add_option("--k", a.k, "information bits K");
  ber->add_option("--rolloff", a.rolloff, "RRC roll-off");
  ber->add_flag("--uncoded", a.uncoded, "skip the polar code");
  ber->add_flag("--ebn0", a.ebn0, "interpret --snr as Eb/N0");
  ber->add_option("--seed", a.seed, "master seed");
  ber->add_option("--jobs", a.jobs, "worker threads (0: FTN_SDR_THREADS or auto)");
  ber->add_option("--max-blocks", a.max_blocks, "block cap per sweep point");
  ber->add_option("--target-errors", a.target_errors,
                  "bit errors to accumulate before stopping a point");
  ber->add_flag("--timing", a.timing, "emit wall-clock seconds in the CSV");
  ber->add_option("--design-snr", a.design_snr_db, "polar construction SNR, dB");
  ber->add_option("--out", a.out, "also write CSV and a run manifest here");
  ber->add_option("--config", a.config, "JSON config file; flags override");
  ber->add_option("--plot", a.plot_dir, "emit gnuplot data/script to this dir");
  ber->add_option("--solver-debug", a.solver_debug,
                  "per-block solver diagnostics CSV (forces one worker)");

  int st_n = 10, st_instances = 50;
  std::uint64_t st_seed = 1;
  CLI::App* st = app.add_subcommand("selftest", "run the oracle suites");
  st->add_option("--n", st_n, "problem size for enumeration checks");
  st->add_option("--instances", st_instances, "random instances per check");
  st->add_option("--seed", st_seed, "seed for the oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (ber->parsed()) {
    if (!a.config.empty()) {
      std::ifstream f(a.config);
      if (!f) {
        std::cerr << "usage error: cannot open config: " << a.config << "\n";
        return 1;
      }
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const std::exception& e) {
        std::cerr << "usage error: bad config JSON: " << e.what() << "\n";
        return 1;
      }
      ftn::apply_config(j, a, [&](const std::string& key) {
        std::string flag = key;
        for (char& c : flag)
          if (c == '_') c = '-';
        if (flag == "design-snr-db") flag = "design-snr";
        const CLI::Option* opt = ber->get_option_no_throw("--" + flag);
        return opt != nullptr && opt->count() > 0;
      });
      a.config.clear();  // merged here; cmd_ber must not merge again
    }
    return ftn::cmd_ber(a, std::cout, std::cerr);
  }
  return ftn::cmd_selftest(st_n, st_instances, st_seed, std::cout, std::cerr);
}
