#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "ftn/cli.hpp"

using namespace ftn;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(FTNSDR_BIN) + " " + args;
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("ftnsdr_test_" + name);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream iss(text);
  std::string line;
  while (std::getline(iss, line)) lines.push_back(line);
  return lines;
}

BerArgs fast_args() {
  BerArgs a;
  a.taus = {0.8};
  a.snr = "4";
  a.detectors = {"sosdr"};
  a.p_list = {3, 5};
  a.q = 10;
  a.n = 8;
  a.k = 4;
  a.seed = 3;
  a.jobs = 1;
  a.max_blocks = 192;
  a.target_errors = 25;
  return a;
}

}  // namespace

TEST_CASE("snr grid parsing", "[cli]") {
  const auto grid = parse_snr_grid("0:1:8");
  REQUIRE(grid.size() == 9);
  for (int i = 0; i < 9; ++i) REQUIRE(grid[i] == static_cast<double>(i));

  CHECK(parse_snr_grid("2.5") == std::vector<double>{2.5});
  CHECK(parse_snr_grid("0:2:7") == std::vector<double>{0.0, 2.0, 4.0, 6.0});
  REQUIRE(parse_snr_grid("3:0.25:4").size() == 5);
  CHECK(parse_snr_grid("3:0.25:4").back() == Approx(4.0).margin(1e-12));

  CHECK_THROWS_AS(parse_snr_grid("0:0:5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_snr_grid("5:1:3"), std::invalid_argument);
  CHECK_THROWS_AS(parse_snr_grid("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_snr_grid("1:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_snr_grid("3x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_snr_grid("0:1:8x"), std::invalid_argument);
}

TEST_CASE("worker count resolution", "[cli]") {
  CHECK(resolve_jobs(4) == 4);
  setenv("FTN_SDR_THREADS", "3", 1);
  CHECK(resolve_jobs(0) == 3);
  CHECK(resolve_jobs(2) == 2);  // explicit flag wins
  unsetenv("FTN_SDR_THREADS");
  CHECK(resolve_jobs(0) >= 1);
}

TEST_CASE("csv formatting is stable", "[cli]") {
  CHECK(csv_header() ==
        "detector,tau,P,Q,esn0_db,ber,bler,ci_halfwidth,blocks,seconds");

  PointStats st;
  st.detector = Detector::sosdr;
  st.tau = 0.8;
  st.p = 70;
  st.q = 100;
  st.es_n0_db = 4.0;
  st.ber = 0.0125;
  st.bler = 0.25;
  st.ci_halfwidth = 0.0013;
  st.blocks = 400;
  st.seconds = 12.345;
  CHECK(csv_row(st, false) ==
        "sosdr,0.800,70,100,4.00,1.250000e-02,2.500000e-01,1.300e-03,400,0.000");
  CHECK(csv_row(st, true) ==
        "sosdr,0.800,70,100,4.00,1.250000e-02,2.500000e-01,1.300e-03,400,12.345");
}

TEST_CASE("config file fills only unset fields", "[cli]") {
  BerArgs a;
  nlohmann::json j;
  j["q"] = 50;
  j["n"] = 16;
  j["max_blocks"] = 77;
  apply_config(j, a, [](const std::string& key) { return key == "q"; });
  CHECK(a.q == 100);  // flag was set, file ignored
  CHECK(a.n == 16);
  CHECK(a.max_blocks == 77);
}

TEST_CASE("config snapshot round-trips", "[cli]") {
  BerArgs a;
  a.taus = {0.7, 0.9};
  a.snr = "1:1:3";
  a.detectors = {"bcjr"};
  a.p_list = {5};
  a.q = 33;
  a.n = 16;
  a.k = 8;
  a.rolloff = 0.25;
  a.uncoded = true;
  a.ebn0 = true;
  a.seed = 77;
  a.jobs = 2;
  a.max_blocks = 999;
  a.target_errors = 55;
  a.timing = true;
  a.design_snr_db = 1.5;
  a.solver_tol = 1e-7;
  a.solver_max_iter = 500;
  a.llr_clamp = 22.5;

  BerArgs b;
  apply_config(config_snapshot(a), b, [](const std::string&) { return false; });
  CHECK(b.taus == a.taus);
  CHECK(b.snr == a.snr);
  CHECK(b.detectors == a.detectors);
  CHECK(b.p_list == a.p_list);
  CHECK(b.q == a.q);
  CHECK(b.n == a.n);
  CHECK(b.k == a.k);
  CHECK(b.rolloff == a.rolloff);
  CHECK(b.uncoded == a.uncoded);
  CHECK(b.ebn0 == a.ebn0);
  CHECK(b.seed == a.seed);
  CHECK(b.jobs == a.jobs);
  CHECK(b.max_blocks == a.max_blocks);
  CHECK(b.target_errors == a.target_errors);
  CHECK(b.timing == a.timing);
  CHECK(b.design_snr_db == a.design_snr_db);
  CHECK(b.solver_tol == a.solver_tol);
  CHECK(b.solver_max_iter == a.solver_max_iter);
  CHECK(b.llr_clamp == a.llr_clamp);
}

TEST_CASE("sweep command streams reproducible csv", "[cli]") {
  const BerArgs a = fast_args();
  std::ostringstream out1, out2, err;
  REQUIRE(cmd_ber(a, out1, err) == 0);
  REQUIRE(cmd_ber(a, out2, err) == 0);
  CHECK(out1.str() == out2.str());

  const auto lines = split_lines(out1.str());
  REQUIRE(lines.size() == 3);  // header + one row per P
  CHECK(lines[0] == csv_header());
  CHECK(lines[1].rfind("sosdr,0.800,3,10,4.00,", 0) == 0);
  CHECK(lines[2].rfind("sosdr,0.800,5,10,4.00,", 0) == 0);
  for (int r = 1; r <= 2; ++r) {
    CHECK(lines[r].substr(lines[r].size() - 6) == ",0.000");  // timing off
    CHECK(lines[r].find(",192,") != std::string::npos);       // hit max_blocks
  }
}

TEST_CASE("eb/n0 grids are converted per code rate", "[cli]") {
  BerArgs a = fast_args();
  a.detectors = {"genie"};
  a.snr = "5";
  a.ebn0 = true;
  a.max_blocks = 8;
  a.target_errors = 1;
  std::ostringstream out, err;
  REQUIRE(cmd_ber(a, out, err) == 0);
  const auto lines = split_lines(out.str());
  REQUIRE(lines.size() == 2);
  // Es/N0 = 5 + 10 log10(4/8) printed with two decimals
  CHECK(lines[1].find(",1.99,") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1", "[cli]") {
  std::ostringstream out, err;
  {
    BerArgs a = fast_args();
    a.p_list = {12};  // > q + 1
    CHECK(cmd_ber(a, out, err) == 1);
  }
  {
    BerArgs a = fast_args();
    a.snr = "x";
    CHECK(cmd_ber(a, out, err) == 1);
  }
  {
    BerArgs a = fast_args();
    a.detectors = {"bogus"};
    CHECK(cmd_ber(a, out, err) == 1);
  }
  {
    BerArgs a = fast_args();
    a.n = 10;  // coded blocks need a power of two
    CHECK(cmd_ber(a, out, err) == 1);
  }
  {
    BerArgs a = fast_args();
    a.n = 16;
    a.k = 20;
    CHECK(cmd_ber(a, out, err) == 1);
  }
  {
    BerArgs a = fast_args();
    a.taus = {1.5};
    CHECK(cmd_ber(a, out, err) == 1);
  }
  {
    BerArgs a = fast_args();
    a.config = "/nonexistent/config.json";
    CHECK(cmd_ber(a, out, err) == 1);
  }
  CHECK(err.str().find("usage error:") != std::string::npos);
}

TEST_CASE("output file carries a faithful manifest", "[cli]") {
  BerArgs a = fast_args();
  a.detectors = {"bcjr"};
  a.snr = "0:2:2";
  a.max_blocks = 32;
  a.target_errors = 5;
  const fs::path csv_path = temp_file("manifest.csv");
  a.out = csv_path.string();

  std::ostringstream out, err;
  REQUIRE(cmd_ber(a, out, err) == 0);
  CHECK(slurp(csv_path) == out.str());

  const nlohmann::json manifest =
      nlohmann::json::parse(slurp(csv_path.string() + ".manifest.json"));
  CHECK(manifest["version"] == kVersion);
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config"] == config_snapshot(a));

  const auto frozen = manifest["frozen_indices"].get<std::vector<int>>();
  REQUIRE(frozen.size() == 4);  // n - k
  for (std::size_t i = 1; i < frozen.size(); ++i)
    REQUIRE(frozen[i - 1] < frozen[i]);

  const auto& results = manifest["results"];
  REQUIRE(results.size() == 2);
  const auto lines = split_lines(out.str());
  for (int r = 0; r < 2; ++r) {
    // csv ber column is rounded to 6 significant decimals of the json value
    std::istringstream row(lines[r + 1]);
    std::string field;
    for (int c = 0; c <= 5; ++c) std::getline(row, field, ',');
    const double csv_ber = std::stod(field);
    const double json_ber = results[r]["ber"].get<double>();
    CHECK(csv_ber == Approx(json_ber).margin(5e-7 * std::max(1.0, json_ber)));
    CHECK(results[r]["detector"] == "bcjr");
    CHECK(results[r]["blocks"].get<std::uint64_t>() > 0);
  }

  // replaying the manifest config reproduces the run byte for byte
  BerArgs replay;
  apply_config(manifest["config"], replay,
               [](const std::string&) { return false; });
  std::ostringstream out2, err2;
  REQUIRE(cmd_ber(replay, out2, err2) == 0);
  CHECK(out2.str() == out.str());

  fs::remove(csv_path);
  fs::remove(csv_path.string() + ".manifest.json");
}

TEST_CASE("plot directory gets data and a script", "[cli]") {
  BerArgs a = fast_args();
  a.p_list = {5};
  a.snr = "3:1:4";
  a.max_blocks = 16;
  a.target_errors = 1;
  const fs::path dir = temp_file("plots");
  a.plot_dir = dir.string();

  std::ostringstream out, err;
  REQUIRE(cmd_ber(a, out, err) == 0);
  REQUIRE(fs::exists(dir / "plot.gp"));
  REQUIRE(fs::exists(dir / "sosdr_tau0.800_p5.dat"));
  CHECK(split_lines(slurp(dir / "sosdr_tau0.800_p5.dat")).size() == 2);
  CHECK(slurp(dir / "plot.gp").find("logscale y") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("oracle selftest passes", "[cli]") {
  const auto results = run_selftest(6, 5, 2);
  REQUIRE(!results.empty());
  for (const auto& r : results) {
    INFO(r.name << " " << r.detail);
    CHECK(r.pass);
  }
  std::ostringstream out, err;
  CHECK(cmd_selftest(6, 5, 2, out, err) == 0);
  CHECK(out.str().find("selftest: all checks passed") != std::string::npos);
}

TEST_CASE("binary end-to-end", "[cli][binary]") {
  const fs::path log = temp_file("bin.log");
  const std::string redirect = " > " + log.string() + " 2>&1";

  CHECK(run_binary("selftest --n 6 --instances 5 --seed 2" + redirect) == 0);
  CHECK(slurp(log).find("selftest: all checks passed") != std::string::npos);

  CHECK(run_binary("ber --help" + redirect) == 0);
  CHECK(run_binary("frobnicate" + redirect) != 0);
  CHECK(run_binary("ber --snr 4 --n 8 --k 4 --p 12 --q 10" + redirect) == 1);

  const std::string small =
      "ber --tau 0.8 --detector sosdr --snr 3:1:4 --p 3 --q 8 --n 8 --k 4 "
      "--seed 5 --max-blocks 128 --target-errors 20";
  const fs::path csv1 = temp_file("jobs1.csv");
  const fs::path csv2 = temp_file("jobs3.csv");
  CHECK(run_binary(small + " --jobs 1 --out " + csv1.string() + redirect) == 0);
  CHECK(run_binary(small + " --jobs 3 --out " + csv2.string() + redirect) == 0);
  const std::string c1 = slurp(csv1);
  const std::string c2 = slurp(csv2);
  REQUIRE(!c1.empty());
  CHECK(c1 == c2);
  CHECK(split_lines(c1).size() == 3);  // header + two sweep points

  fs::remove(log);
  fs::remove(csv1);
  fs::remove(csv2);
  fs::remove(csv1.string() + ".manifest.json");
  fs::remove(csv2.string() + ".manifest.json");
}
