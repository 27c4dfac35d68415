#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "trimlab/norming.hpp"
#include "trimlab/regvar.hpp"
#include "trimlab/report.hpp"

using namespace trimlab;
namespace fs = std::filesystem;

namespace {

fs::path binary_path() {
  static const fs::path p = fs::read_symlink("/proc/self/exe").parent_path() / "trimlab";
  return p;
}

fs::path out_dir() {
  static const fs::path d = [] {
    fs::path dir = fs::temp_directory_path() / "trimlab_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
  }();
  return d;
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const fs::path out = out_dir() / "stdout.txt";
  const std::string cmd =
      binary_path().string() + " " + args + " > " + out.string() + " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> f;
  std::istringstream is(line);
  std::string cell;
  while (std::getline(is, cell, ',')) f.push_back(cell);
  return f;
}

}  // namespace

TEST_CASE("number and field formatting primitives") {
  CHECK(fmt17(0.1) == "0.10000000000000001");
  CHECK(fmt17(1.0) == "1");
  CHECK(fmt17(std::nan("")) == "nan");
  CHECK(sci17(1.0) == "1.0000000000000000e+00");
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("content hashes match the reference vectors") {
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(git_blob_sha1("hello") == "b6fc4c620b67d95f953a5c1c1230aaab5db5a1b0");
}

TEST_CASE("norming table output equals the library writer byte for byte") {
  const fs::path prefix = out_dir() / "norm";
  const auto r = run_cli("norming-table --alpha 0.5 --schedule pow:0.7 "
                         "--checkpoints 1000,10000 --out " + prefix.string());
  CHECK(r.code == 0);
  const std::string file = slurp(prefix.string() + ".csv");

  const RegVaryingTail tail(0.5, SlowlyVarying::constant(1.0));
  const auto rows = norming_table(tail, TrimmingSchedule::power_rule(0.7), {1000, 10000});
  std::ostringstream expect;
  write_norming_csv(expect, rows);
  CHECK(file == expect.str());

  const auto lines = split_lines(file);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "n,b,zeta,g,d,ratio_diag");
  const auto f = split_fields(lines[1]);
  REQUIRE(f.size() == 6);
  CHECK(f[0] == "1000");
  CHECK(f[1] == "126");  // ceil(1000^0.7)
  // alpha = 1/2 with constant L: d = n^2 / b and the diagnostic ratio is
  // ((b - zeta)/b)^2
  CHECK(std::strtod(f[4].c_str(), nullptr) ==
        doctest::Approx(1e6 / 126.0).epsilon(1e-12));
  const double z = zeta(126);
  CHECK(std::strtod(f[5].c_str(), nullptr) ==
        doctest::Approx(std::pow((126.0 - z) / 126.0, 2.0)).epsilon(1e-12));

  // without --out the same CSV goes to stdout
  const auto piped = run_cli("norming-table --alpha 0.5 --schedule pow:0.7 "
                             "--checkpoints 1000,10000");
  CHECK(piped.code == 0);
  CHECK(piped.out == file);
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run_cli("norming-table --alpha 0.5 --checkpoints 100").code == 2);
  CHECK(run_cli("norming-table --alpha 0.5 --schedule pow:1.5 --checkpoints 100,200").code == 2);
  CHECK(run_cli("norming-table --alpha 0.5 --l weird:1 --schedule pow:0.7 "
                "--checkpoints 100,200").code == 2);
  CHECK(run_cli("verify-mean --process luroth --schedule pow:0.7 "
                "--checkpoints 100,200").code == 2);  // missing --seed
  CHECK(run_cli("mixing --process luroth --seed 1").code == 2);  // missing --thresholds
  CHECK(run_cli("no-such-command").code == 2);
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("experiment runs emit csv, manifest, and summary; manifests round-trip") {
  const fs::path a = out_dir() / "vm_a";
  const auto r = run_cli("verify-mean --process luroth --alpha 0.5 --schedule pow:0.7 "
                         "--checkpoints 100,400 --replicas 20 --seed 7 --plot-data --out " +
                         a.string());
  CHECK(r.code == 0);
  REQUIRE(fs::exists(a.string() + ".csv"));
  REQUIRE(fs::exists(a.string() + ".plot.csv"));
  REQUIRE(fs::exists(a.string() + ".manifest.json"));
  REQUIRE(fs::exists(a.string() + ".summary.json"));

  const auto manifest = nlohmann::json::parse(slurp(a.string() + ".manifest.json"));
  CHECK(manifest.at("command") == "verify-mean");
  CHECK(manifest.at("config").is_object());
  CHECK(!manifest.at("outputs").empty());
  const auto summary = nlohmann::json::parse(slurp(a.string() + ".summary.json"));
  CHECK(summary.at("command") == "verify-mean");
  CHECK(summary.contains("config_hash"));
  CHECK(summary.contains("metrics"));

  const std::string plot_head = split_lines(slurp(a.string() + ".plot.csv")).at(0);
  CHECK(plot_head == "n,metric,value");

  // replaying the manifest reproduces the data file exactly
  const fs::path b = out_dir() / "vm_b";
  const auto rr = run_cli("verify-mean --config " + a.string() + ".manifest.json --out " +
                          b.string());
  CHECK(rr.code == 0);
  CHECK(slurp(b.string() + ".csv") == slurp(a.string() + ".csv"));

  // a manifest for one command cannot configure another
  CHECK(run_cli("truncation-check --config " + a.string() + ".manifest.json").code == 2);
  CHECK(run_cli("verify-mean --config /nonexistent.json").code == 2);
}

TEST_CASE("worker count does not change the written data") {
  const fs::path w1 = out_dir() / "w1";
  const fs::path w4 = out_dir() / "w4";
  const std::string base = "verify-mean --process luroth --alpha 0.5 --schedule pow:0.7 "
                           "--checkpoints 100,400 --replicas 30 --seed 9 ";
  CHECK(run_cli(base + "--workers 1 --out " + w1.string()).code == 0);
  CHECK(run_cli(base + "--workers 4 --out " + w4.string()).code == 0);
  CHECK(slurp(w1.string() + ".csv") == slurp(w4.string() + ".csv"));
}

TEST_CASE("truncation check runs against a fixed level") {
  const fs::path t = out_dir() / "trunc";
  const auto r = run_cli("truncation-check --process iid --alpha 0.5 --schedule pow:0.7 "
                         "--checkpoints 200,500 --f 50 --replicas 30 --seed 3 --out " +
                         t.string());
  CHECK(r.code == 0);
  const auto lines = split_lines(slurp(t.string() + ".csv"));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].rfind("n,b,f,", 0) == 0);
}

TEST_CASE("tail diagnostics write all three tables") {
  const fs::path c = out_dir() / "tail";
  const auto r = run_cli("counterexample --process doubling-pareto --gamma 2 --n 200 --b 5 "
                         "--replicas 50 --hill-k 10 --bootstrap 40 --omega 0.1 --seed 11 --out " +
                         c.string());
  CHECK(r.code == 0);
  REQUIRE(fs::exists(c.string() + ".csv"));
  REQUIRE(fs::exists(c.string() + ".running.csv"));
  REQUIRE(fs::exists(c.string() + ".omega.csv"));
  const auto omega = split_lines(slurp(c.string() + ".omega.csv"));
  REQUIRE(omega.size() == 2);
  const auto f = split_fields(omega[1]);
  REQUIRE(f.size() >= 2);
  // (omega * 2^-b)^-gamma at omega 0.1, b 5, gamma 2
  CHECK(std::strtod(f[1].c_str(), nullptr) == doctest::Approx(102400.0).epsilon(1e-9));
}

TEST_CASE("dependence scan separates lag one from lag two on the bit-window process") {
  const fs::path m = out_dir() / "mix";
  const auto r = run_cli("mixing --process doubling-pareto --gamma 2 --thresholds 4,16 "
                         "--lags 1,2 --k-anchor 2 --replicas 3000 --seed 5 --out " + m.string());
  CHECK(r.code == 0);
  const auto lines = split_lines(slurp(m.string() + ".csv"));
  REQUIRE(lines.size() == 3);
  const auto lag1 = split_fields(lines[1]);
  const auto lag2 = split_fields(lines[2]);
  CHECK(lag1.at(0) == "1");
  CHECK(lag2.at(0) == "2");
  CHECK(std::strtod(lag1.at(1).c_str(), nullptr) > 0.8);
  CHECK(std::strtod(lag2.at(1).c_str(), nullptr) < 0.15);
}

TEST_CASE("map validation always exits zero and reports the verdict") {
  const auto good = run_cli("validate-map --map luroth --observable canonical:0.5 --k-bound 4");
  CHECK(good.code == 0);
  CHECK(good.out.find("pass") != std::string::npos);
  CHECK(good.out.find("fail") == std::string::npos);

  const auto bad = run_cli("validate-map --map \"explicit:0,0.5,1;0.5,2;0,-1\" "
                           "--observable cells:1,2");
  CHECK(bad.code == 0);
  CHECK(bad.out.find("fail") != std::string::npos);
}

TEST_CASE("path dumps match the documented text format") {
  const fs::path p = out_dir() / "path";
  const auto r = run_cli("dump-path --process luroth --alpha 0.5 --n 5 --seed 2 --out " +
                         p.string());
  CHECK(r.code == 0);
  const auto lines = split_lines(slurp(p.string() + ".path"));
  REQUIRE(lines.size() == 6);
  CHECK(lines[0].rfind("# trimlab-path v1 spec=", 0) == 0);
  for (std::size_t i = 1; i < lines.size(); ++i)
    CHECK(std::strtod(lines[i].c_str(), nullptr) >= 1.0);

  const auto piped = run_cli("dump-path --process luroth --alpha 0.5 --n 5 --seed 2");
  CHECK(piped.code == 0);
  CHECK(piped.out == slurp(p.string() + ".path"));
}
