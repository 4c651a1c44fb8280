#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "harness.hpp"

namespace fs = std::filesystem;
using namespace capa;
using namespace capa::cli;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("capa_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// small grid so the CLI paths run in milliseconds
void write_small_config(const fs::path& p) {
  std::ofstream(p) << R"({
  "placement": {"count": 2, "xy_half_range": 1.0, "z_min": 2.0, "z_max": 3.0,
                "lx": 0.125, "ly": 0.125},
  "streams": 2, "bs_order": 4, "user_order": 3, "seed": 5
})";
}

int run_args(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

}  // namespace

TEST_CASE("cli solve: huge epsilon stops after one iteration") {
  TempDir t("solve");
  write_small_config(t.path / "s.json");
  const std::string out = (t.path / "o").string();
  CHECK(run_args({"solve", "--config", (t.path / "s.json").string(), "--epsilon", "1e9", "--out", out,
             "--plot"}) == kOk);
  const std::string trace = slurp(t.path / "o" / "trace.csv");
  CHECK(trace.rfind("iter,", 0) == 0);
  CHECK(count_lines(trace) == 2);
  CHECK(slurp(t.path / "o" / "trace.svg").find("<svg") != std::string::npos);

  CHECK(run_args({"solve", "--config", (t.path / "s.json").string(), "--max-iters", "2", "--epsilon",
             "1e-12", "--out", out}) == kNotConverged);
  CHECK(count_lines(slurp(t.path / "o" / "trace.csv")) == 3);
}

TEST_CASE("cli config errors exit 1") {
  TempDir t("err");
  write_small_config(t.path / "s.json");
  std::string err;
  CHECK(run_args({"solve", "--config", (t.path / "missing.json").string()}, &err) == kConfigError);
  CHECK_FALSE(err.empty());

  std::ofstream(t.path / "bad.json") << "{\n  \"budget\": 10,\n  oops\n}\n";
  CHECK(run_args({"solve", "--config", (t.path / "bad.json").string()}, &err) == kConfigError);
  CHECK(err.find("line 3") != std::string::npos);

  CHECK(run_args({"compare", "--config", (t.path / "s.json").string(), "--methods", "bogus"}) ==
        kConfigError);
  CHECK(run_args({"solve", "--config", (t.path / "s.json").string(), "--init", "zeros"}) ==
        kConfigError);
  CHECK(run_args({"solve", "--no-such-flag"}) == kConfigError);
  CHECK(run_args({"sweep"}) == kConfigError);
  CHECK(run_args({}) == kConfigError);
}

TEST_CASE("cli compare: one row per requested method") {
  TempDir t("cmp");
  write_small_config(t.path / "s.json");
  CHECK(run_args({"compare", "--config", (t.path / "s.json").string(), "--methods", "proposed",
             "--max-iters", "3", "--out", t.path.string()}) == kOk);
  const std::string csv = slurp(t.path / "compare.csv");
  CHECK(count_lines(csv) == 2);
  CHECK(csv.find("\nproposed,") != std::string::npos);
}

TEST_CASE("cli sweep: deterministic, parallel-independent, failures exit 3") {
  TempDir t("sweep");
  write_small_config(t.path / "s.json");
  std::ofstream(t.path / "sw.json") << R"({"variable": "budget", "values": [100, 1000],
    "repetitions": 2, "methods": ["proposed", "spda"], "scenario_file": "s.json"})";
  const std::string cfg = (t.path / "sw.json").string();
  auto sweep_to = [&](const std::string& dir, const std::string& threads) {
    return run_args({"sweep", "--config", cfg, "--no-timing", "--max-iters", "4", "--parallel",
                threads, "--out", (t.path / dir).string(), "--plot"});
  };
  REQUIRE(sweep_to("a", "1") == kOk);
  REQUIRE(sweep_to("b", "1") == kOk);
  REQUIRE(sweep_to("c", "3") == kOk);
  const std::string a = slurp(t.path / "a" / "results.csv");
  CHECK(count_lines(a) == 1 + 2 * 2 * 2);
  CHECK(a == slurp(t.path / "b" / "results.csv"));
  CHECK(a == slurp(t.path / "c" / "results.csv"));
  CHECK(fs::exists(t.path / "a" / "sweep.svg"));

  // power overflows at the second value; the first still runs
  std::ofstream(t.path / "bad.json") << R"({"variable": "budget", "values": [1000, 1e300],
    "methods": ["spda"], "scenario_file": "s.json"})";
  CHECK(run_args({"sweep", "--config", (t.path / "bad.json").string(), "--out",
             (t.path / "d").string()}) == kPartialFailure);
  const std::string d = slurp(t.path / "d" / "results.csv");
  CHECK(d.find(",1e+300,failed,") != std::string::npos);
  CHECK(d.find(",1000,ok,") != std::string::npos);
}

TEST_CASE("cli bench: one warm-up plus R timed runs") {
  TempDir t("bench");
  write_small_config(t.path / "s.json");
  CHECK(run_args({"bench", "--config", (t.path / "s.json").string(), "--reps", "1", "--max-iters",
             "2", "--methods", "proposed,fourier", "--out", t.path.string()}) == kOk);
  const std::string csv = slurp(t.path / "bench.csv");
  CHECK(count_lines(csv) == 3);
  CHECK(csv.find("fourier") != std::string::npos);
}

TEST_CASE("csv quoting and result rows") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");

  MethodOutcome o;
  o.method = "proposed";
  o.ok = true;
  o.per_user = {std::log(2.0), 2 * std::log(2.0)};
  o.sum = 3 * std::log(2.0);
  const ResultRow r = to_row(o, 7, 1000.0);
  CHECK(r.sum_bits == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.sum_bits == doctest::Approx(r.per_user_bits[0] + r.per_user_bits[1]).epsilon(1e-9));

  ResultRow failed;
  failed.method = "spda";
  failed.error = "bad, \"value\"";
  std::ostringstream out;
  write_results_csv({failed}, out, false);
  CHECK(out.str().find("\"bad, \"\"value\"\"\"") != std::string::npos);
}

TEST_CASE("method parsing") {
  CHECK(parse_methods("proposed,spda-wmmse") ==
        std::vector<std::string>{"proposed", "spda-wmmse"});
  CHECK_THROWS_AS(parse_methods("proposed,,spda"), ConfigError);
  CHECK_THROWS_AS(parse_methods("svd"), ConfigError);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
