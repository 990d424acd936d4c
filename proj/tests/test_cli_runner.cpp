#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "kfp/cli_runner.hpp"
#include "kfp/errors.hpp"

using namespace kfp;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  Scratch() : dir(fs::temp_directory_path() / ("kfp_cli_" + std::to_string(counter++))) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  std::string path(const std::string& name) const { return (dir / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return path(name);
  }
  std::string read(const std::string& name) const {
    std::ifstream f(dir / name, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }
  json read_json(const std::string& name) const { return json::parse(read(name)); }

  fs::path dir;
  static inline int counter = 0;
};

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "kfp");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("analyze reports the DW1 landscape and saddle symbol") {
  Scratch s;
  const Run r = run({"analyze", "--model", "DW1", "--out", s.path("o")});
  REQUIRE(r.code == exit_code::ok);
  const json j = s.read_json("o/analysis.json");
  CHECK(j["wells"]["S_min"].get<double>() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(j["wells"]["S_minus"].get<double>() == doctest::Approx(0.25).epsilon(1e-12));
  std::vector<double> re;
  for (const auto& z : j["saddle_lambdas"]) {
    CHECK(std::abs(z["im"].get<double>()) <= 1e-12);
    re.push_back(z["re"].get<double>());
  }
  std::sort(re.begin(), re.end());
  REQUIRE(re.size() == 2);
  CHECK(re[0] == doctest::Approx((1 - std::sqrt(5.0)) / 4).epsilon(1e-12));
  CHECK(re[1] == doctest::Approx((1 + std::sqrt(5.0)) / 4).epsilon(1e-12));
  CHECK(j["saddle_geometry"]["pass"].get<bool>());
  CHECK(j["critical_points"].size() == 3);
  CHECK(fs::exists(s.dir / "o" / "config.json"));
  CHECK(r.out.find("S_min = 0.25") != std::string::npos);
}

TEST_CASE("exit codes for landscape and symbol failures") {
  Scratch s;
  CHECK(run({"analyze", "--model", "single-well-test", "--out", s.path("o")}).code == exit_code::not_double_well);
  const std::string cfg = s.write("rot.json", R"({
  "model": {"name": "rotation", "dim": 2,
            "phi": [{"exps": [4, 0], "coef": 0.25}, {"exps": [2, 0], "coef": -0.5}, {"exps": [0, 2], "coef": 0.5}],
            "A": [[0, 0.5], [-0.5, 0]]}
})");
  CHECK(run({"analyze", "--config", cfg, "--out", s.path("o")}).code == exit_code::imaginary_axis);
  CHECK(run({"analyze", "--model", "no-such-model"}).code == exit_code::config_error);
  CHECK(run({"frobnicate"}).code == exit_code::config_error);
  CHECK(run({}).code == exit_code::config_error);
  CHECK(run({"spectrum", "--degree", "2"}).code == exit_code::config_error);
}

TEST_CASE("config validation") {
  Scratch s;
  SUBCASE("syntax error carries line and column") {
    const std::string text = "{\n  \"model\": \"DW1\",\n  \"grid\": {\"resolution\": 2,}\n}\n";
    try {
      parse_run_config(text, "cfg.json");
      FAIL("no exception");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() > 0);
    }
    const Run r = run({"check", "--config", s.write("bad.json", text)});
    CHECK(r.code == exit_code::config_error);
    CHECK(r.err.find(":3:") != std::string::npos);
  }
  SUBCASE("unknown keys are rejected with their position") {
    try {
      parse_run_config("{\n  \"solver\": {\n    \"tolerance\": 1e-8\n  }\n}", "cfg.json");
      FAIL("no exception");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == 5);
    }
    CHECK_THROWS_AS(parse_run_config(R"({"modle": "DW1"})"), ConfigError);
  }
  SUBCASE("tolerances must be positive") {
    CHECK_THROWS_AS(parse_run_config(R"({"solver": {"tol": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"structure": {"d1d0": -1e-13}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"hypotheses": {"threshold": "small"}})"), ConfigError);
  }
  SUBCASE("h lists must be strictly decreasing") {
    CHECK_THROWS_AS(parse_run_config(R"({"sweep": {"h": [0.1, 0.2]}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"sweep": {"h": [0.1, 0.1]}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"resolvent": {"h": []}})"), ConfigError);
    CHECK(parse_run_config(R"({"sweep": {"h": [0.2, 0.1]}})").sweep.h.size() == 2);
  }
  SUBCASE("other shapes") {
    CHECK_THROWS_AS(parse_run_config(R"({"solver": {"shifts": [[0.1, 0.5]]}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"degree": 3})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"([1, 2])"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"model": {"name": "x", "dim": 2}})"), ConfigError);
  }
  SUBCASE("round trip through to_json") {
    RunConfig c = parse_run_config(R"({"model": "DW2", "solver": {"shifts": [-0.1, [0.5, 1.0]]}, "h": 0.08})");
    CHECK(c.model.name == "DW2");
    CHECK(c.solver.shifts.size() == 2);
    CHECK(c.h == 0.08);
    const RunConfig back = parse_run_config(c.to_json().dump());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.defaults_used.empty());
  }
  SUBCASE("missing sections are recorded") {
    const RunConfig c = parse_run_config(R"({"model": "DW1"})");
    CHECK(std::find(c.defaults_used.begin(), c.defaults_used.end(), "hypotheses") != c.defaults_used.end());
  }
}

TEST_CASE("check: certified for DW1, fails without transport") {
  Scratch s;
  const Run ok = run({"check", "--model", "DW1", "--out", s.path("a")});
  CHECK(ok.code == exit_code::ok);
  CHECK(ok.out.find("defaults used") != std::string::npos);
  const json j = s.read_json("a/hypotheses.json");
  CHECK(j["pass"].get<bool>());
  CHECK(j["defaults_used"].get<bool>());
  for (const auto& p : j["ny17"]) CHECK(p["constant"].get<double>() <= 1e3);
  CHECK(s.read("a/ny19_ny20.csv").rfind("x0,x1,average,measure_fraction,pass\n", 0) == 0);

  CHECK(run({"check", "--model", "nu-zero-test", "--out", s.path("b")}).code == exit_code::hypothesis_fails);
  CHECK_FALSE(s.read_json("b/hypotheses.json")["pass"].get<bool>());
}

TEST_CASE("complex-verify: structural identities at roundoff") {
  Scratch s;
  REQUIRE(run({"complex-verify", "--model", "DW1", "--h", "0.1", "--out", s.path("o")}).code == exit_code::ok);
  const json j = s.read_json("o/complex.json");
  CHECK(j["d1d0"].get<double>() <= 1e-13);
  CHECK(j["kernel"].get<double>() <= 1e-12);
  CHECK(j["adjoint_symmetry"].get<double>() <= 1e-12);
  CHECK(j["maxwellian_tail"].get<double>() <= 1e-12);
}

TEST_CASE("spectrum: degree-1 smallest value pairs with degree 0, and output is reproducible") {
  Scratch s;
  const std::vector<std::string> args{"spectrum", "--model", "DW1", "--h", "0.1", "--degree", "1", "--out", s.path("a")};
  REQUIRE(run(args).code == exit_code::ok);
  const json j = s.read_json("a/spectrum.json");
  CHECK(j["pairing_relative_difference"].get<double>() <= 1e-6);
  CHECK(j["degree"].get<int>() == 1);
  CHECK(s.read("a/spectrum.csv").rfind("h,degree,re,im,residual,matched_mu_re,matched_mu_im,deviation\n", 0) == 0);

  std::map<std::string, std::string> first;
  for (const char* f : {"spectrum.json", "spectrum.csv", "config.json"}) first[f] = s.read(std::string("a/") + f);
  REQUIRE(run(args).code == exit_code::ok);
  for (const auto& [f, text] : first) CHECK(s.read("a/" + f) == text);
  // no temporaries left behind
  for (const auto& e : fs::directory_iterator(s.dir / "a")) CHECK(e.path().filename().string().front() != '.');
}

TEST_CASE("splitting: exponent, prefactor, bad fit") {
  Scratch s;
  REQUIRE(run({"splitting", "--model", "DW1", "--out", s.path("o")}).code == exit_code::ok);
  const json f = s.read_json("o/fit.json");
  CHECK(f.size() == 5);
  CHECK(std::abs(f["slope"].get<double>() - 0.5) <= 0.025);
  CHECK(f["slope_target"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f["pass"].get<bool>());
  CHECK(s.read_json("o/prefactor.json")["pass"].get<bool>());
  const std::string csv = s.read("o/splitting.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  const std::string cfg = s.write("short.json", R"({"model": "DW1", "sweep": {"h": [0.14, 0.12, 0.1, 0.08]}})");
  CHECK(run({"splitting", "--config", cfg, "--out", s.path("p")}).code == exit_code::bad_fit);
}

TEST_CASE("solver failure maps to its exit code") {
  Scratch s;
  const std::string cfg = s.write("tight.json", R"({"model": "DW1", "h": 0.2, "solver": {"tol": 1e-40, "count": 2}})");
  CHECK(run({"spectrum", "--config", cfg, "--out", s.path("o")}).code == exit_code::not_converged);
}

TEST_CASE("resolvent: probes and ratio on a coarse pair") {
  Scratch s;
  const std::string cfg =
      s.write("res.json", R"({"model": "DW1", "resolvent": {"h": [0.2, 0.14], "resolution": 2, "max_ratio": 100}})");
  REQUIRE(run({"resolvent", "--config", cfg, "--out", s.path("o")}).code == exit_code::ok);
  const json j = s.read_json("o/resolvent.json");
  CHECK(j["per_h"].size() == 2);
  CHECK(j["max_ratio"].get<double>() >= 1.0);
  const std::string csv = s.read("o/resolvent.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
  for (const auto& p : j["per_h"]) CHECK(p["max_scaled"].get<double>() > 0.0);
}

TEST_CASE("atomic write replaces the target") {
  Scratch s;
  write_atomic(s.dir.string(), "x.txt", "one");
  write_atomic(s.dir.string(), "x.txt", "two");
  CHECK(s.read("x.txt") == "two");
  CHECK_FALSE(fs::exists(s.dir / ".x.txt.tmp"));
}
