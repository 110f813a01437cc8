#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "doctest.h"
#include "flockfem/app.hpp"
#include "flockfem/errors.hpp"
#include "flockfem/io.hpp"

using namespace flockfem;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "flockfem_test_io" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s, char skip) {
  int n = 0;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != skip) ++n;
  return n;
}

int run(Command c, const fs::path& config, const fs::path& out, std::string* log = nullptr) {
  std::ostringstream os;
  const int code = run_cli(c, config, out, os);
  if (log) *log = os.str();
  return code;
}

}  // namespace

TEST_CASE("minimal config resolves the two-flock defaults") {
  const RunConfig c = parse_config_text(R"({"scenario": {"preset": "two_flock"}})", Command::Simulate);
  CHECK(c.scenario.num_elements == 100);
  CHECK(c.scenario.step.k == 0.05);
  CHECK(c.scenario.step.T == 2.0);
  CHECK(c.scenario.kernel.kind == KernelKind::RationalSqrt);
  CHECK(c.scenario.variants.size() == 1);
  CHECK(c.config_hash.size() == 16);
  CHECK(c.resolved_json.find("output_dir") == std::string::npos);

  const RunConfig cmp = parse_config_text("{}", Command::Compare);
  CHECK(cmp.scenario.variants.size() == 3);

  const RunConfig conv = parse_config_text("{}", Command::Converge);
  CHECK(conv.sweep.level_min == 2);
  CHECK(conv.sweep.level_max == 6);
  CHECK(conv.sweep.kernel.kind == KernelKind::Constant);
}

TEST_CASE("config hash tracks resolved parameters, not spelling") {
  const RunConfig a = parse_config_text(R"({"scenario": {"k": 0.05, "T": 2}})", Command::Simulate);
  const RunConfig b = parse_config_text(R"({"scenario":{"T":2.0},"output_dir":"x"})", Command::Simulate);
  const RunConfig c = parse_config_text(R"({"scenario": {"k": 0.025}})", Command::Simulate);
  CHECK(a.config_hash == b.config_hash);
  CHECK(a.config_hash != c.config_hash);
  CHECK(hash_hex(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hash_hex(fnv1a64("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("config errors") {
  auto rejects = [](const std::string& text, const std::string& needle,
                    Command cmd = Command::Simulate) {
    try {
      parse_config_text(text, cmd);
      FAIL("accepted: " << text);
    } catch (const ConfigError& e) {
      CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
  };
  rejects(R"({"scenario": {"viscosity": 0.1}})", "viscosity");
  rejects(R"({"scenario": {"k": 0.03}})", "integer");
  rejects(R"({"scenario": {"preset": "three_flock"}})", "three_flock");
  rejects(R"({"scenario": {"num_elements": 1.5}})", "num_elements");
  rejects(R"({"scenario": {"kernel": "gaussian"}})", "gaussian");
  rejects(R"({"scenario": {"forcing": "residual"}})", "forcing");
  rejects(R"({"scenario": {"preset": "manufactured", "kernel": "rational_sqrt",
              "forcing": "closed_form"}})", "closed_form");
  rejects(R"({"command": "compare"})", "command");
  rejects(R"({"scenario": {"num_elements": 32}})", "num_elements", Command::Converge);
  rejects(R"({"scenario": {"variant": "newton"}})", "newton");
  rejects(R"({"scenario": {"k": 0.05,)", "malformed");
}

TEST_CASE("strict CFL is enforced at parse time") {
  CHECK_THROWS_AS(parse_config_text(R"({"scenario": {"k": 0.01, "T": 0.1, "cfl_strict": true}})",
                                    Command::Simulate),
                  CflViolation);
  CHECK_NOTHROW(parse_config_text(R"({"scenario": {"k": 0.0025, "T": 0.1, "cfl_strict": true}})",
                                  Command::Simulate));
}

TEST_CASE("number formatting keeps 17 significant digits") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(2.0) == "2");
  CHECK(std::stod(format_number(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("exit codes") {
  const fs::path d = fresh_dir("exit");
  std::string log;
  CHECK(run(Command::Simulate, write_config(d, R"({"scenario": {"viscosity": 1}})"), d / "a", &log) ==
        kExitConfig);
  CHECK(log.find("viscosity") != std::string::npos);
  CHECK(run(Command::Simulate, write_config(d, "{ not json"), d / "b") == kExitConfig);
  CHECK(run(Command::Simulate,
            write_config(d, R"({"scenario": {"k": 0.01, "T": 0.1, "cfl_strict": true}})"),
            d / "c") == kExitCfl);
  CHECK(run(Command::Simulate, d / "does_not_exist.json", d / "e") == kExitConfig);

  // A tiny derivative cap makes the first step fail.
  const fs::path out = d / "d";
  CHECK(run(Command::Simulate, write_config(d, R"({"scenario": {"T": 0.5, "dxu_cap": 1e-6}})"),
            out, &log) == kExitRuntime);
  const std::string ts = slurp(out / "timeseries.csv");
  CHECK(ts.find("# failure: BlowUpSuspected") != std::string::npos);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary.dump().find("BlowUpSuspected") != std::string::npos);
}

TEST_CASE("output lock") {
  const fs::path d = fresh_dir("lock");
  const fs::path out = d / "out";
  {
    OutputLock lock(out);
    CHECK(fs::exists(out / ".lock"));
    CHECK_THROWS_AS(OutputLock{out}, Error);
    CHECK(run(Command::Simulate, write_config(d, R"({"scenario": {"T": 0.1}})"), out) == kExitRuntime);
  }
  CHECK_FALSE(fs::exists(out / ".lock"));
  CHECK(run(Command::Simulate, write_config(d, R"({"scenario": {"T": 0.1}})"), out) == kExitOk);
}

TEST_CASE("simulate writes deterministic, hash-stamped outputs") {
  const fs::path d = fresh_dir("simulate");
  const fs::path cfgp = write_config(d, R"({"scenario": {"preset": "two_flock"}})");
  std::string log;
  REQUIRE(run(Command::Simulate, cfgp, d / "a", &log) == kExitOk);
  CHECK(log.find("warning") != std::string::npos);  // k = 5h exceeds the guard
  REQUIRE(run(Command::Simulate, cfgp, d / "b") == kExitOk);

  const std::string ts = slurp(d / "a" / "timeseries.csv");
  CHECK(ts.rfind(std::string(kTimeseriesHeader), 0) == 0);
  CHECK(count_lines(ts, '#') == 1 + 41);
  // The interpolated bumps dip below zero, so the entropy column stays empty.
  std::istringstream rows(ts);
  std::string line;
  std::getline(rows, line);
  std::getline(rows, line);
  CHECK(line.find(",,") != std::string::npos);

  const std::string hash = parse_config(cfgp, Command::Simulate).config_hash;
  for (const auto& entry : fs::directory_iterator(d / "a")) {
    if (entry.path().filename() == ".lock") continue;
    const std::string a = slurp(entry.path());
    CHECK_MESSAGE(a == slurp(d / "b" / entry.path().filename()), entry.path());
    CHECK_MESSAGE(a.find(hash) != std::string::npos, entry.path());
  }
  const auto meta = nlohmann::json::parse(slurp(d / "a" / "run_meta.json"));
  CHECK(meta["config_hash"] == hash);
  CHECK(meta.contains("kernel_constants"));
}

TEST_CASE("compare, converge and check commands") {
  const fs::path d = fresh_dir("commands");
  const fs::path cmp = write_config(d, R"({"scenario": {"num_elements": 30, "T": 0.2}})");
  REQUIRE(run(Command::Compare, cmp, d / "cmp") == kExitOk);
  for (const char* f : {"timeseries_cucker_smale.csv", "timeseries_s_model.csv",
                        "timeseries_motsch_tadmor.csv", "differences.csv", "small_flock.csv",
                        "summary.json", "run_meta.json"})
    CHECK_MESSAGE(fs::exists(d / "cmp" / f), f);
  CHECK(slurp(d / "cmp" / "differences.csv").rfind(std::string(kDifferencesHeader), 0) == 0);

  const fs::path conv = write_config(d, R"({"scenario": {"levels": [2, 4]}})");
  REQUIRE(run(Command::Converge, conv, d / "conv") == kExitOk);
  const std::string c = slurp(d / "conv" / "convergence.csv");
  CHECK(count_lines(c, '#') == 1 + 3);

  const fs::path chk = write_config(d, "{}");
  REQUIRE(run(Command::Check, chk, d / "chk") == kExitOk);
  const auto j = nlohmann::json::parse(slurp(d / "chk" / "check.json"));
  CHECK(j.contains("threshold"));
  CHECK(j.contains("small_data"));
  CHECK(j.contains("entropy_bound"));
}

#ifdef FLOCKFEM_CLI
TEST_CASE("command-line tool exit codes") {
  const fs::path d = fresh_dir("cli");
  const std::string exe = FLOCKFEM_CLI;
  auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + " > " + (d / "log.txt").string() + " 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  const fs::path bad = write_config(d, R"({"scenario": {"viscosity": 1}})");
  CHECK(status("simulate --config " + bad.string() + " --output-dir " + (d / "o").string()) == 2);
  CHECK(slurp(d / "log.txt").find("viscosity") != std::string::npos);
  CHECK(status("frobnicate") == 2);
  const fs::path ok = write_config(d, R"({"scenario": {"T": 0.1}})");
  CHECK(status("simulate --config " + ok.string() + " --output-dir " + (d / "o").string()) == 0);
}
#endif
