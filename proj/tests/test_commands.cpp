#include "chpsim/commands.hpp"

#include "chpsim/csv.hpp"

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace chpsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;

  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("chpsim_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }

  std::string str() const { return path.string(); }
};

std::string fixture(const std::string& name) { return testing::fixture_path(name); }

}  // namespace

TEST_SUITE("commands") {

TEST_CASE("validate reports clean and broken systems") {
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_validate(fixture("f1_mode1.json"), out, err) == kExitOk);

  std::ostringstream out2;
  std::ostringstream err2;
  CHECK(cmd_validate(fixture("f1_runaway.json"), out2, err2) == kExitInvalid);
  CHECK(out2.str().find("bus.negative-damping") != std::string::npos);

  std::ostringstream out3;
  std::ostringstream err3;
  CHECK(cmd_validate("/nonexistent.json", out3, err3) == kExitInvalid);
}

TEST_CASE("simulate writes a trajectory and its metadata") {
  TempDir dir("simulate");
  SimulateArgs args;
  args.config_path = fixture("f1_mode1.json");
  args.out_dir = dir.str();
  args.to_steady = true;
  std::ostringstream out;
  std::ostringstream err;
  REQUIRE(cmd_simulate(args, out, err) == kExitOk);

  const CsvTable table = read_csv_file((dir.path / "trajectory.csv").string());
  CHECK(table.column("omega_bus2") >= 0);
  REQUIRE(!table.rows.empty());
  const int w = table.require_column("omega_bus2");
  CHECK(table.rows.back()[static_cast<size_t>(w)] == doctest::Approx(-0.1).epsilon(1e-4));

  std::ifstream meta(dir.path / "metadata.txt");
  REQUIRE(meta.good());
  std::stringstream buf;
  buf << meta.rdbuf();
  CHECK(buf.str().find("chpsim") != std::string::npos);
  CHECK(buf.str().find("reached steady") != std::string::npos);
}

TEST_CASE("simulate rejects an invalid system") {
  TempDir dir("simulate_invalid");
  SimulateArgs args;
  args.config_path = fixture("f1_runaway.json");
  args.out_dir = dir.str();
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_simulate(args, out, err) == kExitInvalid);
}

TEST_CASE("simulate maps instability to the numeric exit code") {
  TempDir dir("simulate_diverge");
  nlohmann::json j;
  {
    std::ifstream in(fixture("f1_mode1.json"));
    in >> j;
  }
  j["sim"]["dt"] = 20.0;
  j["sim"]["t_end"] = 5000.0;
  j["sim"]["sample_every"] = 1;
  const fs::path cfg = dir.path / "diverge.json";
  std::ofstream(cfg) << j.dump(2);

  SimulateArgs args;
  args.config_path = cfg.string();
  args.out_dir = (dir.path / "out").string();
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_simulate(args, out, err) == kExitNumeric);
  CHECK(err.str().find("diverged") != std::string::npos);
}

TEST_CASE("equilibrium prints the starred quantities") {
  std::ostringstream out;
  std::ostringstream err;
  REQUIRE(cmd_equilibrium(fixture("f1_mode1.json"), out, err) == kExitOk);
  const std::string text = out.str();
  CHECK(text.find("omega*") != std::string::npos);
  CHECK(text.find("-0.1") != std::string::npos);
  CHECK(text.find("Tbar*") != std::string::npos);
  CHECK(text.find("security") != std::string::npos);
}

TEST_CASE("audit passes converging runs and fails the unstable one") {
  AuditArgs ok;
  ok.config_path = fixture("f1_mode1.json");
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_audit(ok, out, err) == kExitOk);
  CHECK(out.str().find("v1e") != std::string::npos);

  AuditArgs runaway;
  runaway.config_path = fixture("f1_runaway.json");
  std::ostringstream out2;
  std::ostringstream err2;
  CHECK(cmd_audit(runaway, out2, err2) == kExitInvalid);

  runaway.force_invalid = true;
  std::ostringstream out3;
  std::ostringstream err3;
  CHECK(cmd_audit(runaway, out3, err3) == kExitAudit);
}

TEST_CASE("analyze summarizes a written trajectory") {
  TempDir dir("analyze");
  SimulateArgs sim;
  sim.config_path = fixture("f1_mode1.json");
  sim.out_dir = dir.str();
  std::ostringstream sout;
  std::ostringstream serr;
  REQUIRE(cmd_simulate(sim, sout, serr) == kExitOk);

  AnalyzeArgs args;
  args.csv_path = (dir.path / "trajectory.csv").string();
  args.config_path = fixture("f1_mode1.json");
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_analyze(args, out, err) == kExitOk);
  CHECK(out.str().find("frequencies") != std::string::npos);
  CHECK(out.str().find("omega_bus2") != std::string::npos);

  AnalyzeArgs missing;
  missing.csv_path = (dir.path / "absent.csv").string();
  std::ostringstream out2;
  std::ostringstream err2;
  CHECK(cmd_analyze(missing, out2, err2) == kExitInvalid);
}

TEST_CASE("batch runs scenarios and rejects ambiguous names") {
  TempDir dir("batch");
  BatchArgs args;
  args.config_paths = {fixture("f1_mode1.json"), fixture("f1_heatstep.json")};
  args.out_root = dir.str();
  args.jobs = 2;
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_batch(args, out, err) == kExitOk);
  CHECK(fs::exists(dir.path / "f1_mode1" / "trajectory.csv"));
  CHECK(fs::exists(dir.path / "f1_heatstep" / "trajectory.csv"));
  CHECK(out.str().find("f1_mode1") != std::string::npos);

  BatchArgs dup;
  dup.config_paths = {fixture("f1_mode1.json"), fixture("f1_mode1.json")};
  dup.out_root = dir.str();
  std::ostringstream out2;
  std::ostringstream err2;
  CHECK(cmd_batch(dup, out2, err2) == kExitInvalid);
}

}  // TEST_SUITE
