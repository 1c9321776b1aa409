#include "chpsim/commands.hpp"
#include "chpsim/version.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification of combined electric power and "
               "district heating networks with heat-pump frequency support"};
  app.set_version_flag("--version", std::string(chpsim::kToolName) + " " +
                                        chpsim::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  chpsim::SimulateArgs sim_args;
  chpsim::AuditArgs audit_args;
  chpsim::AnalyzeArgs analyze_args;
  chpsim::BatchArgs batch_args;
  std::string sim_out_dir;
  std::string analyze_config;

  CLI::App* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("config", config_path, "scenario JSON file")->required();

  CLI::App* simulate =
      app.add_subcommand("simulate", "Integrate a scenario and write trajectory outputs");
  simulate->add_option("config", sim_args.config_path, "scenario JSON file")->required();
  simulate->add_option("--out", sim_out_dir, "output directory (overrides the config)");
  simulate->add_flag("--to-steady", sim_args.to_steady,
                     "stop once the state is stationary after the last disturbance");

  CLI::App* equilibrium = app.add_subcommand(
      "equilibrium", "Report the post-disturbance equilibrium and allocation cross-checks");
  equilibrium->add_option("config", config_path, "scenario JSON file")->required();

  CLI::App* audit = app.add_subcommand(
      "audit", "Check storage-function monotonicity and decay along a simulation");
  audit->add_option("config", audit_args.config_path, "scenario JSON file")->required();
  audit->add_flag("--force-invalid", audit_args.force_invalid,
                  "audit even a system that fails validation");
  audit->add_option("--tol", audit_args.tol, "monotonicity slack")
      ->capture_default_str();
  audit->add_option("--decay-tol", audit_args.decay_tol,
                    "final storage bound on converged runs")
      ->capture_default_str();

  CLI::App* analyze =
      app.add_subcommand("analyze", "Summarize a trajectory CSV written by simulate");
  analyze->add_option("csv", analyze_args.csv_path, "trajectory.csv file")->required();
  analyze->add_option("--config", analyze_config,
                      "scenario file for sharing ratios and the settling window");
  analyze->add_option("--band", analyze_args.band, "settling band")->capture_default_str();
  analyze->add_option("--hold", analyze_args.hold, "settling hold time")
      ->capture_default_str();

  CLI::App* batch =
      app.add_subcommand("batch", "Simulate several scenarios into one output tree");
  batch->add_option("configs", batch_args.config_paths, "scenario JSON files")->required();
  batch->add_option("--out", batch_args.out_root, "output root directory")
      ->capture_default_str();
  batch->add_option("--jobs", batch_args.jobs, "worker threads (0: hardware)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return chpsim::kExitUsage;
  }

  if (validate->parsed()) return chpsim::cmd_validate(config_path, std::cout, std::cerr);
  if (simulate->parsed()) {
    if (!sim_out_dir.empty()) sim_args.out_dir = sim_out_dir;
    return chpsim::cmd_simulate(sim_args, std::cout, std::cerr);
  }
  if (equilibrium->parsed()) return chpsim::cmd_equilibrium(config_path, std::cout, std::cerr);
  if (audit->parsed()) return chpsim::cmd_audit(audit_args, std::cout, std::cerr);
  if (analyze->parsed()) {
    if (!analyze_config.empty()) analyze_args.config_path = analyze_config;
    return chpsim::cmd_analyze(analyze_args, std::cout, std::cerr);
  }
  if (batch->parsed()) return chpsim::cmd_batch(batch_args, std::cout, std::cerr);
  return chpsim::kExitUsage;
}
