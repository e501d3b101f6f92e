// maxent: run reweighting experiments from JSON configs.
//
//   maxent run <config>                 simulate, reweight, write a result bundle
//   maxent reweight <csv> <restraints>  reweight an external observable matrix
//   maxent plotdata <bundle> <which>    posterior_kde | trajectory_band | entropy_curve
//   maxent validate <config>            parse and check a config without running it
//
// Exit codes: 0 success, 1 error, 2 the solver did not converge.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "maxent/experiment.hpp"

namespace {

int report(const maxent::RunOutcome& outcome) {
  std::cout << "bundle: " << outcome.bundle.string() << "\n";
  if (outcome.exit_code == 2) std::cerr << "warning: solver did not converge; see summary.json\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-entropy reweighting of simulation ensembles"};
  app.require_subcommand(1);

  std::string config_path, csv_path, restraints_path, bundle_path, which;

  auto* run = app.add_subcommand("run", "Run an experiment config and write its result bundle");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  auto* reweight = app.add_subcommand("reweight", "Reweight an observable matrix read from CSV");
  reweight->add_option("csv", csv_path, "Observable CSV: header row, one row per sample")->required();
  reweight->add_option("restraints", restraints_path, "Restraints file (JSON)")->required();

  auto* plot = app.add_subcommand("plotdata", "Write plot-ready CSVs from a result bundle");
  plot->add_option("bundle", bundle_path, "Result bundle directory")->required();
  plot->add_option("which", which, "posterior_kde, trajectory_band or entropy_curve")->required();

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return report(maxent::run_experiment(maxent::load_config(config_path)));
    if (*reweight) return report(maxent::run_experiment(maxent::load_external_config(csv_path, restraints_path)));
    if (*plot) {
      for (const auto& p : maxent::emit_plot_data(bundle_path, maxent::parse_plot_data(which)))
        std::cout << p.string() << "\n";
      return 0;
    }
    if (*validate) {
      const auto config = maxent::load_config(config_path);
      std::cout << config_path << ": ok (" << maxent::to_string(config.kind) << ")\n";
      return 0;
    }
  } catch (const maxent::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
