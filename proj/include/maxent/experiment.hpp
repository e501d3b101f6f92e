#pragma once

// End-to-end driver behind the `maxent` command line tool: parses a JSON
// experiment config, builds the ensemble, solves for weights and writes a
// result bundle directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxent/baselines.hpp"
#include "maxent/distributions.hpp"
#include "maxent/maxent_core.hpp"
#include "maxent/simulators.hpp"

namespace maxent {

inline constexpr const char* kVersion = "0.1.0";

/// Environment variable that, when set, prefixes every relative output directory.
inline constexpr const char* kOutputRootEnv = "MAXENT_OUTPUT_ROOT";

/// Invalid experiment config. The message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A bundle asked for plot data is missing a file or entry.
class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Toy, Gravity, Seair, External };

std::string to_string(ExperimentKind kind);

/// Observable chosen either by column position or by column name (external CSVs).
struct RestraintSpec {
  std::optional<std::size_t> index;
  std::optional<std::string> column;
  double target = 0.0;
  ErrorPrior error;
};

struct VariationalSettings {
  bool enabled = false;
  std::size_t rounds = 10;
  double ess_floor = 0.05;  // fraction of M
  double learning_rate = 1.0;
};

struct BaselineSettings {
  bool abc = false;
  AbcOptions abc_options;
  bool least_squares = false;
  std::size_t least_squares_iterations = 2000;
  bool cross_validation = false;  // SEAIR leave-one-out over restraints
};

struct GravitySettings {
  GravityConfig scene;
  std::vector<double> truth{80.0, 45.0, 75.0, 10.0, -33.0};
  std::vector<std::size_t> observation_steps;  // empty: default_gravity_observation_steps
  double noise_std = 3.0;
  ErrorPrior error;
};

struct SeairSettings {
  std::size_t patches = 3;
  double beta = 0.25;
  double dt = 1.0;
  std::size_t steps = 250;
  double diagonal_floor = 0.8;
  std::vector<double> truth{0.02, 0.05, 7.0, 5.0, 14.0};
  std::size_t observation_patch = 0;
  std::size_t observation_compartment = kI;
  std::size_t observation_count = 5;
  std::size_t observation_window = 125;  // times drawn from [0, observation_window]
  double noise_fraction = 0.05;
  std::size_t evaluation_patch = 2;
  ErrorPrior error = ErrorPrior::laplace(0.01);
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Toy;
  std::uint64_t seed = 0;
  std::size_t ensemble_size = 1000;
  std::optional<std::size_t> batch_size;  // provenance only; the solver is full-batch
  std::optional<Prior> prior;
  std::vector<RestraintSpec> restraints;  // toy and external
  OptimizerOptions optimizer;
  VariationalSettings variational;
  BaselineSettings baselines;
  GravitySettings gravity;
  SeairSettings seair;
  std::filesystem::path observables_csv;  // external
  std::filesystem::path output_dir = "maxent-output";
  std::string source_text;  // raw config bytes, hashed into the provenance block
};

/// Strict parse: unknown fields, wrong types and out-of-range values raise ConfigError.
/// Relative input paths are resolved against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Restraints file for `reweight`: {"restraints": [...], "optimizer": {...}, "output_dir": ...}.
ExperimentConfig load_external_config(const std::filesystem::path& observables_csv,
                                      const std::filesystem::path& restraints_path);

/// output_dir, prefixed by $MAXENT_OUTPUT_ROOT when that is set and output_dir is relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

/// 16 hex digits of FNV-1a over the text.
std::string content_hash(const std::string& text);

struct RunOutcome {
  int exit_code = 0;  // 0 converged, 2 flagged non-convergence
  std::filesystem::path bundle;
  nlohmann::json summary;
};

/// Runs a parsed config and writes the bundle. Throws on errors.
RunOutcome run_experiment(const ExperimentConfig& config);

enum class PlotData { PosteriorKde, TrajectoryBand, EntropyCurve };

PlotData parse_plot_data(const std::string& name);

/// Writes CSVs under <bundle>/plots and returns their paths.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& bundle, PlotData which);

/// Half-width used to decide when the Bayesian toy posterior mean "matches" r_bar,
/// in units of the prior standard deviation.
inline constexpr double kEntropyCurveMatchTolerance = 0.1;

// ---------------------------------------------------------------------------
// Leave-one-out over restraints: each fold drops one observation, refits with
// both MaxEnt and least squares, and predicts a fixed set of quantities.

struct LeaveOneOutInput {
  const Ensemble* ensemble = nullptr;          // observables: one column per restraint
  std::vector<Restraint> restraints;
  const Matrix* predictions = nullptr;         // M x P quantity predicted per sample
  OptimizerOptions optimizer;
  ObservableFn observables;                    // theta -> all restraint observables
  ObservableFn predict;                        // theta -> P predicted quantities
  std::vector<double> initial_params;          // least-squares start
  NelderMeadOptions least_squares;
};

struct LeaveOneOutResult {
  Matrix maxent;         // folds x P
  Matrix least_squares;  // folds x P
  std::vector<double> maxent_std;
  std::vector<double> least_squares_std;
};

LeaveOneOutResult leave_one_out(const LeaveOneOutInput& input);

/// Sample standard deviation of each column.
std::vector<double> column_std(const Matrix& m);

}  // namespace maxent
