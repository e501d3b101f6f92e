#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maxent/matrix.hpp"

namespace maxent {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// ---------------------------------------------------------------------------
// Point particle among three fixed attractors.

struct GravityConfig {
  std::array<Point2, 3> attractors{{{-60.0, -40.0}, {40.0, -60.0}, {0.0, 60.0}}};
  double gravitational_constant = 1200.0;
  Point2 start{0.0, 0.0};
  double dt = 0.1;
  std::size_t steps = 100;
  double softening = 6.0;

  void validate() const;
};

/// Packed as {m1, m2, m3, v0x, v0y}.
struct GravityParams {
  std::array<double, 3> masses{};
  Point2 velocity;

  static GravityParams from_vector(std::span<const double> theta);
};

/// Positions at steps 0..steps (steps + 1 rows).
struct GravityTrajectory {
  std::vector<Point2> positions;
};

/// Semi-implicit Euler: v += dt * a(x); x += dt * v.
GravityTrajectory simulate_gravity(const GravityParams& params, const GravityConfig& config);

/// Default observation steps: every 20th step up to 100, capped at the last step.
std::vector<std::size_t> default_gravity_observation_steps(const GravityConfig& config);

/// Flattened (x, y) pairs at the requested steps.
std::vector<double> gravity_observables(const GravityTrajectory& trajectory,
                                        std::span<const std::size_t> steps);

// ---------------------------------------------------------------------------
// SEAIR metapopulation.

enum Compartment : std::size_t { kS = 0, kE = 1, kA = 2, kI = 3, kR = 4 };
inline constexpr std::size_t kCompartments = 5;

struct SeairConfig {
  Matrix mobility;  // patches x patches, row-stochastic
  double beta = 0.25;
  double dt = 1.0;
  std::size_t steps = 250;

  std::size_t patches() const { return mobility.rows(); }
  void validate() const;
};

/// Packed as {start_I, start_A, E_period, A_period, I_period}.
struct SeairParams {
  double start_i = 0.0;
  double start_a = 0.0;
  double e_period = 1.0;
  double a_period = 1.0;
  double i_period = 1.0;

  static SeairParams from_vector(std::span<const double> theta);
  bool valid() const;
  void validate() const;
};

/// Fractions indexed [step][patch][compartment], steps 0..steps.
struct SeairTrajectory {
  std::size_t steps = 0;  // number of integration steps; there are steps + 1 states
  std::size_t patches = 0;
  std::vector<double> values;
  std::size_t clamp_events = 0;

  double at(std::size_t step, std::size_t patch, std::size_t compartment) const {
    return values[(step * patches + patch) * kCompartments + compartment];
  }
  double& at(std::size_t step, std::size_t patch, std::size_t compartment) {
    return values[(step * patches + patch) * kCompartments + compartment];
  }
};

/// Seeds patch 0; all other patches start fully susceptible.
SeairTrajectory simulate_seair(const SeairParams& params, const SeairConfig& config);

std::vector<double> seair_observables(const SeairTrajectory& trajectory, std::size_t patch,
                                      std::size_t compartment, std::span<const std::size_t> times);

/// Row-stochastic matrix whose diagonal entries are all >= diagonal_floor.
Matrix make_mobility_matrix(std::size_t patches, std::uint64_t seed, double diagonal_floor = 0.8);

/// `count` distinct sorted integer times drawn uniformly from [0, last_time].
std::vector<std::size_t> random_observation_times(std::size_t count, std::size_t last_time,
                                                  std::uint64_t seed);

// ---------------------------------------------------------------------------

struct NoiseSpec {
  enum class Kind { None, Gaussian, UniformFractionOfPeak };
  Kind kind = Kind::None;
  double scale = 0.0;  // std for Gaussian, fraction for UniformFractionOfPeak

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double std_dev) { return {Kind::Gaussian, std_dev}; }
  static NoiseSpec fraction_of_peak(double fraction) { return {Kind::UniformFractionOfPeak, fraction}; }
};

/// Noisy targets from reference values. `peak` is only used by UniformFractionOfPeak,
/// which adds U(-scale * peak, +scale * peak).
std::vector<double> synthesize_observations(std::span<const double> reference, const NoiseSpec& noise,
                                            std::uint64_t seed, double peak = 0.0);

/// Largest value of one compartment in one patch over the whole trajectory.
double compartment_peak(const SeairTrajectory& trajectory, std::size_t patch, std::size_t compartment);

}  // namespace maxent
