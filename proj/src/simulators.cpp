#include "maxent/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace maxent {

void GravityConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("gravity: steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("gravity: dt must be > 0");
  if (!(softening > 0.0)) throw std::invalid_argument("gravity: softening must be > 0");
}

GravityParams GravityParams::from_vector(std::span<const double> theta) {
  if (theta.size() != 5) throw std::invalid_argument("gravity: expected 5 parameters {m1, m2, m3, v0x, v0y}");
  return {{theta[0], theta[1], theta[2]}, {theta[3], theta[4]}};
}

GravityTrajectory simulate_gravity(const GravityParams& params, const GravityConfig& config) {
  config.validate();
  GravityTrajectory out;
  out.positions.reserve(config.steps + 1);
  Point2 x = config.start;
  Point2 v = params.velocity;
  out.positions.push_back(x);
  const double eps2 = config.softening * config.softening;
  for (std::size_t s = 0; s < config.steps; ++s) {
    Point2 a;
    for (std::size_t j = 0; j < 3; ++j) {
      const double dx = config.attractors[j].x - x.x;
      const double dy = config.attractors[j].y - x.y;
      const double r2 = dx * dx + dy * dy + eps2;
      const double f = config.gravitational_constant * params.masses[j] / (r2 * std::sqrt(r2));
      a.x += f * dx;
      a.y += f * dy;
    }
    v.x += config.dt * a.x;
    v.y += config.dt * a.y;
    x.x += config.dt * v.x;
    x.y += config.dt * v.y;
    out.positions.push_back(x);
  }
  return out;
}

std::vector<std::size_t> default_gravity_observation_steps(const GravityConfig& config) {
  std::vector<std::size_t> steps;
  for (std::size_t s = 20; s <= 100; s += 20) steps.push_back(std::min(s, config.steps));
  return steps;
}

std::vector<double> gravity_observables(const GravityTrajectory& trajectory,
                                        std::span<const std::size_t> steps) {
  std::vector<double> out;
  out.reserve(2 * steps.size());
  for (std::size_t s : steps) {
    if (s >= trajectory.positions.size())
      throw std::out_of_range("gravity_observables: step " + std::to_string(s) + " beyond trajectory of " +
                              std::to_string(trajectory.positions.size()) + " states");
    out.push_back(trajectory.positions[s].x);
    out.push_back(trajectory.positions[s].y);
  }
  return out;
}

// ---------------------------------------------------------------------------

void SeairConfig::validate() const {
  const std::size_t p = mobility.rows();
  if (p == 0 || mobility.cols() != p) throw std::invalid_argument("seair: mobility must be square and non-empty");
  for (std::size_t i = 0; i < p; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (mobility(i, j) < 0.0) throw std::invalid_argument("seair: negative mobility entry");
      sum += mobility(i, j);
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("seair: mobility row " + std::to_string(i) + " does not sum to 1");
    for (std::size_t j = 0; j < p; ++j)
      if (j != i && !(mobility(i, i) > mobility(i, j)))
        throw std::invalid_argument("seair: mobility diagonal must dominate row " + std::to_string(i));
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("seair: beta must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("seair: dt must be > 0");
  if (steps < 1) throw std::invalid_argument("seair: steps must be >= 1");
}

SeairParams SeairParams::from_vector(std::span<const double> theta) {
  if (theta.size() != 5)
    throw std::invalid_argument("seair: expected 5 parameters {start_I, start_A, E_period, A_period, I_period}");
  return {theta[0], theta[1], theta[2], theta[3], theta[4]};
}

bool SeairParams::valid() const {
  return start_i >= 0.0 && start_a >= 0.0 && start_i + start_a <= 1.0 && e_period > 0.0 && a_period > 0.0 &&
         i_period > 0.0 && std::isfinite(e_period) && std::isfinite(a_period) && std::isfinite(i_period);
}

void SeairParams::validate() const {
  if (!valid())
    throw std::invalid_argument(
        "seair: parameters need start_I, start_A >= 0, start_I + start_A <= 1 and positive periods");
}

SeairTrajectory simulate_seair(const SeairParams& params, const SeairConfig& config) {
  params.validate();
  config.validate();
  const std::size_t p = config.patches();
  SeairTrajectory traj;
  traj.steps = config.steps;
  traj.patches = p;
  traj.values.assign((config.steps + 1) * p * kCompartments, 0.0);
  for (std::size_t patch = 0; patch < p; ++patch) traj.at(0, patch, kS) = 1.0;
  traj.at(0, 0, kS) = 1.0 - params.start_i - params.start_a;
  traj.at(0, 0, kA) = params.start_a;
  traj.at(0, 0, kI) = params.start_i;

  const double eta = 1.0 / params.e_period;
  const double alpha = 1.0 / params.a_period;
  const double mu = 1.0 / params.i_period;
  std::vector<double> local(p * kCompartments);

  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t patch = 0; patch < p; ++patch) {
      const double s = traj.at(step, patch, kS);
      const double e = traj.at(step, patch, kE);
      const double a = traj.at(step, patch, kA);
      const double i = traj.at(step, patch, kI);
      const double r = traj.at(step, patch, kR);
      const double infection = config.beta * s * (a + i);
      double* x = local.data() + patch * kCompartments;
      x[kS] = s - config.dt * infection;
      x[kE] = e + config.dt * (infection - eta * e);
      x[kA] = a + config.dt * (eta * e - alpha * a);
      x[kI] = i + config.dt * (alpha * a - mu * i);
      x[kR] = r + config.dt * (mu * i);

      bool clamped = false;
      for (std::size_t c = 0; c < kCompartments; ++c) {
        if (x[c] < 0.0 || x[c] > 1.0) {
          x[c] = std::clamp(x[c], 0.0, 1.0);
          clamped = true;
        }
      }
      if (clamped) {
        ++traj.clamp_events;
        const double total = std::accumulate(x, x + kCompartments, 0.0);
        for (std::size_t c = 0; c < kCompartments; ++c) x[c] /= total;
      }
    }
    // Mixing: each patch's composition becomes the mobility-weighted blend of the
    // patches its row points at. Row-stochastic rows keep every patch summing to 1.
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t c = 0; c < kCompartments; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < p; ++j) acc += config.mobility(i, j) * local[j * kCompartments + c];
        traj.at(step + 1, i, c) = acc;
      }
    }
  }
  return traj;
}

std::vector<double> seair_observables(const SeairTrajectory& trajectory, std::size_t patch,
                                      std::size_t compartment, std::span<const std::size_t> times) {
  if (patch >= trajectory.patches) throw std::out_of_range("seair_observables: patch out of range");
  if (compartment >= kCompartments) throw std::out_of_range("seair_observables: compartment out of range");
  std::vector<double> out;
  out.reserve(times.size());
  for (std::size_t t : times) {
    if (t > trajectory.steps)
      throw std::out_of_range("seair_observables: time " + std::to_string(t) + " beyond last step " +
                              std::to_string(trajectory.steps));
    out.push_back(trajectory.at(t, patch, compartment));
  }
  return out;
}

Matrix make_mobility_matrix(std::size_t patches, std::uint64_t seed, double diagonal_floor) {
  if (patches == 0) throw std::invalid_argument("make_mobility_matrix: need at least one patch");
  if (!(diagonal_floor > 0.5 && diagonal_floor < 1.0))
    throw std::invalid_argument("make_mobility_matrix: diagonal_floor must lie in (0.5, 1)");
  Matrix m(patches, patches);
  if (patches == 1) {
    m(0, 0) = 1.0;
    return m;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < patches; ++i) {
    const double diag = diagonal_floor + (1.0 - diagonal_floor) * unif(rng);
    std::vector<double> share(patches, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < patches; ++j) {
      if (j == i) continue;
      share[j] = unif(rng) + 1e-12;
      total += share[j];
    }
    double off = 0.0;
    for (std::size_t j = 0; j < patches; ++j) {
      if (j == i) continue;
      m(i, j) = (1.0 - diag) * share[j] / total;
      off += m(i, j);
    }
    m(i, i) = 1.0 - off;
  }
  return m;
}

std::vector<std::size_t> random_observation_times(std::size_t count, std::size_t last_time,
                                                  std::uint64_t seed) {
  if (count > last_time + 1)
    throw std::invalid_argument("random_observation_times: more times requested than available");
  std::vector<std::size_t> all(last_time + 1);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; std::shuffle/std::sample distributions are not pinned by the standard.
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t span = all.size() - k;
    const std::size_t pick = k + static_cast<std::size_t>(rng() % span);
    std::swap(all[k], all[pick]);
  }
  std::vector<std::size_t> out(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> synthesize_observations(std::span<const double> reference, const NoiseSpec& noise,
                                            std::uint64_t seed, double peak) {
  std::vector<double> out(reference.begin(), reference.end());
  std::mt19937_64 rng(seed);
  switch (noise.kind) {
    case NoiseSpec::Kind::None: break;
    case NoiseSpec::Kind::Gaussian: {
      std::normal_distribution<double> normal(0.0, noise.scale);
      for (double& v : out) v += normal(rng);
      break;
    }
    case NoiseSpec::Kind::UniformFractionOfPeak: {
      const double half_width = noise.scale * std::abs(peak);
      std::uniform_real_distribution<double> unif(-half_width, half_width);
      for (double& v : out) v += unif(rng);
      break;
    }
  }
  return out;
}

double compartment_peak(const SeairTrajectory& trajectory, std::size_t patch, std::size_t compartment) {
  double peak = 0.0;
  for (std::size_t t = 0; t <= trajectory.steps; ++t) peak = std::max(peak, trajectory.at(t, patch, compartment));
  return peak;
}

}  // namespace maxent
