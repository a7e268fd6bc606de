#pragma once

#include <bfekf/types.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bfekf::sim {

struct PacejkaParams {
  double B = 11.7;   // stiffness
  double C = 1.69;   // shape
  double D = 1.2;    // peak
  double E = 0.377;  // curvature
};

// D sin(C atan(B s - E (B s - atan(B s)))).
double pacejka_mu(double slip, const PacejkaParams& params = {});

// One simulated record. Column k of each matrix is step k.
struct Trajectory {
  double sample_time = 1.0;
  std::uint64_t seed = 0;
  std::string label;
  std::vector<std::string> state_names;
  std::vector<std::string> observation_names;
  std::vector<std::string> input_names;
  std::vector<std::string> truth_names;
  Mat states;        // true state x_k
  Mat observations;  // y_k = h(x_k) + e_k
  Mat inputs;        // known inputs u_k (may have zero rows)
  Mat truth;         // true unknown-function values and related signals
  std::map<std::string, double> parameters;

  Index steps() const noexcept { return states.cols(); }
};

// CSV with a header row: time, states, observations, inputs, truth.
void write_csv(const std::filesystem::path& path, const Trajectory& trajectory);
// JSON sidecar with label, seed, sample time and parameters.
void write_sidecar(const std::filesystem::path& path, const Trajectory& trajectory);

struct Example1Sim {
  Index steps = 100;
  double process_variance = 0.01;
  double measurement_variance = 0.01;
};

// x+ = [[1,1],[0,1]] x + [1/2; 1] w from x0 = [0; 1], y = position + e.
Trajectory simulate_scenario1(const Example1Sim& config, std::uint64_t seed);

// 0.5 sin(pi p / 25) + 0.01.
double scenario2_acceleration(double position);

// As scenario 1 from x0 = [0; 0] with scenario2_acceleration added to w.
Trajectory simulate_scenario2(const Example1Sim& config, std::uint64_t seed);

// Commanded slip of one acceleration: a ramp to a peak over rise_time, then
// an exponential decay towards a cruise slip. Peak and cruise values are
// drawn uniformly per acceleration.
struct TireProfile {
  double rise_time = 0.6;
  double peak_min = 0.12;
  double peak_max = 0.35;
  double cruise_min = 0.02;
  double cruise_max = 0.06;
  double decay_time = 1.0;
  double target_speed = 20.0;
  double max_duration = 60.0;
};

struct TireSim {
  PacejkaParams pacejka;
  double gain = 9.81 * 1.4 / 3.0;  // g0 l_f / (l_r + l_f)
  double sample_time = 0.04;
  double slip_floor = 0.5;
  double acceleration_noise_std = 0.1;
  double speed_noise_std = 0.01;
  double wheel_speed_noise_std = 0.01;
  TireProfile profile;
};

// Forward-Euler accelerations from standstill. States: speed. Observations:
// measured acceleration and speed. Inputs: measured wheel circumferential
// speed. Truth: slip and friction acceleration G mu(slip).
std::vector<Trajectory> simulate_tire_runs(const TireSim& config, Index count, std::uint64_t seed);

// Three-way intersection: vehicles enter at the origin heading +y, drive a
// straight approach, turn left or right on a circular arc and leave on a
// straight exit.
struct IntersectionGeometry {
  double approach = 20.0;
  double radius = 10.0;
  double exit = 20.0;
};

struct IntersectionSim {
  IntersectionGeometry geometry;
  double speed = 10.0;
  double speed_deviation = 0.05;  // relative standard deviation
  double sample_time = 0.2;
  double measurement_variance = 0.2;
};

// States: [px, py, vx, vy]. Observations: noisy position. Truth: [ax, ay].
std::vector<Trajectory> simulate_intersection(const IntersectionSim& config, Index vehicles, std::uint64_t seed);

// Bounding box [xmin, xmax] x [ymin, ymax] of both paths.
Eigen::Vector4d intersection_extent(const IntersectionGeometry& geometry);

}  // namespace bfekf::sim
