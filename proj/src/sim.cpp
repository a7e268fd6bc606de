#include <bfekf/sim.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace bfekf::sim {

double pacejka_mu(double slip, const PacejkaParams& p) {
  const double bs = p.B * slip;
  return p.D * std::sin(p.C * std::atan(bs - p.E * (bs - std::atan(bs))));
}

namespace {

Trajectory cv_run(const Example1Sim& config, std::uint64_t seed, bool sinusoid) {
  if (config.steps <= 0) throw ConfigError("step count must be positive");
  if (config.process_variance < 0.0 || config.measurement_variance < 0.0) {
    throw ConfigError("noise variances must be non-negative");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double q = std::sqrt(config.process_variance);
  const double r = std::sqrt(config.measurement_variance);

  Trajectory t;
  t.sample_time = 1.0;
  t.seed = seed;
  t.label = sinusoid ? "scenario2" : "scenario1";
  t.state_names = {"position", "velocity"};
  t.observation_names = {"position_measured"};
  t.truth_names = {"acceleration"};
  t.states.resize(2, config.steps);
  t.observations.resize(1, config.steps);
  t.inputs.resize(0, config.steps);
  t.truth.resize(1, config.steps);
  t.parameters = {{"process_variance", config.process_variance},
                  {"measurement_variance", config.measurement_variance},
                  {"steps", static_cast<double>(config.steps)}};

  double p = 0.0;
  double v = sinusoid ? 0.0 : 1.0;
  for (Index k = 0; k < config.steps; ++k) {
    const double acc = sinusoid ? scenario2_acceleration(p) : 0.0;
    t.states(0, k) = p;
    t.states(1, k) = v;
    t.truth(0, k) = acc;
    t.observations(0, k) = p + r * normal(rng);
    const double a = acc + q * normal(rng);
    p += v + 0.5 * a;
    v += a;
  }
  return t;
}

}  // namespace

Trajectory simulate_scenario1(const Example1Sim& config, std::uint64_t seed) { return cv_run(config, seed, false); }

double scenario2_acceleration(double position) {
  return 0.5 * std::sin(std::numbers::pi * position / 25.0) + 0.01;
}

Trajectory simulate_scenario2(const Example1Sim& config, std::uint64_t seed) { return cv_run(config, seed, true); }

std::vector<Trajectory> simulate_tire_runs(const TireSim& config, Index count, std::uint64_t seed) {
  if (count < 0) throw ConfigError("acceleration count must be non-negative");
  const auto& prof = config.profile;
  if (!(config.sample_time > 0.0) || !(prof.rise_time > 0.0) || !(prof.decay_time > 0.0) ||
      prof.peak_max < prof.peak_min || prof.cruise_max < prof.cruise_min) {
    throw ConfigError("invalid tire simulation profile");
  }
  std::mt19937_64 master(seed);
  std::vector<Trajectory> runs;
  runs.reserve(static_cast<std::size_t>(count));
  const auto max_steps = static_cast<Index>(std::ceil(prof.max_duration / config.sample_time));
  for (Index n = 0; n < count; ++n) {
    const std::uint64_t run_seed = master();
    std::mt19937_64 rng(run_seed);
    std::uniform_real_distribution<double> unit;
    std::normal_distribution<double> normal;
    const double peak = prof.peak_min + (prof.peak_max - prof.peak_min) * unit(rng);
    const double cruise = prof.cruise_min + (prof.cruise_max - prof.cruise_min) * unit(rng);

    std::vector<double> v_hist, s_hist, a_hist, ym_a, ym_v, u_m;
    double v = 0.0;
    for (Index k = 0; k < max_steps && v < prof.target_speed; ++k) {
      const double time = static_cast<double>(k) * config.sample_time;
      const double slip = time < prof.rise_time
                              ? peak * time / prof.rise_time
                              : cruise + (peak - cruise) * std::exp(-(time - prof.rise_time) / prof.decay_time);
      // Wheel speed realising the commanded slip under the clamped definition.
      const double wheel = v + slip * std::max(v, config.slip_floor);
      const double acc = config.gain * pacejka_mu(slip, config.pacejka);
      v_hist.push_back(v);
      s_hist.push_back(slip);
      a_hist.push_back(acc);
      ym_a.push_back(acc + config.acceleration_noise_std * normal(rng));
      ym_v.push_back(v + config.speed_noise_std * normal(rng));
      u_m.push_back(wheel + config.wheel_speed_noise_std * normal(rng));
      v += config.sample_time * acc;
    }
    const auto N = static_cast<Index>(v_hist.size());
    Trajectory t;
    t.sample_time = config.sample_time;
    t.seed = run_seed;
    t.label = "acceleration_" + std::to_string(n);
    t.state_names = {"speed"};
    t.observation_names = {"acceleration_measured", "speed_measured"};
    t.input_names = {"wheel_speed_measured"};
    t.truth_names = {"slip", "friction_acceleration"};
    t.states.resize(1, N);
    t.observations.resize(2, N);
    t.inputs.resize(1, N);
    t.truth.resize(2, N);
    for (Index k = 0; k < N; ++k) {
      const auto i = static_cast<std::size_t>(k);
      t.states(0, k) = v_hist[i];
      t.observations(0, k) = ym_a[i];
      t.observations(1, k) = ym_v[i];
      t.inputs(0, k) = u_m[i];
      t.truth(0, k) = s_hist[i];
      t.truth(1, k) = a_hist[i];
    }
    t.parameters = {{"peak_slip", peak},        {"cruise_slip", cruise},      {"gain", config.gain},
                    {"final_speed", v},          {"sample_time", config.sample_time},
                    {"pacejka_B", config.pacejka.B}, {"pacejka_C", config.pacejka.C},
                    {"pacejka_D", config.pacejka.D}, {"pacejka_E", config.pacejka.E}};
    runs.push_back(std::move(t));
  }
  return runs;
}

Eigen::Vector4d intersection_extent(const IntersectionGeometry& g) {
  const double reach = g.radius + g.exit;
  return {-reach, reach, 0.0, g.approach + g.radius};
}

namespace {

struct PathPoint {
  Eigen::Vector2d position;
  Eigen::Vector2d heading;  // unit tangent
  Eigen::Vector2d acceleration_per_speed2;  // centripetal acceleration / v^2
};

// Arc-length parameterised left (+1) or right (-1) turning path.
PathPoint path_point(const IntersectionGeometry& g, int side, double s) {
  const double arc = 0.5 * std::numbers::pi * g.radius;
  PathPoint pt;
  if (s <= g.approach) {
    pt.position = {0.0, s};
    pt.heading = {0.0, 1.0};
    pt.acceleration_per_speed2.setZero();
  } else if (s <= g.approach + arc) {
    const double phi = (s - g.approach) / g.radius;
    const double sx = side > 0 ? -1.0 : 1.0;  // left turns towards -x
    const Eigen::Vector2d center(sx * g.radius, g.approach);
    pt.position = center + g.radius * Eigen::Vector2d(-sx * std::cos(phi), std::sin(phi));
    pt.heading = {sx * std::sin(phi), std::cos(phi)};
    pt.acceleration_per_speed2 = (center - pt.position) / (g.radius * g.radius);
  } else {
    const double sx = side > 0 ? -1.0 : 1.0;
    const double d = s - g.approach - arc;
    pt.position = {sx * (g.radius + d), g.approach + g.radius};
    pt.heading = {sx, 0.0};
    pt.acceleration_per_speed2.setZero();
  }
  return pt;
}

}  // namespace

std::vector<Trajectory> simulate_intersection(const IntersectionSim& config, Index vehicles, std::uint64_t seed) {
  const auto& g = config.geometry;
  if (vehicles < 0) throw ConfigError("vehicle count must be non-negative");
  if (!(g.approach > 0.0) || !(g.radius > 0.0) || !(g.exit >= 0.0) || !(config.speed > 0.0) ||
      !(config.sample_time > 0.0) || !(config.measurement_variance >= 0.0)) {
    throw ConfigError("invalid intersection configuration");
  }
  std::mt19937_64 master(seed);
  const double length = g.approach + 0.5 * std::numbers::pi * g.radius + g.exit;
  const double r = std::sqrt(config.measurement_variance);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(vehicles));
  for (Index n = 0; n < vehicles; ++n) {
    const std::uint64_t vehicle_seed = master();
    std::mt19937_64 rng(vehicle_seed);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin(0.5);
    const int side = coin(rng) ? 1 : -1;
    const double speed = std::max(0.1, config.speed * (1.0 + config.speed_deviation * normal(rng)));
    const auto N = static_cast<Index>(std::floor(length / (speed * config.sample_time))) + 1;

    Trajectory t;
    t.sample_time = config.sample_time;
    t.seed = vehicle_seed;
    t.label = side > 0 ? "left" : "right";
    t.state_names = {"px", "py", "vx", "vy"};
    t.observation_names = {"px_measured", "py_measured"};
    t.truth_names = {"ax", "ay"};
    t.states.resize(4, N);
    t.observations.resize(2, N);
    t.inputs.resize(0, N);
    t.truth.resize(2, N);
    for (Index k = 0; k < N; ++k) {
      const auto pt = path_point(g, side, speed * config.sample_time * static_cast<double>(k));
      t.states.col(k) << pt.position, speed * pt.heading;
      t.truth.col(k) = speed * speed * pt.acceleration_per_speed2;
      t.observations(0, k) = pt.position(0) + r * normal(rng);
      t.observations(1, k) = pt.position(1) + r * normal(rng);
    }
    t.parameters = {{"speed", speed},
                    {"side", static_cast<double>(side)},
                    {"radius", g.radius},
                    {"approach", g.approach},
                    {"exit", g.exit},
                    {"measurement_variance", config.measurement_variance}};
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace bfekf::sim
