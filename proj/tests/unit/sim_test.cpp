#include <bfekf/sim.hpp>
#include <bfekf/ssmodel.hpp>

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace bfekf;

TEST_CASE("pacejka curve") {
  CHECK(sim::pacejka_mu(0.0) == 0.0);
  // mpmath, 30 digits
  CHECK(sim::pacejka_mu(0.1) == doctest::Approx(1.1763960452510915).epsilon(1e-14));
  for (int i = 0; i < 100; ++i) {
    const double s = -1.0 + 2.0 * i / 99.0;
    CHECK(sim::pacejka_mu(-s) == -sim::pacejka_mu(s));
    CHECK(std::abs(sim::pacejka_mu(s)) <= 1.2);
  }
}

TEST_CASE("scenario 1 without noise is a straight line") {
  sim::Example1Sim cfg;
  cfg.process_variance = 0.0;
  cfg.measurement_variance = 0.0;
  const auto t = sim::simulate_scenario1(cfg, 1);
  REQUIRE(t.steps() == 100);
  for (Index k = 0; k < 100; ++k) {
    CHECK(t.states(0, k) == static_cast<double>(k));
    CHECK(t.observations(0, k) == static_cast<double>(k));
  }
}

TEST_CASE("scenario 1 noise calibration") {
  sim::Example1Sim cfg;
  double sum = 0.0, sq = 0.0;
  Index n = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto t = sim::simulate_scenario1(cfg, seed);
    for (Index k = 0; k < t.steps(); ++k) {
      const double e = t.observations(0, k) - t.states(0, k);
      sum += e;
      sq += e * e;
      ++n;
    }
  }
  const double var = sq / static_cast<double>(n) - std::pow(sum / static_cast<double>(n), 2);
  // Sample variance of n Gaussians has relative std sqrt(2/n).
  CHECK(std::abs(var - 0.01) <= 3.0 * 0.01 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("scenario 2 acceleration") {
  CHECK(sim::scenario2_acceleration(0.0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(sim::scenario2_acceleration(12.5) == doctest::Approx(0.51).epsilon(1e-15));
  sim::Example1Sim quiet;
  quiet.process_variance = 0.0;
  quiet.measurement_variance = 0.0;
  const auto t = sim::simulate_scenario2(quiet, 1);
  // Without noise the drift term keeps the vehicle moving forward through
  // every period of the sine; the bounds come from iterating the recursion.
  CHECK(t.states(0, 99) == doctest::Approx(308.77867461108315).epsilon(1e-12));
  CHECK(t.states.row(1).minCoeff() >= 0.0);
  CHECK(t.states.row(1).maxCoeff() <= 5.55);
  for (Index k = 0; k < t.steps(); ++k) {
    CHECK(t.truth(0, k) == sim::scenario2_acceleration(t.states(0, k)));
    CHECK(t.observations(0, k) == t.states(0, k));
  }
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto n = sim::simulate_scenario2({}, seed);
    for (Index k = 0; k < n.steps(); ++k) CHECK(n.truth(0, k) == sim::scenario2_acceleration(n.states(0, k)));
  }
}

TEST_CASE("tire accelerations") {
  sim::TireSim cfg;
  const auto runs = sim::simulate_tire_runs(cfg, 20, 3);
  REQUIRE(runs.size() == 20);
  for (const auto& r : runs) {
    CHECK(r.parameters.at("final_speed") >= 15.0);
    CHECK(r.parameters.at("final_speed") <= 25.0);
    for (Index k = 0; k < r.steps(); ++k) {
      CHECK(r.truth(1, k) == cfg.gain * sim::pacejka_mu(r.truth(0, k), cfg.pacejka));
      CHECK(wheel_slip(r.states(0, k), r.states(0, k) + r.truth(0, k) * std::max(r.states(0, k), 0.5), 0.5) ==
            doctest::Approx(r.truth(0, k)).epsilon(1e-9));
    }
  }
  CHECK(runs[0].truth(0, 0) == 0.0);
}

TEST_CASE("free rolling produces no slip") {
  sim::TireSim cfg;
  cfg.profile.peak_min = cfg.profile.peak_max = 0.0;
  cfg.profile.cruise_min = cfg.profile.cruise_max = 0.0;
  cfg.profile.max_duration = 4.0;
  const auto r = sim::simulate_tire_runs(cfg, 1, 1).front();
  CHECK(r.truth.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.truth.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.states.row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("intersection traffic") {
  sim::IntersectionSim cfg;
  const auto vs = sim::simulate_intersection(cfg, 1000, 5);
  REQUIRE(vs.size() == 1000);
  Index left = 0;
  for (const auto& v : vs) left += v.label == "left";
  const double frac = static_cast<double>(left) / 1000.0;
  CHECK(frac >= 0.46);
  CHECK(frac <= 0.54);

  const auto& v = vs.front();
  CHECK(v.sample_time == 0.2);
  // Straight approach along +y: no acceleration while y stays below it.
  for (Index k = 0; k < v.steps(); ++k) {
    if (v.states(1, k) < cfg.geometry.approach - 1.0 && v.states(0, k) == 0.0) CHECK(v.truth.col(k).norm() <= 1e-9);
  }
  double sq = 0.0;
  Index n = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& w = vs[i];
    sq += (w.observations - w.states.topRows(2)).squaredNorm();
    n += 2 * w.steps();
  }
  const double var = sq / static_cast<double>(n);
  CHECK(std::abs(var - 0.2) <= 3.0 * 0.2 * std::sqrt(2.0 / static_cast<double>(n)));

  const auto extent = sim::intersection_extent(cfg.geometry);
  for (const auto& w : vs) {
    CHECK(w.states.row(0).minCoeff() >= extent(0) - 1e-9);
    CHECK(w.states.row(0).maxCoeff() <= extent(1) + 1e-9);
  }
}

TEST_CASE("simulators are deterministic") {
  const auto a = sim::simulate_intersection({}, 5, 42);
  const auto b = sim::simulate_intersection({}, 5, 42);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].states == b[i].states);
    CHECK(a[i].observations == b[i].observations);
  }
  const auto t1 = sim::simulate_tire_runs({}, 3, 9);
  const auto t2 = sim::simulate_tire_runs({}, 3, 9);
  CHECK(t1[2].observations == t2[2].observations);
  CHECK(sim::simulate_scenario2({}, 7).observations == sim::simulate_scenario2({}, 7).observations);
  CHECK(sim::simulate_scenario2({}, 7).observations != sim::simulate_scenario2({}, 8).observations);
}

TEST_CASE("trajectory files") {
  const auto dir = std::filesystem::temp_directory_path() / "bfekf_sim_test";
  std::filesystem::create_directories(dir);
  const auto t = sim::simulate_scenario1({}, 3);
  sim::write_csv(dir / "t.csv", t);
  sim::write_sidecar(dir / "t.json", t);
  std::ifstream csv(dir / "t.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "time,position,velocity,position_measured,acceleration");
  Index rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == t.steps());
  std::ifstream js(dir / "t.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j["seed"].get<std::uint64_t>() == t.seed);
  CHECK(j["label"] == "scenario1");
  std::filesystem::remove_all(dir);
}
