#include <bfekf/sim.hpp>

#include <json.hpp>

#include <fstream>
#include <iomanip>

namespace bfekf::sim {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  return out;
}

void write_rows(std::ostream& out, const Mat& m, Index k) {
  for (Index i = 0; i < m.rows(); ++i) out << ',' << m(i, k);
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Trajectory& t) {
  auto out = open_for_write(path);
  out << "time";
  for (const auto* names : {&t.state_names, &t.observation_names, &t.input_names, &t.truth_names}) {
    for (const auto& n : *names) out << ',' << n;
  }
  out << '\n';
  for (Index k = 0; k < t.steps(); ++k) {
    out << t.sample_time * static_cast<double>(k);
    write_rows(out, t.states, k);
    write_rows(out, t.observations, k);
    write_rows(out, t.inputs, k);
    write_rows(out, t.truth, k);
    out << '\n';
  }
}

void write_sidecar(const std::filesystem::path& path, const Trajectory& t) {
  nlohmann::json j;
  j["label"] = t.label;
  j["seed"] = t.seed;
  j["sample_time"] = t.sample_time;
  j["steps"] = t.steps();
  j["parameters"] = t.parameters;
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
}

}  // namespace bfekf::sim
