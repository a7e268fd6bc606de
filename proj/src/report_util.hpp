#pragma once

#include <bfekf/harness.hpp>

#include <fstream>
#include <random>
#include <sstream>

namespace bfekf::harness::detail {

// Per-run seeds derived from the master seed; run i always gets the same seed.
inline std::vector<std::uint64_t> run_seeds(std::uint64_t master, Index count) {
  std::mt19937_64 rng(master);
  std::vector<std::uint64_t> out(static_cast<std::size_t>(count));
  for (auto& s : out) s = rng();
  return out;
}

inline std::vector<Method> methods_or(const RunOptions& options, const std::string& key,
                                      const std::string& fallback) {
  const std::string configured = options.config.text(key, fallback);
  if (!options.methods.empty()) return options.methods;
  std::vector<Method> out;
  std::stringstream ss(configured);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(parse_method(item));
  }
  if (out.empty()) throw ConfigError(key + " lists no method");
  return out;
}

inline int run_count(const RunOptions& options, const std::string& key, int fallback) {
  // The key is read even when overridden so it never counts as unused.
  const auto configured = options.config.integer(key, fallback);
  const auto n = options.runs ? static_cast<std::int64_t>(*options.runs) : configured;
  if (n < 1) throw ConfigError("run count must be positive");
  return static_cast<int>(n);
}

inline std::filesystem::path open_report(const RunOptions& options) {
  if (!options.write_outputs) return {};
  return make_output_directory(options.out_root, experiment_name(options.experiment));
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace bfekf::harness::detail
