#include <bfekf/harness.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace bfekf::harness {

namespace {

const std::map<std::string, ExperimentId>& experiment_table() {
  static const std::map<std::string, ExperimentId> table = {
      {"example1", ExperimentId::example1},
      {"tire", ExperimentId::tire},
      {"intersection", ExperimentId::intersection},
      {"bench-eval", ExperimentId::bench_eval},
      {"bench-predict", ExperimentId::bench_predict},
  };
  return table;
}

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix, Config& out) {
  for (const auto& [key, child] : tree) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (child.empty()) {
      out.set(full, child.data());
    } else {
      flatten(child, full, out);
    }
  }
}

Config from_stream(std::istream& in, const std::string& origin) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  Config cfg;
  flatten(tree, "", cfg);
  return cfg;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + raw + "' is not a number");
  }
  return out;
}

}  // namespace

std::string experiment_name(ExperimentId id) {
  for (const auto& [name, value] : experiment_table()) {
    if (value == id) return name;
  }
  return "unknown";
}

ExperimentId parse_experiment(const std::string& name) {
  const auto it = experiment_table().find(name);
  if (it == experiment_table().end()) {
    throw ConfigError("unknown experiment '" + name +
                      "' (expected example1, tire, intersection, bench-eval or bench-predict)");
  }
  return it->second;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return from_stream(in, path.string());
}

Config Config::parse(const std::string& text) {
  std::istringstream in(text);
  return from_stream(in, "<string>");
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = trim(value); }

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

double Config::number(const std::string& key, double fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::int64_t Config::integer(const std::string& key, std::int64_t fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string v = trim(it->second);
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + it->second + "' is not an integer");
  }
  return out;
}

bool Config::flag(const std::string& key, bool fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': '" + it->second + "' is not a boolean");
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) const {
  used_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(to_double(key, item));
  }
  return out;
}

void Config::reject_unused() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

}  // namespace bfekf::harness
