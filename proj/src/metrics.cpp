#include <bfekf/harness.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace bfekf::harness {

unsigned worker_count() {
  if (const char* env = std::getenv("BFEKF_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(Index n, const std::function<void(Index)>& body) {
  if (n <= 0) return;
  const auto workers = static_cast<Index>(std::min<Index>(worker_count(), n));
  if (workers == 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first;
  std::mutex guard;
  auto work = [&] {
    for (Index i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (Index t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

double compute_rmse(const Mat& estimates, const Mat& truth) {
  if (estimates.rows() != truth.rows() || estimates.cols() != truth.cols()) {
    throw ShapeError("compute_rmse: shape mismatch");
  }
  if (estimates.size() == 0) throw DomainError("compute_rmse: empty input");
  return std::sqrt((estimates - truth).squaredNorm() / static_cast<double>(estimates.size()));
}

double compute_rmse(const std::vector<double>& estimates, const std::vector<double>& truth) {
  if (estimates.size() != truth.size()) throw ShapeError("compute_rmse: length mismatch");
  if (estimates.empty()) throw DomainError("compute_rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(estimates.size()));
}

Summary summarize(std::vector<double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  s.min = values.front();
  s.max = values.back();
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

nlohmann::json to_json(const Summary& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"median", s.median},
          {"min", s.min},   {"max", s.max},       {"count", s.count}};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(6) << v;
  return out.str();
}

void write_table(const std::filesystem::path& path, const Table& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw ShapeError("table row width differs from header");
    line(row);
  }
}

std::filesystem::path make_output_directory(const std::filesystem::path& root, const std::string& experiment) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  const auto base = root / experiment / stamp;
  auto dir = base;
  for (int suffix = 1; std::filesystem::exists(dir); ++suffix) {
    dir = base;
    dir += "-" + std::to_string(suffix);
  }
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bfekf::harness
