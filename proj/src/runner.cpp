#include <bfekf/harness.hpp>

#include "report_util.hpp"

namespace bfekf::harness {

Report run(const RunOptions& options) {
  Report report;
  switch (options.experiment) {
    case ExperimentId::example1:
      report = run_example1(options);
      break;
    case ExperimentId::tire:
      report = run_tire(options);
      break;
    case ExperimentId::intersection:
      report = run_intersection(options);
      break;
    case ExperimentId::bench_eval:
      report = run_bench_eval(options);
      break;
    case ExperimentId::bench_predict:
      report = run_bench_predict(options);
      break;
  }
  if (!report.directory.empty()) detail::write_json(report.directory / "metrics.json", report.metrics);
  return report;
}

}  // namespace bfekf::harness
