#pragma once

#include <bfekf/ssmodel.hpp>
#include <bfekf/types.hpp>

#include <cstdint>
#include <iosfwd>

namespace bfekf {

// Augmented mean (x, theta) with the partitioned covariance. The weight-state
// block is the transpose of Pxt and is never stored.
struct FilterState {
  Vec x;
  Vec theta;
  Mat Px;
  Mat Pxt;  // n_x x n_w
  Mat Ptt;  // n_w x n_w

  // theta = 0, Pxt = 0, Ptt = prior_weight_variance * I.
  static FilterState prior(const Vec& x0, const Mat& Px0, Index weight_count, double prior_weight_variance);

  Index state_dim() const noexcept { return x.size(); }
  Index weight_count() const noexcept { return theta.size(); }
  // Full (n_x + n_w) covariance; for tests and small problems.
  Mat joint_covariance() const;
  void check_shapes() const;
};

struct UpdateOptions {
  basis::Selection selection = basis::Selection::exact;
  // Multiplies both gain blocks. 1 gives the Kalman gain; the Joseph form
  // keeps the covariance PSD for any value.
  double gain_scale = 1.0;
  OpCounters* counters = nullptr;
};

// Summary of one update for instrumentation.
struct StepReport {
  Index active_centers = 0;
  bool learning = true;  // false if the weight rows of the gain were dropped
};

// Global-support recursion: every weight enters F_theta and the gain.
StepReport time_update_dense(FilterState& state, const AugmentedModel& model, const Vec& u,
                             const UpdateOptions& options = {});
StepReport measurement_update_dense(FilterState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                                    const UpdateOptions& options = {});

// Active-set recursion: F_theta and the weight rows of the gain are restricted
// to the weights of the basis functions active at the linearization point.
StepReport time_update_sparse(FilterState& state, const AugmentedModel& model, const Vec& u,
                              const UpdateOptions& options = {});
StepReport measurement_update_sparse(FilterState& state, const AugmentedModel& model, const Vec& y, const Vec& u,
                                     const UpdateOptions& options = {});

struct FunctionEstimate {
  Vec mean;        // J
  Mat covariance;  // J x J
};

// Phi(z) theta and Phi(z) Ptt Phi(z)^T over the basis functions active at z.
FunctionEstimate query_function(const FilterState& state, const Expansion& expansion, const Vec& z);

struct MemoryEstimate {
  std::uint64_t covariance_bits = 0;  // d (n J)^2, symmetry ignored
  std::uint64_t mean_bits = 0;        // d n J
  std::uint64_t total_bits() const noexcept { return covariance_bits + mean_bits; }
};

// Storage of the weight posterior. Throws DomainError on zero inputs and
// std::overflow_error if a count does not fit in 64 bits.
MemoryEstimate memory_estimate(std::uint64_t weights_per_output, std::uint64_t outputs, std::uint64_t bits_per_number);

// Binary snapshot layout, all little-endian:
//   char[8]  "BFEKFSN1"
//   u32      format version (1)
//   u64      n_x, n_w, J
//   f64      x[n_x], theta[n_w], Px, Pxt, Ptt (row-major)
void write_snapshot(std::ostream& out, const FilterState& state, std::uint64_t outputs);
FilterState read_snapshot(std::istream& in, std::uint64_t* outputs = nullptr);

}  // namespace bfekf
