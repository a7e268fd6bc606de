#pragma once

#include <bfekf/types.hpp>

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace bfekf::basis {

/// Wendland polynomial (1-r)_+^6 (35 r^2 + 18 r + 3) / 3 of a radius already
/// scaled by the support. Exactly zero for r >= 1. Throws DomainError for r < 0.
double wendland_value(double r);

/// d/dr of wendland_value; zero for r >= 1.
double wendland_derivative(double r);

/// exp(-|x - c|^2 / (2 l^2)).
double gaussian_value(const Vec& x, const Vec& center, double length_scale);

struct Wendland {
  double support = 1.0;  // alpha
};

struct Gaussian {
  double length_scale = 1.0;
};

struct BasisConfig {
  std::variant<Wendland, Gaussian> family = Wendland{};
  double prior_weight_variance = 1.0;

  static BasisConfig wendland(double support, double prior_weight_variance = 1.0);
  static BasisConfig gaussian(double length_scale, double prior_weight_variance = 1.0);

  bool compact() const noexcept { return std::holds_alternative<Wendland>(family); }
  double support() const;       // UnsupportedError for Gaussian
  double length_scale() const;  // UnsupportedError for Wendland
  void validate() const;
};

/// Centers on a Cartesian product of per-dimension coordinate lists.
///
/// Global indices are row-major: index = sum_p i_p * prod_{q>p} m_q, so the
/// last dimension varies fastest. Every module addresses basis functions
/// through this mapping.
class CartesianGrid {
 public:
  CartesianGrid() = default;

  /// Equally spaced centers lower + k*spacing up to upper inclusive. The last
  /// cell is truncated when the extent is not a multiple of the spacing.
  static CartesianGrid regular(const Vec& lower, const Vec& upper, double spacing);

  /// Arbitrary strictly increasing coordinate list per dimension.
  static CartesianGrid from_axes(std::vector<std::vector<double>> axes);

  Index dims() const noexcept { return static_cast<Index>(axes_.size()); }
  Index count(Index dim) const { return static_cast<Index>(axes_.at(dim).size()); }
  Index size() const noexcept { return size_; }
  const std::vector<double>& axis(Index dim) const { return axes_.at(dim); }

  /// True when every axis is equally spaced (relative tolerance 1e-12).
  bool equally_spaced() const noexcept { return equally_spaced_; }
  /// Spacing of an equally spaced axis; NaN otherwise.
  double spacing(Index dim) const { return spacing_.at(dim); }
  Index stride(Index dim) const { return strides_.at(dim); }

  Vec center(Index index) const;
  Index ravel(std::span<const Index> multi) const;
  std::vector<Index> unravel(Index index) const;

 private:
  void finalize();

  std::vector<std::vector<double>> axes_;
  std::vector<double> spacing_;
  std::vector<Index> strides_;
  Index size_ = 0;
  bool equally_spaced_ = false;
};

inline CartesianGrid make_grid(const Vec& lower, const Vec& upper, double spacing) {
  return CartesianGrid::regular(lower, upper, spacing);
}

/// Strictly increasing global indices of basis functions retained at a point.
struct ActiveSet {
  std::vector<Index> indices;

  Index size() const noexcept { return static_cast<Index>(indices.size()); }
  bool empty() const noexcept { return indices.empty(); }
  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

enum class Selection {
  exact,  // distance test against every center
  fast,   // per-dimension box, arithmetic index ranges
};

/// Centers with |x - c| / alpha < 1. Visits every center.
ActiveSet active_exact(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                       OpCounters* counters = nullptr);

/// Exact selection over an arbitrary center set (one center per column).
ActiveSet active_exact(const Vec& x, const Mat& centers, const BasisConfig& config);

/// Centers with |x_p - c_p| <= alpha in every dimension. Superset of
/// active_exact; cost is O(P + n_active) on equally spaced grids.
ActiveSet active_fast(const Vec& x, const CartesianGrid& grid, const BasisConfig& config);

ActiveSet select_active(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                        Selection selection, OpCounters* counters = nullptr);

/// Every index of the grid (the global-support case).
ActiveSet all_indices(const CartesianGrid& grid);

/// Basis values at the active centers, in active order. The active set must
/// have been produced for this x; a stale set is not detected here.
Vec eval_active(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                const ActiveSet& active, OpCounters* counters = nullptr);

/// Gradients of the active basis functions with respect to x, one column per
/// active center (P x n_active). The Wendland gradient at its own center is 0.
Mat gradient_active(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                    const ActiveSet& active);

/// Every basis function evaluated at x (length grid.size()).
Vec eval_all(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
             OpCounters* counters = nullptr);

/// Zero vector of length `total` with `values` placed at the active indices.
Vec scatter(const ActiveSet& active, const Vec& values, Index total);

struct ProductEvaluation {
  Vec values;                            // length grid.size(), row-major
  std::uint64_t scalar_evaluations = 0;  // one-dimensional exponentials computed
};

/// Gaussian basis evaluated as the Kronecker product of per-dimension factors:
/// sum_p m_p exponentials instead of prod_p m_p.
ProductEvaluation product_eval_gaussian(const Vec& x, const CartesianGrid& grid,
                                        const BasisConfig& config);

/// Induced kernel sigma^2 sum_i beta_i(x) beta_i(x').
double kernel_value(const Vec& x, const Vec& x_other, const CartesianGrid& grid,
                    const BasisConfig& config);

/// (floor(2 alpha / spacing) + 1)^dims. Throws DomainError on non-positive
/// inputs and std::overflow_error if the count does not fit in 64 bits.
std::uint64_t active_upper_bound(double support, double spacing, int dims);

}  // namespace bfekf::basis
