#include <bfekf/basis.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bfekf::basis {

CartesianGrid CartesianGrid::regular(const Vec& lower, const Vec& upper, double spacing) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw ShapeError("grid bounds must be non-empty and of equal dimension");
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw DomainError("grid spacing must be positive and finite");
  }
  CartesianGrid grid;
  grid.axes_.resize(static_cast<std::size_t>(lower.size()));
  for (Index p = 0; p < lower.size(); ++p) {
    if (!(lower(p) < upper(p))) {
      throw DomainError("grid lower bound must be below upper bound in dimension " +
                        std::to_string(p));
    }
    const double extent = upper(p) - lower(p);
    // Tolerance keeps exact multiples (e.g. 4 / 1) from losing their last center.
    const auto cells = static_cast<Index>(std::floor(extent / spacing + 1e-9));
    auto& axis = grid.axes_[static_cast<std::size_t>(p)];
    axis.reserve(static_cast<std::size_t>(cells + 1));
    for (Index k = 0; k <= cells; ++k) {
      axis.push_back(std::min(lower(p) + static_cast<double>(k) * spacing, upper(p)));
    }
  }
  grid.finalize();
  return grid;
}

CartesianGrid CartesianGrid::from_axes(std::vector<std::vector<double>> axes) {
  if (axes.empty()) throw ShapeError("grid needs at least one dimension");
  for (std::size_t p = 0; p < axes.size(); ++p) {
    if (axes[p].empty()) throw ShapeError("grid axis " + std::to_string(p) + " is empty");
    for (std::size_t k = 1; k < axes[p].size(); ++k) {
      if (!(axes[p][k] > axes[p][k - 1])) {
        throw DomainError("grid axis " + std::to_string(p) + " is not strictly increasing");
      }
    }
  }
  CartesianGrid grid;
  grid.axes_ = std::move(axes);
  grid.finalize();
  return grid;
}

void CartesianGrid::finalize() {
  const auto dims = axes_.size();
  spacing_.assign(dims, std::numeric_limits<double>::quiet_NaN());
  strides_.assign(dims, 1);
  equally_spaced_ = true;
  for (std::size_t p = 0; p < dims; ++p) {
    const auto& axis = axes_[p];
    if (axis.size() < 2) {
      // A single center is trivially regular; any spacing works for the
      // arithmetic range computation.
      spacing_[p] = 1.0;
      continue;
    }
    const double step = axis[1] - axis[0];
    bool regular = true;
    for (std::size_t k = 2; k < axis.size() && regular; ++k) {
      const double d = axis[k] - axis[k - 1];
      const double slack = 4 * std::numeric_limits<double>::epsilon() * std::max(std::abs(axis[k]), 1.0);
      regular = std::abs(d - step) <= 1e-12 * std::abs(step) + slack;
    }
    if (regular) {
      spacing_[p] = step;
    } else {
      equally_spaced_ = false;
    }
  }
  size_ = 1;
  for (std::size_t p = dims; p-- > 0;) {
    strides_[p] = size_;
    size_ *= static_cast<Index>(axes_[p].size());
  }
}

Vec CartesianGrid::center(Index index) const {
  if (index < 0 || index >= size_) throw DomainError("grid index out of range");
  Vec c(dims());
  for (Index p = 0; p < dims(); ++p) {
    const Index i = (index / strides_[static_cast<std::size_t>(p)]) % count(p);
    c(p) = axes_[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)];
  }
  return c;
}

Index CartesianGrid::ravel(std::span<const Index> multi) const {
  if (static_cast<Index>(multi.size()) != dims()) throw ShapeError("multi-index dimension mismatch");
  Index index = 0;
  for (Index p = 0; p < dims(); ++p) {
    const Index i = multi[static_cast<std::size_t>(p)];
    if (i < 0 || i >= count(p)) throw DomainError("multi-index out of range");
    index += i * strides_[static_cast<std::size_t>(p)];
  }
  return index;
}

std::vector<Index> CartesianGrid::unravel(Index index) const {
  if (index < 0 || index >= size_) throw DomainError("grid index out of range");
  std::vector<Index> multi(static_cast<std::size_t>(dims()));
  for (Index p = 0; p < dims(); ++p) {
    multi[static_cast<std::size_t>(p)] = (index / strides_[static_cast<std::size_t>(p)]) % count(p);
  }
  return multi;
}

}  // namespace bfekf::basis
