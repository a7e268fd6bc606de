#include <bfekf/basis.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bfekf::basis {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Relative slack on the per-dimension box test. A center whose coordinate
// difference exceeds alpha by more than this cannot have a scaled radius
// below 1 after rounding, so the box stays a superset of the exact set.
constexpr double kBoxSlack = 8 * kEps;

void check_point(const Vec& x, const CartesianGrid& grid) {
  if (x.size() != grid.dims()) {
    throw ShapeError("point has dimension " + std::to_string(x.size()) + ", grid has " +
                     std::to_string(grid.dims()));
  }
}

// Per-dimension inclusive index range [lo, hi] of the selection box.
struct AxisRange {
  Index lo = 0;
  Index hi = -1;
  bool empty() const noexcept { return hi < lo; }
};

AxisRange box_range(const std::vector<double>& axis, double spacing, bool arithmetic, double x,
                    double half_width) {
  const double reach = half_width * (1.0 + kBoxSlack);
  const auto m = static_cast<Index>(axis.size());
  AxisRange range;
  if (arithmetic) {
    const double origin = axis.front();
    const double lo_q = std::floor((x - reach - origin) / spacing) - 1.0;
    const double hi_q = std::ceil((x + reach - origin) / spacing) + 1.0;
    if (!(hi_q >= 0.0) || !(lo_q <= static_cast<double>(m - 1))) return range;
    range.lo = lo_q < 0.0 ? 0 : static_cast<Index>(lo_q);
    range.hi = hi_q > static_cast<double>(m - 1) ? m - 1 : static_cast<Index>(hi_q);
    while (range.lo <= range.hi && x - axis[static_cast<std::size_t>(range.lo)] > reach) ++range.lo;
    while (range.hi >= range.lo && axis[static_cast<std::size_t>(range.hi)] - x > reach) --range.hi;
  } else {
    const auto first = std::lower_bound(axis.begin(), axis.end(), x - reach);
    const auto last = std::upper_bound(axis.begin(), axis.end(), x + reach);
    range.lo = static_cast<Index>(first - axis.begin());
    range.hi = static_cast<Index>(last - axis.begin()) - 1;
  }
  return range;
}

// Visits every center in the box of per-dimension ranges in increasing
// global index order, passing the squared Euclidean distance to x. The sum is
// accumulated dimension by dimension from zero, the same order used by every
// other evaluation path, so values agree bitwise across selection methods.
template <class Visitor>
void for_each_in_box(const CartesianGrid& grid, const Vec& x, std::span<const AxisRange> ranges,
                     Visitor&& visit) {
  const auto dims = static_cast<std::size_t>(grid.dims());
  for (const auto& r : ranges) {
    if (r.empty()) return;
  }
  std::vector<std::vector<double>> sq(dims);
  for (std::size_t p = 0; p < dims; ++p) {
    const auto& axis = grid.axis(static_cast<Index>(p));
    auto& s = sq[p];
    s.reserve(static_cast<std::size_t>(ranges[p].hi - ranges[p].lo + 1));
    for (Index i = ranges[p].lo; i <= ranges[p].hi; ++i) {
      const double d = x(static_cast<Index>(p)) - axis[static_cast<std::size_t>(i)];
      s.push_back(d * d);
    }
  }
  std::vector<Index> pos(dims, 0);
  std::vector<double> prefix(dims + 1, 0.0);
  std::vector<Index> base(dims + 1, 0);
  // Initialise prefix sums for the first corner.
  for (std::size_t p = 0; p < dims; ++p) {
    prefix[p + 1] = prefix[p] + sq[p][0];
    base[p + 1] = base[p] + ranges[p].lo * grid.stride(static_cast<Index>(p));
  }
  const std::size_t last = dims - 1;
  const Index last_stride = grid.stride(static_cast<Index>(last));
  const auto last_count = static_cast<Index>(sq[last].size());
  while (true) {
    const double head = prefix[last];
    const Index head_index = base[last] + ranges[last].lo * last_stride;
    for (Index k = 0; k < last_count; ++k) {
      visit(head_index + k * last_stride, head + sq[last][static_cast<std::size_t>(k)]);
    }
    // Odometer over the leading dimensions.
    std::size_t p = last;
    while (p-- > 0) {
      if (++pos[p] < static_cast<Index>(sq[p].size())) break;
      pos[p] = 0;
    }
    if (p == static_cast<std::size_t>(-1)) return;
    for (std::size_t q = p; q < last; ++q) {
      prefix[q + 1] = prefix[q] + sq[q][static_cast<std::size_t>(pos[q])];
      base[q + 1] = base[q] + (ranges[q].lo + pos[q]) * grid.stride(static_cast<Index>(q));
    }
  }
}

std::vector<AxisRange> full_ranges(const CartesianGrid& grid) {
  std::vector<AxisRange> ranges(static_cast<std::size_t>(grid.dims()));
  for (Index p = 0; p < grid.dims(); ++p) ranges[static_cast<std::size_t>(p)] = {0, grid.count(p) - 1};
  return ranges;
}

// Smallest squared distance with sqrt(v) / alpha >= 1. Both operations are
// correctly rounded and monotone, so v < threshold is the same test bit for
// bit, without a square root per center.
double support_threshold(double alpha) {
  const auto inside = [alpha](double v) { return std::sqrt(v) / alpha < 1.0; };
  double t = alpha * alpha;
  while (inside(t)) t = std::nextafter(t, std::numeric_limits<double>::infinity());
  while (t > 0.0 && !inside(std::nextafter(t, 0.0))) t = std::nextafter(t, 0.0);
  return t;
}

double squared_distance_to(const Vec& x, const CartesianGrid& grid, Index index) {
  double s = 0.0;
  for (Index p = 0; p < grid.dims(); ++p) {
    const Index i = (index / grid.stride(p)) % grid.count(p);
    const double d = x(p) - grid.axis(p)[static_cast<std::size_t>(i)];
    s = s + d * d;
  }
  return s;
}

double value_from_squared(double sq, const BasisConfig& config) {
  if (const auto* w = std::get_if<Wendland>(&config.family)) {
    return wendland_value(std::sqrt(sq) / w->support);
  }
  const double l = std::get<Gaussian>(config.family).length_scale;
  return std::exp(-sq / (2.0 * l * l));
}

}  // namespace

double wendland_value(double r) {
  if (!(r >= 0.0)) throw DomainError("Wendland radius must be non-negative");
  if (r >= 1.0) return 0.0;
  const double t = 1.0 - r;
  const double t2 = t * t;
  const double t6 = t2 * t2 * t2;
  return t6 * (35.0 * r * r + 18.0 * r + 3.0) / 3.0;
}

double wendland_derivative(double r) {
  if (!(r >= 0.0)) throw DomainError("Wendland radius must be non-negative");
  if (r >= 1.0) return 0.0;
  // -(56/3) r (5 r + 1) (1 - r)^5
  const double t = 1.0 - r;
  const double t2 = t * t;
  return -(56.0 / 3.0) * r * (5.0 * r + 1.0) * (t2 * t2 * t);
}

double gaussian_value(const Vec& x, const Vec& center, double length_scale) {
  if (x.size() != center.size()) throw ShapeError("gaussian_value: dimension mismatch");
  if (!(length_scale > 0.0)) throw DomainError("length scale must be positive");
  double s = 0.0;
  for (Index p = 0; p < x.size(); ++p) {
    const double d = x(p) - center(p);
    s = s + d * d;
  }
  return std::exp(-s / (2.0 * length_scale * length_scale));
}

BasisConfig BasisConfig::wendland(double support, double prior_weight_variance) {
  BasisConfig c{Wendland{support}, prior_weight_variance};
  c.validate();
  return c;
}

BasisConfig BasisConfig::gaussian(double length_scale, double prior_weight_variance) {
  BasisConfig c{Gaussian{length_scale}, prior_weight_variance};
  c.validate();
  return c;
}

double BasisConfig::support() const {
  if (const auto* w = std::get_if<Wendland>(&family)) return w->support;
  throw UnsupportedError("Gaussian basis has global support");
}

double BasisConfig::length_scale() const {
  if (const auto* g = std::get_if<Gaussian>(&family)) return g->length_scale;
  throw UnsupportedError("Wendland basis has no length scale");
}

void BasisConfig::validate() const {
  if (const auto* w = std::get_if<Wendland>(&family)) {
    if (!(w->support > 0.0) || !std::isfinite(w->support)) throw DomainError("support must be positive");
  } else if (!(std::get<Gaussian>(family).length_scale > 0.0)) {
    throw DomainError("length scale must be positive");
  }
  if (!(prior_weight_variance >= 0.0)) throw DomainError("prior weight variance must be non-negative");
}

ActiveSet active_exact(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                       OpCounters* counters) {
  check_point(x, grid);
  const double threshold = support_threshold(config.support());
  const auto ranges = full_ranges(grid);
  ActiveSet out;
  for_each_in_box(grid, x, ranges, [&](Index index, double sq) {
    if (sq < threshold) out.indices.push_back(index);
  });
  if (counters) counters->basis_evaluations += static_cast<std::uint64_t>(grid.size());
  return out;
}

ActiveSet active_exact(const Vec& x, const Mat& centers, const BasisConfig& config) {
  if (centers.rows() != x.size()) throw ShapeError("centers must have one row per dimension");
  const double alpha = config.support();
  ActiveSet out;
  for (Index i = 0; i < centers.cols(); ++i) {
    double s = 0.0;
    for (Index p = 0; p < x.size(); ++p) {
      const double d = x(p) - centers(p, i);
      s = s + d * d;
    }
    if (std::sqrt(s) / alpha < 1.0) out.indices.push_back(i);
  }
  return out;
}

ActiveSet active_fast(const Vec& x, const CartesianGrid& grid, const BasisConfig& config) {
  check_point(x, grid);
  const double alpha = config.support();
  std::vector<AxisRange> ranges(static_cast<std::size_t>(grid.dims()));
  Index total = 1;
  for (Index p = 0; p < grid.dims(); ++p) {
    const double spacing = grid.spacing(p);
    auto& r = ranges[static_cast<std::size_t>(p)];
    r = box_range(grid.axis(p), spacing, !std::isnan(spacing), x(p), alpha);
    if (r.empty()) return {};
    total *= r.hi - r.lo + 1;
  }
  ActiveSet out;
  out.indices.reserve(static_cast<std::size_t>(total));
  // Enumerate the Cartesian product of the ranges in row-major order.
  std::vector<Index> pos(ranges.size(), 0);
  const std::size_t last = ranges.size() - 1;
  while (true) {
    Index head = 0;
    for (std::size_t p = 0; p < last; ++p) {
      head += (ranges[p].lo + pos[p]) * grid.stride(static_cast<Index>(p));
    }
    for (Index i = ranges[last].lo; i <= ranges[last].hi; ++i) out.indices.push_back(head + i);
    std::size_t p = last;
    while (p-- > 0) {
      if (ranges[p].lo + ++pos[p] <= ranges[p].hi) break;
      pos[p] = 0;
    }
    if (p == static_cast<std::size_t>(-1)) break;
  }
  return out;
}

ActiveSet select_active(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                        Selection selection, OpCounters* counters) {
  if (!config.compact()) return all_indices(grid);
  return selection == Selection::fast ? active_fast(x, grid, config)
                                      : active_exact(x, grid, config, counters);
}

ActiveSet all_indices(const CartesianGrid& grid) {
  ActiveSet out;
  out.indices.resize(static_cast<std::size_t>(grid.size()));
  for (Index i = 0; i < grid.size(); ++i) out.indices[static_cast<std::size_t>(i)] = i;
  return out;
}

Vec eval_active(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                const ActiveSet& active, OpCounters* counters) {
  check_point(x, grid);
  Vec values(active.size());
  for (Index k = 0; k < active.size(); ++k) {
    values(k) = value_from_squared(squared_distance_to(x, grid, active.indices[static_cast<std::size_t>(k)]),
                                   config);
  }
  if (counters) counters->basis_evaluations += static_cast<std::uint64_t>(active.size());
  return values;
}

Mat gradient_active(const Vec& x, const CartesianGrid& grid, const BasisConfig& config,
                    const ActiveSet& active) {
  check_point(x, grid);
  const Index dims = grid.dims();
  Mat grad(dims, active.size());
  for (Index k = 0; k < active.size(); ++k) {
    const Vec c = grid.center(active.indices[static_cast<std::size_t>(k)]);
    const Vec diff = x - c;
    double sq = 0.0;
    for (Index p = 0; p < dims; ++p) sq = sq + diff(p) * diff(p);
    double factor = 0.0;
    if (const auto* w = std::get_if<Wendland>(&config.family)) {
      // d/dx w(|x-c|/a) = w'(r) (x-c) / (a^2 r); w'(r)/r = -(56/3)(5r+1)(1-r)^5
      // is finite at r = 0, so the gradient is zero at the center itself.
      const double r = std::sqrt(sq) / w->support;
      if (r < 1.0) {
        const double t = 1.0 - r;
        const double t2 = t * t;
        factor = -(56.0 / 3.0) * (5.0 * r + 1.0) * (t2 * t2 * t) / (w->support * w->support);
      }
    } else {
      const double l = std::get<Gaussian>(config.family).length_scale;
      factor = -std::exp(-sq / (2.0 * l * l)) / (l * l);
    }
    grad.col(k) = factor * diff;
  }
  return grad;
}

Vec eval_all(const Vec& x, const CartesianGrid& grid, const BasisConfig& config, OpCounters* counters) {
  check_point(x, grid);
  Vec values = Vec::Zero(grid.size());
  const auto ranges = full_ranges(grid);
  // Same arithmetic as eval_active so scattered active values match bitwise.
  for_each_in_box(grid, x, ranges, [&](Index index, double sq) { values(index) = value_from_squared(sq, config); });
  if (counters) counters->basis_evaluations += static_cast<std::uint64_t>(grid.size());
  return values;
}

Vec scatter(const ActiveSet& active, const Vec& values, Index total) {
  if (values.size() != active.size()) throw ShapeError("scatter: value count differs from active count");
  Vec out = Vec::Zero(total);
  for (Index k = 0; k < active.size(); ++k) out(active.indices[static_cast<std::size_t>(k)]) = values(k);
  return out;
}

ProductEvaluation product_eval_gaussian(const Vec& x, const CartesianGrid& grid, const BasisConfig& config) {
  check_point(x, grid);
  const double l = config.length_scale();
  ProductEvaluation out;
  Vec acc = Vec::Ones(1);
  for (Index p = 0; p < grid.dims(); ++p) {
    const auto& axis = grid.axis(p);
    Vec factor(static_cast<Index>(axis.size()));
    for (std::size_t i = 0; i < axis.size(); ++i) {
      const double d = x(p) - axis[i];
      factor(static_cast<Index>(i)) = std::exp(-d * d / (2.0 * l * l));
    }
    out.scalar_evaluations += axis.size();
    // acc (x) factor with the new dimension varying fastest.
    Vec next(acc.size() * factor.size());
    for (Index a = 0; a < acc.size(); ++a) next.segment(a * factor.size(), factor.size()) = acc(a) * factor;
    acc = std::move(next);
  }
  out.values = std::move(acc);
  return out;
}

double kernel_value(const Vec& x, const Vec& x_other, const CartesianGrid& grid, const BasisConfig& config) {
  const double var = config.prior_weight_variance;
  if (!config.compact()) {
    return var * eval_all(x, grid, config).dot(eval_all(x_other, grid, config));
  }
  const auto a = active_exact(x, grid, config);
  const auto b = active_exact(x_other, grid, config);
  const Vec va = eval_active(x, grid, config, a);
  const Vec vb = eval_active(x_other, grid, config, b);
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.indices.size() && j < b.indices.size()) {
    if (a.indices[i] < b.indices[j]) {
      ++i;
    } else if (b.indices[j] < a.indices[i]) {
      ++j;
    } else {
      sum += va(static_cast<Index>(i)) * vb(static_cast<Index>(j));
      ++i;
      ++j;
    }
  }
  return var * sum;
}

std::uint64_t active_upper_bound(double support, double spacing, int dims) {
  if (!(support > 0.0) || !(spacing > 0.0) || dims <= 0) {
    throw DomainError("active_upper_bound needs positive support, spacing and dimension");
  }
  const double per_dim = std::floor(2.0 * support / spacing) + 1.0;
  if (per_dim >= 18446744073709551615.0) throw std::overflow_error("active_upper_bound overflow");
  const auto base = static_cast<std::uint64_t>(per_dim);
  std::uint64_t total = 1;
  for (int p = 0; p < dims; ++p) {
    if (__builtin_mul_overflow(total, base, &total)) throw std::overflow_error("active_upper_bound overflow");
  }
  return total;
}

}  // namespace bfekf::basis
