#include "tiltwise/support_grid.hpp"

#include "tiltwise/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tiltwise {

namespace {

void validate_intervals(const std::vector<Interval>& intervals)
{
  if (intervals.empty())
    throw Error(ErrorCode::InvalidGrid, "support needs at least one interval");
  for (std::size_t k = 0; k < intervals.size(); ++k) {
    const auto& iv = intervals[k];
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.hi > iv.lo))
      throw Error(ErrorCode::InvalidGrid,
                  "interval " + std::to_string(k) + " must satisfy lo < hi");
    if (k > 0 && !(iv.lo > intervals[k - 1].hi))
      throw Error(ErrorCode::InvalidGrid, "intervals must be sorted and disjoint");
  }
}

} // namespace

SupportGrid::SupportGrid(std::vector<Interval> intervals, std::vector<std::size_t> counts)
  : intervals_(std::move(intervals))
{
  for (std::size_t k = 0; k < intervals_.size(); ++k) {
    const auto [lo, hi] = intervals_[k];
    const std::size_t m = counts[k];
    if (m < 2)
      throw Error(ErrorCode::InvalidGrid, "each interval needs at least two points");
    const double step = (hi - lo) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      // pin the last point to hi exactly
      const double a = j + 1 == m ? hi : lo + step * static_cast<double>(j);
      points_.push_back(a);
      weights_.push_back(j == 0 || j + 1 == m ? 0.5 * step : step);
      owner_.push_back(k);
    }
  }
}

SupportGrid SupportGrid::uniform(std::vector<Interval> intervals,
                                 double points_per_unit,
                                 std::size_t min_points)
{
  validate_intervals(intervals);
  if (!(points_per_unit > 0.0))
    throw Error(ErrorCode::InvalidGrid, "points_per_unit must be positive");
  std::vector<std::size_t> counts;
  counts.reserve(intervals.size());
  for (const auto& iv : intervals) {
    const auto by_density =
      static_cast<std::size_t>(std::ceil(points_per_unit * iv.length() - 1e-9)) + 1;
    counts.push_back(std::max(std::max<std::size_t>(min_points, 2), by_density));
  }
  return SupportGrid(std::move(intervals), std::move(counts));
}

SupportGrid SupportGrid::unit(double points_per_unit)
{
  return uniform({{0.0, 1.0}}, points_per_unit);
}

SupportGrid SupportGrid::with_count(std::vector<Interval> intervals, std::size_t count)
{
  validate_intervals(intervals);
  std::vector<std::size_t> counts(intervals.size(), count);
  return SupportGrid(std::move(intervals), std::move(counts));
}

double SupportGrid::total_length() const noexcept
{
  double total = 0.0;
  for (const auto& iv : intervals_)
    total += iv.length();
  return total;
}

bool SupportGrid::locate(double a, std::size_t& left, double& t) const
{
  if (!(a >= lo() && a <= hi()))
    return false;
  const auto it = std::upper_bound(points_.begin(), points_.end(), a);
  if (it == points_.end()) {
    left = points_.size() - 2;
    t = 1.0;
    return owner_[left] == owner_[left + 1];
  }
  const auto right = static_cast<std::size_t>(it - points_.begin());
  left = right - 1;
  if (owner_[left] != owner_[right]) {
    // a lies at or past the right end of one interval, before the next
    if (a == points_[left]) {
      if (left == 0) {
        t = 0.0;
        return true;
      }
      left -= 1;
      t = 1.0;
      return true;
    }
    return false;
  }
  t = (a - points_[left]) / (points_[right] - points_[left]);
  return true;
}

SupportGrid SupportGrid::rescaled(double origin, double scale) const
{
  if (!(scale > 0.0) || !std::isfinite(origin))
    throw Error(ErrorCode::InvalidGrid, "rescale needs a finite origin and positive scale");
  std::vector<Interval> mapped;
  std::vector<std::size_t> counts(intervals_.size(), 0);
  for (const auto& iv : intervals_)
    mapped.push_back({(iv.lo - origin) / scale, (iv.hi - origin) / scale});
  for (auto k : owner_)
    ++counts[k];
  return SupportGrid(std::move(mapped), std::move(counts));
}

} // namespace tiltwise
