#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace tiltwise {

//! Closed treatment interval [lo, hi].
struct Interval
{
  double lo;
  double hi;

  double length() const noexcept { return hi - lo; }
  bool contains(double a) const noexcept { return a >= lo && a <= hi; }
};

//! Ordered design points with composite-trapezoid weights over a union of
//! disjoint closed intervals. Gaps between intervals carry no points and no
//! mass, so zero-density holes are structural rather than numerical.
class SupportGrid
{
public:
  static constexpr double kDefaultPointsPerUnit = 200.0;
  static constexpr std::size_t kMinPointsPerInterval = 50;

  //! Equally spaced points inside each interval: max(min_points,
  //! ceil(points_per_unit * length) + 1) points per interval.
  static SupportGrid uniform(std::vector<Interval> intervals,
                             double points_per_unit = kDefaultPointsPerUnit,
                             std::size_t min_points = kMinPointsPerInterval);

  //! Same as uniform() over [0, 1].
  static SupportGrid unit(double points_per_unit = kDefaultPointsPerUnit);

  //! Exactly `count` equally spaced points per interval.
  static SupportGrid with_count(std::vector<Interval> intervals, std::size_t count);

  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const Interval> intervals() const noexcept { return intervals_; }
  std::size_t size() const noexcept { return points_.size(); }

  //! Interval index owning point d.
  std::size_t interval_of(std::size_t d) const { return owner_.at(d); }

  double lo() const noexcept { return points_.front(); }
  double hi() const noexcept { return points_.back(); }
  double total_length() const noexcept;

  //! Locate a within the grid. Returns false when a sits in a hole between
  //! intervals; otherwise sets the bracketing indices and interpolation weight
  //! t so that value(a) = (1 - t) v[left] + t v[left + 1].
  bool locate(double a, std::size_t& left, double& t) const;

  //! Same support, every coordinate mapped through a -> (a - origin) / scale.
  SupportGrid rescaled(double origin, double scale) const;

private:
  SupportGrid(std::vector<Interval> intervals, std::vector<std::size_t> counts);

  std::vector<Interval> intervals_;
  std::vector<double> points_;
  std::vector<double> weights_;
  std::vector<std::size_t> owner_;
};

using SharedGrid = std::shared_ptr<const SupportGrid>;

inline SharedGrid share(SupportGrid grid)
{
  return std::make_shared<const SupportGrid>(std::move(grid));
}

} // namespace tiltwise
