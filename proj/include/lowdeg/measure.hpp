#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lowdeg/linalg.hpp"

namespace lowdeg {

/// Finitely supported probability measure on R^dim. Support points are the rows of
/// `points`; weights are nonnegative and sum to one.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  /// Validates the invariants: matching sizes, finite entries, nonnegative weights summing
  /// to one within 1e-10, distinct support points.
  DiscreteMeasure(Matrix points, std::vector<double> weights);

  static DiscreteMeasure point_mass(const Vector& at);
  static DiscreteMeasure point_mass_1d(double at) { return point_mass(Vector::Constant(1, at)); }
  /// 1/2 (delta_t + delta_{-t}) on the real line.
  static DiscreteMeasure symmetric_two_point(double t);

  Eigen::Index dim() const noexcept { return points_.cols(); }
  std::size_t size() const noexcept { return weights_.size(); }
  const Matrix& points() const noexcept { return points_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  auto point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)); }
  double weight(std::size_t i) const { return weights_[i]; }

  /// E[x_0^e0 x_1^e1 ...] for an exponent vector of length dim().
  double moment(const std::vector<int>& exponents) const;
  /// Index of the atom selected by a uniform draw u in [0,1).
  std::size_t draw(double u) const noexcept;
  /// Same measure with zero-weight atoms removed.
  DiscreteMeasure pruned() const;

 private:
  Matrix points_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// CSV with header `lambda,z,weight` for planar measures; `x1,...,weight` otherwise.
void write_measure_csv(std::ostream& os, const DiscreteMeasure& measure);
DiscreteMeasure read_measure_csv(std::istream& is);

}  // namespace lowdeg
