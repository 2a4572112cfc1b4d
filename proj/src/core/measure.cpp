#include "lowdeg/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lowdeg/error.hpp"

namespace lowdeg {

DiscreteMeasure::DiscreteMeasure(Matrix points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (static_cast<std::size_t>(points_.rows()) != weights_.size())
    throw InvalidArgument("DiscreteMeasure: point count and weight count differ");
  if (weights_.empty()) throw InvalidArgument("DiscreteMeasure: empty support");
  if (!points_.allFinite()) throw InvalidArgument("DiscreteMeasure: non-finite support point");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("DiscreteMeasure: negative or non-finite weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "DiscreteMeasure: weights sum to " << total << ", expected 1";
    throw InvalidArgument(msg.str());
  }
  // Distinctness: sort row indices lexicographically and compare neighbours.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(points_.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points_.cols(); ++c) {
      if (points_(a, c) < points_(b, c)) return true;
      if (points_(a, c) > points_(b, c)) return false;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t i = 1; i < order.size(); ++i)
    if (!less(order[i - 1], order[i])) throw InvalidArgument("DiscreteMeasure: repeated support point");

  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

DiscreteMeasure DiscreteMeasure::point_mass(const Vector& at) {
  Matrix p(1, at.size());
  p.row(0) = at.transpose();
  return DiscreteMeasure(std::move(p), {1.0});
}

DiscreteMeasure DiscreteMeasure::symmetric_two_point(double t) {
  if (t == 0.0) return point_mass_1d(0.0);
  Matrix p(2, 1);
  p << -std::abs(t), std::abs(t);
  return DiscreteMeasure(std::move(p), {0.5, 0.5});
}

double DiscreteMeasure::moment(const std::vector<int>& exponents) const {
  if (static_cast<Eigen::Index>(exponents.size()) != dim())
    throw InvalidArgument("DiscreteMeasure::moment: exponent length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    double term = weights_[i];
    for (Eigen::Index c = 0; c < dim(); ++c) {
      const int e = exponents[static_cast<std::size_t>(c)];
      if (e != 0) term *= std::pow(points_(static_cast<Eigen::Index>(i), c), e);
    }
    acc += term;
  }
  return acc;
}

std::size_t DiscreteMeasure::draw(double u) const noexcept {
  const double target = u * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  idx = std::min(idx, weights_.size() - 1);
  // Never land on a zero-weight atom because of ties in the cumulative sums.
  while (weights_[idx] == 0.0 && idx + 1 < weights_.size()) ++idx;
  while (weights_[idx] == 0.0 && idx > 0) --idx;
  return idx;
}

DiscreteMeasure DiscreteMeasure::pruned() const {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < weights_.size(); ++i)
    if (weights_[i] > 0.0) keep.push_back(static_cast<Eigen::Index>(i));
  Matrix p(static_cast<Eigen::Index>(keep.size()), dim());
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    p.row(static_cast<Eigen::Index>(r)) = points_.row(keep[r]);
    w.push_back(weights_[static_cast<std::size_t>(keep[r])]);
    total += w.back();
  }
  for (double& x : w) x /= total;
  return DiscreteMeasure(std::move(p), std::move(w));
}

void write_measure_csv(std::ostream& os, const DiscreteMeasure& measure) {
  if (measure.dim() == 2) {
    os << "lambda,z,weight\n";
  } else {
    for (Eigen::Index c = 0; c < measure.dim(); ++c) os << 'x' << (c + 1) << ',';
    os << "weight\n";
  }
  char buf[64];
  for (std::size_t i = 0; i < measure.size(); ++i) {
    for (Eigen::Index c = 0; c < measure.dim(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", measure.points()(static_cast<Eigen::Index>(i), c));
      os << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", measure.weight(i));
    os << buf << '\n';
  }
}

DiscreteMeasure read_measure_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("measure CSV: missing header");
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  if (columns < 2) throw IoError("measure CSV: header needs at least one coordinate and a weight");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<Eigen::Index>(values.size()) != columns) throw IoError("measure CSV: ragged row");
    rows.push_back(std::move(values));
  }
  Matrix p(static_cast<Eigen::Index>(rows.size()), columns - 1);
  std::vector<double> w;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index c = 0; c + 1 < columns; ++c)
      p(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    w.push_back(rows[r].back());
  }
  return DiscreteMeasure(std::move(p), std::move(w));
}

}  // namespace lowdeg
