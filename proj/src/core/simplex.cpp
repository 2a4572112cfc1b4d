#include "lowdeg/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lowdeg/error.hpp"

namespace lowdeg::lp {

namespace {

double max_abs_residual(const Matrix& f, const Vector& target, const Vector& w) {
  return (f * w - target).cwiseAbs().maxCoeff();
}

}  // namespace

Vector nnls(const Matrix& a, const Vector& b, int max_iterations, double tolerance) {
  const Eigen::Index n = a.cols();
  if (a.rows() != b.size()) throw InvalidArgument("nnls: dimension mismatch");
  if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);
  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * std::max(1.0, b.cwiseAbs().maxCoeff()));

  auto solve_passive = [&](Vector& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Matrix sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(idx[c]);
    const Vector sol = sub.colPivHouseholderQr().solve(b);
    z.setZero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) z(idx[c]) = sol(static_cast<Eigen::Index>(c));
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const Vector grad = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_value = tolerance * scale;
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && grad(j) > best_value) {
        best_value = grad(j);
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    Vector z;
    for (int inner = 0; inner < max_iterations; ++inner) {
      solve_passive(z);
      bool ok = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) ok = false;
      if (ok) break;
      double step = 1.0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) step = std::min(step, x(j) / (x(j) - z(j)));
      x += step * (z - x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tolerance) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
    }
    x = z.cwiseMax(0.0);
  }
  return x;
}

FeasibilityResult convex_feasibility(const Matrix& features, const Vector& target, const Options& options) {
  const Eigen::Index dim = features.rows();
  const Eigen::Index cols = features.cols();
  if (target.size() != dim) throw InvalidArgument("convex_feasibility: target has the wrong length");
  if (cols == 0) throw InvalidArgument("convex_feasibility: no candidate points");
  if (!features.allFinite() || !target.allFinite()) throw InvalidArgument("convex_feasibility: non-finite input");

  // Constraint system with the simplex row appended, rows equilibrated.
  const Eigen::Index rows = dim + 1;
  Matrix a(rows, cols);
  a.topRows(dim) = features;
  a.row(dim).setOnes();
  Vector b(rows);
  b.head(dim) = target;
  b(dim) = 1.0;
  Vector row_scale(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double s = std::max(a.row(i).cwiseAbs().maxCoeff(), std::abs(b(i)));
    s = s > 0.0 ? 1.0 / s : 1.0;
    if (b(i) < 0.0) s = -s;
    row_scale(i) = s;
  }
  const Matrix as = row_scale.asDiagonal() * a;
  const Vector bs = row_scale.asDiagonal() * b;

  // Tableau [A | I | b] with the phase-one reduced-cost row underneath.
  const Eigen::Index width = cols + rows + 1;
  Matrix t = Matrix::Zero(rows + 1, width);
  t.block(0, 0, rows, cols) = as;
  t.block(0, cols, rows, rows).setIdentity();
  t.block(0, width - 1, rows, 1) = bs;
  for (Eigen::Index j = 0; j < cols; ++j) t(rows, j) = -as.col(j).sum();
  t(rows, width - 1) = -bs.sum();
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i) basis[static_cast<std::size_t>(i)] = cols + i;

  FeasibilityResult result;
  bool capped = false;
  const double cost_tol = 1e-12;
  for (;;) {
    if (result.iterations >= options.max_iterations) {
      capped = true;
      break;
    }
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (t(rows, j) < -cost_tol) {
        enter = j;
        break;
      }
    if (enter < 0) break;

    Eigen::Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double piv = t(i, enter);
      if (piv <= options.pivot_tolerance) continue;
      const double ratio = t(i, width - 1) / piv;
      const bool tie = leave >= 0 && std::abs(ratio - best_ratio) <= 1e-14 * std::max(1.0, std::abs(best_ratio));
      if ((ratio < best_ratio && !tie) ||
          (tie && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best_ratio = ratio;
        leave = i;
      }
    }
    if (leave < 0) {
      // Unbounded direction cannot occur in phase one; treat the column as unusable.
      t(rows, enter) = 0.0;
      continue;
    }
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i <= rows; ++i) {
      if (i == leave) continue;
      const double f = t(i, enter);
      if (f != 0.0) t.row(i) -= f * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
    ++result.iterations;
  }

  if (capped) {
    result.used_fallback = true;
    result.weights = nnls(as, bs);
    const double total = result.weights.sum();
    if (total > 0.0) result.weights /= total;
    result.residual = max_abs_residual(features, target, result.weights);
    result.feasible = (as * result.weights - bs).cwiseAbs().maxCoeff() <= options.feasibility_tolerance;
    return result;
  }

  const double phase_one = -t(rows, width - 1);
  if (phase_one > options.feasibility_tolerance) {
    // Duals of the scaled system: y' = c_B B^{-1} read off the artificial columns.
    Vector y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) y(i) = (1.0 - t(rows, cols + i)) * row_scale(i);
    Vector beta = y.head(dim);
    const double norm = beta.cwiseAbs().maxCoeff();
    if (norm > 0.0) beta /= norm;
    result.certificate = beta;
    result.certificate_margin = beta.dot(target) - (beta.transpose() * features).maxCoeff();
    result.weights = Vector::Zero(cols);
    return result;
  }

  Vector w = Vector::Zero(cols);
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::Index j = basis[static_cast<std::size_t>(i)];
    if (j < cols) {
      w(j) = std::max(0.0, t(i, width - 1));
      support.push_back(j);
    }
  }
  // Refine on the basic columns against the unrounded data.
  if (!support.empty()) {
    Matrix sub(rows, static_cast<Eigen::Index>(support.size()));
    for (std::size_t c = 0; c < support.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = as.col(support[c]);
    const Vector sol = sub.colPivHouseholderQr().solve(bs);
    if (sol.allFinite() && sol.minCoeff() >= -1e-14) {
      Vector refined = Vector::Zero(cols);
      for (std::size_t c = 0; c < support.size(); ++c)
        refined(support[c]) = std::max(0.0, sol(static_cast<Eigen::Index>(c)));
      if (max_abs_residual(features, target, refined) <= max_abs_residual(features, target, w)) w = refined;
    }
  }
  result.weights = w;
  result.residual = max_abs_residual(features, target, w);
  result.feasible = true;
  return result;
}

}  // namespace lowdeg::lp
