#pragma once

// Convex-hull feasibility: find w >= 0 with sum(w) = 1 and F w = target, where the
// columns of F are candidate points. Dense phase-one simplex with Bland's rule; when the
// iteration cap is hit the problem goes to Lawson-Hanson nonnegative least squares.

#include "lowdeg/linalg.hpp"

namespace lowdeg::lp {

struct Options {
  int max_iterations = 200000;
  double pivot_tolerance = 1e-11;
  /// Phase-one optimum (in row-equilibrated units) at or below this counts as feasible.
  double feasibility_tolerance = 1e-9;
};

struct FeasibilityResult {
  bool feasible = false;
  /// One weight per column of F, nonnegative and summing to 1 when feasible.
  Vector weights;
  /// When infeasible: beta with beta.target > max_j beta.F_j, scaled to unit max-norm.
  Vector certificate;
  /// beta.target - max_j beta.F_j for the certificate, in certificate units.
  double certificate_margin = 0.0;
  /// max |F w - target| in original units.
  double residual = 0.0;
  int iterations = 0;
  bool used_fallback = false;
};

FeasibilityResult convex_feasibility(const Matrix& features, const Vector& target, const Options& options = {});

/// Lawson-Hanson active-set solution of min ||A x - b||_2 subject to x >= 0.
Vector nnls(const Matrix& a, const Vector& b, int max_iterations = 0, double tolerance = 1e-12);

}  // namespace lowdeg::lp
