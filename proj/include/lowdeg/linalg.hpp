#pragma once

#include <Eigen/Dense>

#include "lowdeg/rng.hpp"

namespace lowdeg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors in columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

/// Cyclic Jacobi sweeps until every off-diagonal entry is below `tol` times the Frobenius
/// norm. Intended for the small (d+1)x(d+1) Gram matrices of the detectors.
SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tol = 1e-15, int max_sweeps = 64);

/// Uniform direction on the unit sphere in R^dim.
Vector random_unit_vector(Stream& rng, Eigen::Index dim);

/// n x d matrix with orthonormal columns spanning a uniformly random d-subspace.
Matrix random_orthonormal_basis(Stream& rng, Eigen::Index n, Eigen::Index d);

/// Largest principal angle (radians) between the column spans of two orthonormal bases.
double largest_principal_angle(const Matrix& basis_a, const Matrix& basis_b);

/// Euclidean norm with a fixed summation order; the detectors use the same routine so
/// that budget-capped perturbations compare consistently against thresholds.
double norm2(const double* x, Eigen::Index n) noexcept;

}  // namespace lowdeg
