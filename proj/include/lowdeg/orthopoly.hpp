#pragma once

// Orthonormal polynomial families.
//
// Bases are built from a moment oracle by Cholesky factorisation of the Hankel moment
// matrix H[i][j] = E[x^(i+j)]. The factorisation runs on the diagonally equilibrated
// matrix S H S with S = diag(H_ii^(-1/2)), which keeps the heavy-tailed product-normal
// law usable up to degree 20 and beyond in double precision. Fixed limits:
//   - degree cap 60 (factorials overflow double precision past this point);
//   - a pivot of the equilibrated matrix at or below 1e-12 is reported as a failure of
//     positive definiteness at that index.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lowdeg/distributions.hpp"
#include "lowdeg/linalg.hpp"

namespace lowdeg::ortho {

inline constexpr int kMaxDegree = 60;
inline constexpr double kPivotTolerance = 1e-12;

/// Dense monomial coefficients, index = exponent.
struct Polynomial {
  std::vector<double> coeffs;

  int degree() const noexcept;
  double operator()(double x) const noexcept;
  Polynomial operator*(const Polynomial& other) const;
};

/// h_m = He_m / sqrt(m!) by the normalized three-term recurrence
/// h_{j+1} = (x h_j - sqrt(j) h_{j-1}) / sqrt(j+1).
Polynomial hermite_normalized(int m);

/// a_{i,i/2}^2 = i! / (2^i ((i/2)!)^2) for even i; equals h_i(0)^2.
double diagonal_coeff_sq(int i);

/// ell -> E[x^ell] together with a name for provenance in exported files.
struct MomentOracle {
  std::string name;
  std::function<double(int)> moment;
};

MomentOracle standard_normal_oracle();
/// Law of lambda * g for independent lambda ~ law and g ~ N(0,1).
MomentOracle radial_oracle(const dist::ScaleLaw& law);
/// Product-normal law (lambda, g both standard normal): E[x^(2l)] = c_(2l)^2.
inline MomentOracle product_normal_oracle() { return radial_oracle(dist::ScaleLaw::standard_normal()); }
MomentOracle discrete_oracle(const DiscreteMeasure& measure);

/// Orthonormal p_0..p_k. Row j of `transform` holds p_j in monomial coefficients;
/// the matrix is lower triangular with a strictly positive diagonal and p_0 == 1.
struct OrthonormalBasis {
  int max_degree = 0;
  Matrix transform;
  std::string moment_source;
  /// max |G - I| of the Gram matrix of the rows, evaluated in the equilibrated frame.
  double gram_error = 0.0;

  Polynomial polynomial(int j) const;
  double evaluate(int j, double x) const;
};

/// Throws NumericError carrying the failing pivot index when H is not positive definite.
OrthonormalBasis build_basis(const MomentOracle& oracle, int k);

/// K_k(mu, x0) = sum_{j<=k} p_j(x0)^2.
double christoffel_sum(const OrthonormalBasis& basis, double x0);

/// CSV of the triangular transform: header `row,c0,...,ck`.
void write_basis_csv(std::ostream& os, const OrthonormalBasis& basis);

}  // namespace lowdeg::ortho
