#pragma once

// Low-degree advantage
//
//   LDA^(m)_{<=k}(P, Q) = max_f |E_{P^m} f - E_{Q^m} f| / sqrt(Var_{Q^m} f)
//
// over polynomials f of total degree <= k in the m samples. This module computes it
// exactly where that is possible (point-mass mixtures through Christoffel sums, small
// discrete instances by brute force) and evaluates the closed-form bounds.

#include <iosfwd>
#include <string>
#include <vector>

#include "lowdeg/distributions.hpp"
#include "lowdeg/measure.hpp"

namespace lowdeg::lda {

enum class AdvantageKind { exact, upper_bound, monte_carlo_lower };
const char* to_string(AdvantageKind kind) noexcept;

struct AdvantageReport {
  int k = 0;
  int m = 1;
  double value = 0.0;
  AdvantageKind kind = AdvantageKind::exact;
  /// Squared contributions mu_j^2 along an orthonormal basis; sums to value^2 for exact reports.
  std::vector<double> components;
};

/// One JSON object per line: {"k":..,"m":..,"kind":..,"value":..,"components":[..]}.
std::string to_jsonl(const AdvantageReport& report);

/// Exact single-sample advantage of (1-alpha) Q + alpha delta_0 against Q for the
/// one-dimensional law of lambda*g: alpha * sqrt(K_k(law, 0) - 1). Every non-constant
/// orthonormal p_j has E_P p_j = alpha p_j(0), and f = sum_j p_j(0) p_j attains the
/// Cauchy-Schwarz bound. For n > 1 this is the advantage of polynomials in one coordinate.
AdvantageReport lda_single_pointmass(const dist::ScaleLaw& scale_law, double alpha, int k);

/// sqrt((1+delta^2)^m - 1), evaluated through expm1/log1p.
double lift_bound(double delta, int m);

/// sqrt((1 + C^2 alpha^2 k)^m - 1). The constant C is the caller's choice.
double theorem_bound(double alpha, int k, int m, double C);

/// Exact max of |E q| / sqrt(Var q) over polynomials q(lambda, g) of total degree <= k
/// with zero constant term, (lambda, g) ~ N(0, I_2):
///   sqrt( sum over even (i1,i2) != (0,0), i1+i2 <= k of a_{i1}^2 a_{i2}^2 ),
/// with a_i^2 = diagonal_coeff_sq(i). Valid for k <= 30.
double mean_var_ratio_max(int k);

/// The Stirling-type bound sqrt(2k/pi + 2 sqrt(2k/pi)).
double mean_var_ratio_stirling_bound(int k);

struct BruteForceOptions {
  std::size_t max_monomials = 2000;
  /// Eigenvalues of the equilibrated Q-covariance below this fraction of the largest are
  /// treated as degenerate directions and dropped from the pseudo-inverse.
  double pivot_tolerance = 1e-10;
};

/// Exact LDA^(m)_{<=k}(P, Q) for discrete P, Q on R^n as sqrt(d^T G^+ d), where d is the
/// mean difference of all non-constant monomials of total degree <= k on (R^n)^m and G is
/// their covariance under Q^m. Throws InvalidArgument past the monomial guard and
/// NumericError when G is fully degenerate (Q a point mass).
AdvantageReport lda_bruteforce(const DiscreteMeasure& p, const DiscreteMeasure& q, int k, int m,
                               const BruteForceOptions& options = {});

/// Number of monomials of total degree <= k in `variables` variables, C(variables + k, k).
std::size_t monomial_count(std::size_t variables, int k);

}  // namespace lowdeg::lda
