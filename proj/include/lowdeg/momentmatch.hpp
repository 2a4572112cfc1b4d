#pragma once

// Moment matching on the (lambda, z) plane.
//
// The planted branch with probability 1-alpha draws (lambda, z) ~ mu2 and fills the other
// coordinates with N(0, lambda^2). Matching every even mixed moment E[x_1^l1 x_n^l2] of Q
// up to degree k is then a finite system of linear constraints on mu2, solved here as an
// LP over a symmetric grid. Also: Tukey depth of a target under the feature law of nu
// ((lambda, g) ~ N(0, I_2), z = lambda g), random-polytope membership, and anti-concentration
// tails of p_beta = <beta, Phi>.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lowdeg/distributions.hpp"
#include "lowdeg/error.hpp"
#include "lowdeg/measure.hpp"
#include "lowdeg/simplex.hpp"

namespace lowdeg::mm {

/// Even pairs (l1, l2) with 0 < l1 + l2 <= k, in descending lexicographic order:
/// k = 2 gives (2,0), (0,2); k = 4 gives (4,0), (2,2), (2,0), (0,4), (0,2).
class MomentIndexSet {
 public:
  explicit MomentIndexSet(int k);
  int k() const noexcept { return k_; }
  Eigen::Index D() const noexcept { return static_cast<Eigen::Index>(indices_.size()); }
  const std::vector<std::pair<int, int>>& indices() const noexcept { return indices_; }
  /// Position of (l1, l2), or -1.
  Eigen::Index position(int l1, int l2) const noexcept;

  bool operator==(const MomentIndexSet& other) const noexcept { return k_ == other.k_; }

 private:
  int k_;
  std::vector<std::pair<int, int>> indices_;
};

struct MomentVector {
  MomentIndexSet index_set;
  Vector values;

  MomentVector(MomentIndexSet idx, Vector v);
  double operator[](Eigen::Index i) const { return values(i); }
  double at(int l1, int l2) const;
};

/// {"k":..,"indices":[[l1,l2],..],"values":[..]}
std::string to_json(const MomentVector& v);

/// LP infeasibility. The certificate beta satisfies beta.theta > beta.Phi(p) for every grid
/// point p, so the halfspace {x : beta.x >= beta.theta} misses the grid entirely.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, MomentVector certificate, double margin)
      : Error(ErrorKind::infeasible, what), certificate_(std::move(certificate)), margin_(margin) {}
  const MomentVector& certificate() const noexcept { return certificate_; }
  double margin() const noexcept { return margin_; }

 private:
  MomentVector certificate_;
  double margin_;
};

/// Phi_{l1,l2}(lambda, z) = lambda^l1 z^l2.
MomentVector phi_features(double lambda, double z, const MomentIndexSet& idx);

/// E_nu[Phi_{l1,l2}] = c_l2 c_{l1+l2}.
MomentVector nu_mean(const MomentIndexSet& idx);

/// Moments mu2 must carry:
///   l1 = 0:  (c_l2^2 - alpha E_mu1[z^l2]) / (1 - alpha)
///   l1 >= 1: c_l2 c_{l1+l2} / (1 - alpha)
MomentVector target_vector(int k, double alpha, const DiscreteMeasure& mu1);

/// `count` Chebyshev-Gauss nodes on [-radius, radius], built from the nonnegative half and
/// mirrored so the set is exactly symmetric. Ascending.
std::vector<double> symmetric_nodes(int count, double radius);

/// Tensor-product grid as an N x 2 matrix of (lambda, z) rows.
Matrix tensor_grid(const std::vector<double>& lambda_nodes, const std::vector<double>& z_nodes);

struct GridSpec {
  int lambda_count = 41;
  double lambda_radius = 6.0;
  int z_count = 81;
  double z_radius = 12.0;
};
Matrix default_grid(const GridSpec& spec = {});

struct SolveOptions {
  double residual_tol = 1e-8;
  lp::Options lp;
};

/// Nonnegative weights on the grid reproducing theta. The grid must be closed under both
/// sign flips; the LP runs on the orbit representatives with lambda >= 0 and z >= 0, so
/// the returned (pruned, vertex) measure lives on that quadrant with at most D+1 atoms.
/// Throws InfeasibleError with the separating direction, or NumericError when the LP
/// reports feasibility but the re-evaluated residual exceeds residual_tol.
DiscreteMeasure solve_mu2(const Matrix& grid, const MomentVector& theta, const SolveOptions& options = {});

/// max_i |sum_j w_j Phi(p_j) - theta|.
double moment_residual(const DiscreteMeasure& mu2, const MomentVector& theta);

/// Spread every atom's weight evenly over its distinct sign images.
DiscreteMeasure symmetrize(const DiscreteMeasure& mu2);

struct MaxAlphaResult {
  double value = 0.0;
  /// (alpha, feasible) for the ten post-hoc probes value * i / 10.
  std::vector<std::pair<double, bool>> probes;
  bool monotone = true;
  int solves = 0;
  std::string diagnostics;
};

/// Largest alpha in [0, 1/2], to within bisect_tol, with target_vector(k, alpha, mu1)
/// feasible on the grid. Returns 0 with diagnostics when alpha = bisect_tol already fails.
MaxAlphaResult max_alpha(int k, const Matrix& grid, const DiscreteMeasure& mu1, double bisect_tol,
                         const SolveOptions& options = {});

/// Feature vectors of `count` draws from nu, one per column (D x count).
Matrix sample_nu_features(const MomentIndexSet& idx, std::size_t count, std::uint64_t seed);

struct DepthEstimate {
  double lower = 0.0;
  double upper = 0.0;
  Vector direction;  // minimising direction, original coordinates, unit norm
};

/// Approximate Tukey depth of theta in the empirical law of the columns of `samples`.
/// upper is the smallest tested halfspace fraction; lower subtracts the one-sided Hoeffding
/// margin sqrt(ln(1000) / (2N)) and is clamped at 0.
DepthEstimate tukey_depth(const Matrix& samples, const Vector& theta, std::size_t n_directions,
                          std::uint64_t seed);

using FeatureSampler = std::function<Vector(Stream&)>;

struct CaratheodoryResult {
  double frequency = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  std::size_t points_per_trial = 0;
};

/// Fraction of trials in which theta lies in the hull of m i.i.d. feature draws, with
/// m = ceil((3D+1)/depth_estimate) unless `points_override` is given.
CaratheodoryResult caratheodory_test(const Vector& theta, const FeatureSampler& sampler, Eigen::Index D,
                                     double depth_estimate, std::size_t trials, std::uint64_t seed,
                                     std::optional<std::size_t> points_override = std::nullopt);

struct TailReport {
  dist::Estimate estimate;
  double mean = 0.0;            // E_nu[p_beta]
  double bound_polynomial = 0.0;  // C k (sqrt(k) delta)^(1/(2k))
  double bound_log_concave = 0.0; // C k delta^(1/k)
};

/// Pr_nu[ |p_beta - t| <= delta |E p_beta| ].
TailReport anticonc_tail(const MomentVector& beta, double delta, double t, std::size_t trials,
                         std::uint64_t seed, double C = 1.0);

/// Var_nu[p_beta] from the exact fourth-order moments E[Phi_a Phi_b] = c_{a2+b2} c_{a1+a2+b1+b2}.
double p_beta_variance(const MomentVector& beta);

struct OneSidedReport {
  double delta = 0.0;
  double delta1 = 0.0;
  dist::Estimate upper_tail;   // Pr[p >= E p + delta sd]
  dist::Estimate band;         // Pr[|p - E p| <= delta sd], the empirical eta(delta)
  dist::Estimate band_delta1;  // Pr[|p - E p| <= delta1 sd]
  double bound16 = 0.0;        // delta1^2/16 - band
  double bound8 = 0.0;         // delta1^2/8 - band
};

OneSidedReport onesided_tail(const MomentVector& beta, double delta, double delta1, std::size_t trials,
                             std::uint64_t seed);

/// General planted spec: alpha, mu1, the symmetrized LP solution as mu2, and n.
dist::PlantedSpec assemble_planted(int k, const Matrix& grid, const DiscreteMeasure& mu1, double alpha,
                                   std::size_t n, const SolveOptions& options = {});

}  // namespace lowdeg::mm
