#pragma once

// Null distribution Q (Gaussian scale mixture), planted distributions, and their exact
// moment oracles.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lowdeg/linalg.hpp"
#include "lowdeg/measure.hpp"
#include "lowdeg/rng.hpp"

namespace lowdeg::dist {

/// E[g^ell] for g ~ N(0,1): (ell-1)!! for even ell, 0 for odd. Exact integer arithmetic up
/// to ell = 30, floating point beyond.
double gaussian_moment(int ell);

/// E_Q[x_1^l1 x_n^l2] = c_l1 c_l2 c_{l1+l2}; zero when either exponent is odd.
double q_mixed_moment(int l1, int l2);

/// Law of the scale parameter lambda. Moments must be finite and available in closed form.
class ScaleLaw {
 public:
  static ScaleLaw standard_normal();
  /// Symmetric discrete law with E[lambda^2] = 1 and a heavy tail: |lambda| = 1/2 with
  /// probability 0.9 and sqrt(7.75) with probability 0.1.
  static ScaleLaw heavy_two_scale();
  static ScaleLaw from_name(const std::string& name);

  const std::string& name() const noexcept { return name_; }
  double moment(int ell) const;
  double sample(Stream& rng) const;

 private:
  std::string name_;
  std::vector<double> abs_values_;  // empty for the standard normal
  std::vector<double> probabilities_;
};

struct ScaleMixtureSpec {
  std::size_t n = 1;
  ScaleLaw scale_law = ScaleLaw::standard_normal();
};

/// E[(lambda g)^ell] for scalar g ~ N(0,1): the one-dimensional marginal of Q.
double radial_moment(const ScaleLaw& law, int ell);

enum class PlantedVariant { point_mass, general, subspace };

/// Planted distribution.
///  - point_mass: 0 with probability alpha, else a draw from Q.
///  - general: with probability alpha the signal coordinate is drawn from mu1 and the rest
///    is zero; otherwise (lambda, z) ~ mu2, the rest ~ N(0, lambda^2 I), signal = z. The
///    signal coordinate is mapped onto `signal_direction` by a Householder reflection.
///  - subspace: with probability alpha the row is B (lambda g) with g ~ N(0, I_d) for the
///    orthonormal n x d basis B; otherwise a draw from Q.
struct PlantedSpec {
  PlantedVariant variant = PlantedVariant::point_mass;
  double alpha = 0.0;
  std::size_t n = 1;
  DiscreteMeasure mu1;
  DiscreteMeasure mu2;
  std::optional<Vector> signal_direction;  // defaults to e_n
  Matrix subspace_basis;                   // subspace variant only
  ScaleLaw scale_law = ScaleLaw::standard_normal();

  static PlantedSpec point_mass(std::size_t n, double alpha);
  static PlantedSpec on_subspace(Matrix basis, double alpha);
  /// Throws InvalidArgument on any broken invariant.
  void validate() const;
};

enum class Provenance : std::uint8_t { null, planted, rerandomized };
const char* to_string(Provenance p) noexcept;
Provenance provenance_from_string(const std::string& s);

/// m x n sample matrix plus per-row metadata. Provenance never reaches the detectors.
struct SampleBatch {
  RowMatrix data;
  std::vector<Provenance> provenance;
  std::vector<std::uint8_t> perturbed;
  std::uint64_t seed_record = 0;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(data.cols()); }
  auto row(std::size_t i) const { return data.row(static_cast<Eigen::Index>(i)); }
};

/// Draws one row of Q into `out` (length n).
void draw_null_row(const ScaleMixtureSpec& spec, Stream& rng, double* out);

SampleBatch sample_null(const ScaleMixtureSpec& spec, std::size_t m, std::uint64_t seed);
SampleBatch sample_planted(const PlantedSpec& spec, std::size_t m, std::uint64_t seed);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo estimate of Pr_{X~Q}[ ||X||_2 <= gamma sqrt(n) ].
Estimate small_ball_estimate(double gamma, std::size_t n, std::size_t trials, std::uint64_t seed);

/// Header `x1,...,xn,provenance,perturbed`, 17 significant digits.
void write_batch_csv(std::ostream& os, const SampleBatch& batch);
SampleBatch read_batch_csv(std::istream& is);

}  // namespace lowdeg::dist
