#pragma once

// Detection of a planted low-dimensional subspace by scanning (d+1)-tuples of samples for
// near linear dependence, and the noise channels the detectors are meant to survive.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lowdeg/distributions.hpp"
#include "lowdeg/linalg.hpp"

namespace lowdeg::detect {

enum class BudgetKind { relative, additive };
enum class Strategy { none, random_direction, evade, spoof };

const char* to_string(Strategy s) noexcept;
Strategy strategy_from_string(const std::string& s);
const char* to_string(BudgetKind b) noexcept;
BudgetKind budget_kind_from_string(const std::string& s);

struct NoiseModel {
  double p = 0.0;  // rerandomization probability
  BudgetKind budget_kind = BudgetKind::relative;
  double budget = 0.0;  // epsilon (relative) or eta (additive)
  Strategy strategy = Strategy::none;

  void validate() const;
};

/// Rerandomizes each row from Q with probability p, then perturbs it. Every perturbation
/// satisfies norm2(z) <= budget (additive) or <= budget * norm2(x) (relative); under a
/// relative budget zero rows are left alone.
///   random_direction: every row, uniform direction, full budget.
///   evade: planted rows only, along a fixed unit direction orthogonal to `subspace`, full
///          budget, sign alternating between consecutive planted rows.
///   spoof: null and rerandomized rows move toward their projection onto `subspace`,
///          capped at the budget.
/// evade and spoof need `subspace` (orthonormal columns); throws InvalidArgument without it.
dist::SampleBatch apply_noise(const dist::SampleBatch& batch, const NoiseModel& model,
                              const std::optional<Matrix>& subspace, std::uint64_t seed,
                              const dist::ScaleLaw& scale_law = dist::ScaleLaw::standard_normal());

/// Smallest singular value of an n x (d+1) matrix through the Gram matrix and Jacobi
/// sweeps, clamped at 0. A single column returns its norm2.
double sigma_min_tuple(const Matrix& columns);

/// Top-d left singular vectors of an n x (d+1) matrix, orthonormal columns. Needs more than d columns.
Matrix recover_subspace(const Matrix& columns, int d);

struct DetectionVerdict {
  bool planted = false;
  std::vector<std::size_t> witness;  // row indices, ascending; size d+1 when planted
  /// Triggering sigma when planted, otherwise the smallest sigma seen.
  double sigma = 0.0;
  Matrix subspace;  // n x d when planted, d >= 1 and requested
  std::size_t tuples_scanned = 0;
  std::int64_t elapsed_ns = 0;
};

/// {"verdict":..,"witness":[..],"sigma":..,"tuple_count_scanned":..,"elapsed_ns":..}
std::string to_jsonl(const DetectionVerdict& v);

/// ceil(C (d+1) / (alpha (1-p))).
std::size_t required_samples(int d, double alpha, double p, double C = 10.0);

/// Normalizes every row (zero rows stay zero and therefore trigger), scans all
/// (d+1)-subsets in lexicographic order and stops at the first with sigma <= threshold.
DetectionVerdict detect_relative(const dist::SampleBatch& batch, int d, double threshold = 0.5,
                                 bool want_subspace = true);

struct AdditiveParams {
  double alpha = 0.0;
  double p = 0.0;
  double delta = 0.1;
  std::optional<double> tau;
  double c_threshold = 64.0;
};

/// |J| = ceil(2 ln(4/delta) (d+1) / (alpha (1-p))).
std::size_t additive_subsample_size(int d, double alpha, double p, double delta);
/// alpha (1-p) sqrt(n) / (c ln^2(4/delta)).
double additive_threshold(double alpha, double p, double delta, std::size_t n, double c);
/// alpha (1-p) sqrt(n) / (C (d+1) ln^2(4/delta)), the largest budget the guarantee covers.
double additive_budget(double alpha, double p, double delta, std::size_t n, int d, double C);

/// Draws J uniformly without replacement and scans its (d+1)-subsets of raw rows for
/// sigma <= tau.
DetectionVerdict detect_additive(const dist::SampleBatch& batch, int d, const AdditiveParams& params,
                                 std::uint64_t seed);

/// max over i != j of |<a_i, a_j>| for the normalized rows. Zero rows are rejected.
double incoherence(const dist::SampleBatch& batch);

}  // namespace lowdeg::detect
