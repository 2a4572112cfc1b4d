#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <random>

#include "lowdeg/detect.hpp"
#include "lowdeg/distributions.hpp"
#include "lowdeg/error.hpp"

using namespace lowdeg;
using namespace lowdeg::detect;

namespace {

dist::SampleBatch from_rows(const Matrix& rows) {
  dist::SampleBatch b;
  b.data = rows;
  b.provenance.assign(static_cast<std::size_t>(rows.rows()), dist::Provenance::null);
  b.perturbed.assign(static_cast<std::size_t>(rows.rows()), 0);
  return b;
}

Matrix basis_for(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  Stream rng(seed, stream_id::subspace, 0);
  return random_orthonormal_basis(rng, n, d);
}

double reference_sigma_min(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

// Largest principal angle between the column spans of two orthonormal bases.
double max_principal_angle(const Matrix& u, const Matrix& v) {
  Eigen::JacobiSVD<Matrix> svd(u.transpose() * v);
  return std::acos(std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0));
}

}  // namespace

TEST(NoiseModel, Validation) {
  NoiseModel m;
  EXPECT_NO_THROW(m.validate());
  m.p = 1.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m.p = -0.1;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m.p = 0.2;
  m.budget = -1.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  EXPECT_EQ(strategy_from_string("spoof"), Strategy::spoof);
  EXPECT_STREQ(to_string(Strategy::random_direction), "random_direction");
  EXPECT_EQ(budget_kind_from_string("additive"), BudgetKind::additive);
  EXPECT_THROW(strategy_from_string("sneaky"), InvalidArgument);
}

TEST(ApplyNoise, IdentityAtZeroBudget) {
  const auto batch = dist::sample_planted(dist::PlantedSpec::point_mass(20, 0.3), 50, 1);
  const auto out = apply_noise(batch, NoiseModel{}, std::nullopt, 2);
  EXPECT_EQ(out.data, batch.data);
  EXPECT_EQ(out.provenance, batch.provenance);
}

TEST(ApplyNoise, FullRerandomizationNearOne) {
  // p must stay below 1; at p = 1 - 1e-12 every row is rerandomized.
  const auto batch = dist::sample_planted(dist::PlantedSpec::point_mass(20, 0.5), 400, 1);
  NoiseModel m;
  m.p = 1.0 - 1e-12;
  const auto out = apply_noise(batch, m, std::nullopt, 3);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    EXPECT_EQ(out.provenance[r], dist::Provenance::rerandomized);
    EXPECT_GT(out.row(r).norm(), 0.0);
  }
}

TEST(ApplyNoise, RerandomizationRate) {
  const auto batch = dist::sample_null({10}, 20000, 1);
  NoiseModel m;
  m.p = 0.2;
  const auto out = apply_noise(batch, m, std::nullopt, 3);
  std::size_t re = 0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const bool changed = out.row(r) != batch.row(r);
    EXPECT_EQ(changed, out.provenance[r] == dist::Provenance::rerandomized);
    re += changed;
  }
  EXPECT_NEAR(re / 20000.0, 0.2, 5 * std::sqrt(0.16 / 20000));
}

TEST(ApplyNoise, RelativeFullBudget) {
  const auto batch = dist::sample_null({30}, 10000, 4);
  NoiseModel m;
  m.budget = 0.1;
  m.strategy = Strategy::random_direction;
  const auto out = apply_noise(batch, m, std::nullopt, 5);
  double lo = 1e300, hi = 0.0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double ratio = (out.row(r) - batch.row(r)).norm() / batch.row(r).norm();
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    EXPECT_TRUE(out.perturbed[r]);
  }
  EXPECT_GE(lo, 0.1 - 1e-9);
  EXPECT_LE(hi, 0.1 + 1e-9);
}

TEST(ApplyNoise, AdditiveBudgetAndZeroRows) {
  const auto batch = dist::sample_planted(dist::PlantedSpec::point_mass(10, 0.5), 1000, 6);
  NoiseModel add;
  add.budget_kind = BudgetKind::additive;
  add.budget = 0.05;
  add.strategy = Strategy::random_direction;
  const auto out = apply_noise(batch, add, std::nullopt, 7);
  for (std::size_t r = 0; r < out.rows(); ++r) EXPECT_NEAR((out.row(r) - batch.row(r)).norm(), 0.05, 1e-12);

  NoiseModel rel = add;
  rel.budget_kind = BudgetKind::relative;
  const auto out2 = apply_noise(batch, rel, std::nullopt, 7);
  for (std::size_t r = 0; r < out2.rows(); ++r)
    if (batch.row(r).squaredNorm() == 0.0) EXPECT_EQ(out2.row(r).squaredNorm(), 0.0);
}

TEST(ApplyNoise, EvadeIsOrthogonalAndPlantedOnly) {
  const Matrix basis = basis_for(9, 40, 2);
  const auto batch = dist::sample_planted(dist::PlantedSpec::on_subspace(basis, 0.3), 300, 8);
  NoiseModel m;
  m.budget = 0.1;
  m.strategy = Strategy::evade;
  EXPECT_THROW(apply_noise(batch, m, std::nullopt, 1), InvalidArgument);
  const auto out = apply_noise(batch, m, basis, 1);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const Vector z = (out.row(r) - batch.row(r)).transpose();
    if (batch.provenance[r] == dist::Provenance::planted) {
      EXPECT_NEAR(z.norm(), 0.1 * batch.row(r).norm(), 1e-12);
      EXPECT_LE((basis.transpose() * z).norm(), 1e-12);
    } else {
      EXPECT_EQ(z.norm(), 0.0);
    }
  }
}

TEST(ApplyNoise, SpoofPullsNullRowsTowardDecoy) {
  const Matrix decoy = basis_for(10, 40, 1);
  const auto batch = dist::sample_null({40}, 300, 2);
  NoiseModel m;
  m.budget = 0.2;
  m.strategy = Strategy::spoof;
  EXPECT_THROW(apply_noise(batch, m, std::nullopt, 1), InvalidArgument);
  const auto out = apply_noise(batch, m, decoy, 1);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const Vector x = batch.row(r).transpose(), y = out.row(r).transpose();
    const double before = (x - decoy * (decoy.transpose() * x)).norm();
    const double after = (y - decoy * (decoy.transpose() * y)).norm();
    EXPECT_LE((y - x).norm(), 0.2 * x.norm() + 1e-12);
    EXPECT_LT(after, before);
  }
}

TEST(ApplyNoise, Deterministic) {
  const auto batch = dist::sample_null({10}, 100, 2);
  NoiseModel m;
  m.p = 0.3;
  m.budget = 0.1;
  m.strategy = Strategy::random_direction;
  EXPECT_EQ(apply_noise(batch, m, std::nullopt, 5).data, apply_noise(batch, m, std::nullopt, 5).data);
  EXPECT_NE(apply_noise(batch, m, std::nullopt, 5).data, apply_noise(batch, m, std::nullopt, 6).data);
}

TEST(SigmaMin, Examples) {
  EXPECT_NEAR(sigma_min_tuple(Matrix::Identity(5, 3)), 1.0, 1e-15);
  Matrix dup(4, 2);
  dup << 1, 1, 2, 2, 0, 0, 3, 3;
  EXPECT_EQ(sigma_min_tuple(dup), 0.0);
  Matrix a = Matrix::Zero(3, 2);
  a(0, 0) = 1.0;
  a(0, 1) = a(1, 1) = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(sigma_min_tuple(a), std::sqrt(1.0 - 1.0 / std::sqrt(2.0)), 1e-14);
  EXPECT_NEAR(sigma_min_tuple(a), 0.541196, 1e-6);
  Vector v(3);
  v << 3, 4, 0;
  EXPECT_DOUBLE_EQ(sigma_min_tuple(v), 5.0);
}

TEST(SigmaMin, MatchesFullSvd) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 300; ++trial) {
    const int cols = 1 + trial % 5, rows = cols + static_cast<int>(gen() % 30);
    Matrix a(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) a(i, j) = nd(gen);
    if (trial % 7 == 0 && cols > 1) a.col(cols - 1) = a.col(0) + 1e-3 * a.col(cols - 1);
    const double ref = reference_sigma_min(a);
    EXPECT_NEAR(sigma_min_tuple(a), ref, 1e-8 * std::max(ref, a.norm() * 1e-3)) << trial;
    a.colwise().normalize();
    const double s = sigma_min_tuple(a);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0 + 1e-12);
  }
}

TEST(RecoverSubspace, Examples) {
  Matrix a = Matrix::Zero(6, 3);
  a.col(0) << 1, 2, 0, 0, 0, 0;
  a.col(1) << -1, 1, 0, 0, 0, 0;
  a.col(2) << 3, 0.5, 0, 0, 0, 0;
  const Matrix u = recover_subspace(a, 2);
  ASSERT_EQ(u.cols(), 2);
  EXPECT_LE((u.transpose() * u - Matrix::Identity(2, 2)).norm(), 1e-8);
  EXPECT_LE(max_principal_angle(u, Matrix::Identity(6, 2)), 1e-8);

  Matrix r1(4, 2);
  r1.col(0) << 1, 2, 2, 0;
  r1.col(1) = -2.5 * r1.col(0);
  const Matrix u1 = recover_subspace(r1, 1);
  EXPECT_NEAR(std::abs(u1.col(0).dot(r1.col(0).normalized())), 1.0, 1e-10);
  EXPECT_THROW(recover_subspace(r1, 2), InvalidArgument);
  EXPECT_THROW(recover_subspace(r1, 0), InvalidArgument);
}

TEST(DetectRelative, DuplicateRowsTrigger) {
  Matrix rows(4, 3);
  rows << 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 3, 0;
  const auto v = detect_relative(from_rows(rows), 1);
  EXPECT_TRUE(v.planted);
  EXPECT_EQ(v.witness, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(v.sigma, 0.0);
  EXPECT_EQ(v.tuples_scanned, 5u);  // (0,1) (0,2) (0,3) (1,2) (1,3)
  ASSERT_EQ(v.subspace.cols(), 1);
  EXPECT_NEAR(std::abs(v.subspace(1, 0)), 1.0, 1e-12);
  EXPECT_THROW(detect_relative(from_rows(rows.topRows(1)), 1), InvalidArgument);
}

TEST(DetectRelative, ZeroRowTriggersAnyDimension) {
  Matrix rows = Matrix::Identity(5, 5);
  rows.row(3).setZero();
  const auto d0 = detect_relative(from_rows(rows), 0);
  EXPECT_TRUE(d0.planted);
  EXPECT_EQ(d0.witness, (std::vector<std::size_t>{3}));
  const auto d1 = detect_relative(from_rows(rows), 1);
  EXPECT_TRUE(d1.planted);
  EXPECT_EQ(d1.witness, (std::vector<std::size_t>{0, 3}));
  // d = 0 on unit rows: sigma is 1.
  EXPECT_FALSE(detect_relative(from_rows(Matrix::Identity(5, 5)), 0).planted);
}

TEST(DetectRelative, NullBatchesAreSound) {
  int nulls = 0;
  for (int t = 0; t < 200; ++t) nulls += !detect_relative(dist::sample_null({200}, 100, derive_seed(42, t)), 1).planted;
  EXPECT_GE(nulls, 198);
}

TEST(DetectRelative, PlantedBatchesDetectedAndSubspaceRecovered) {
  const int d = 1;
  const double alpha = 0.05, p = 0.2, eps = 1.0 / 16;
  const std::size_t n = 200, m = required_samples(d, alpha, p);
  ASSERT_EQ(m, 500u);
  for (Strategy s : {Strategy::random_direction, Strategy::evade, Strategy::spoof}) {
    int hits = 0, close = 0;
    const int trials = 30;
    for (int t = 0; t < trials; ++t) {
      const auto seed = derive_seed(1000 + static_cast<int>(s), t);
      const Matrix basis = basis_for(seed, n, d);
      const auto clean = dist::sample_planted(dist::PlantedSpec::on_subspace(basis, alpha), m, seed);
      NoiseModel model{p, BudgetKind::relative, eps, s};
      const Matrix target = s == Strategy::spoof ? basis_for(seed + 1, n, d) : basis;
      const auto v = detect_relative(apply_noise(clean, model, target, seed), d);
      if (!v.planted) continue;
      ++hits;
      close += max_principal_angle(v.subspace, basis) <= 4 * eps * std::sqrt(d + 1.0);
    }
    EXPECT_GE(hits, 28) << to_string(s);
    EXPECT_GE(close, 0.9 * hits) << to_string(s);
  }
}

TEST(DetectRelative, RescalingInvarianceAndThresholdMonotonicity) {
  const Matrix basis = basis_for(3, 30, 1);
  auto batch = dist::sample_planted(dist::PlantedSpec::on_subspace(basis, 0.1), 60, 3);
  NoiseModel model{0.0, BudgetKind::relative, 0.05, Strategy::random_direction};
  batch = apply_noise(batch, model, std::nullopt, 4);
  const auto base = detect_relative(batch, 1);
  auto scaled = batch;
  for (std::size_t r = 0; r < scaled.rows(); ++r) scaled.data.row(static_cast<Eigen::Index>(r)) *= 0.01 + 3.0 * r;
  const auto v = detect_relative(scaled, 1);
  EXPECT_EQ(v.planted, base.planted);
  EXPECT_EQ(v.witness, base.witness);
  EXPECT_NEAR(v.sigma, base.sigma, 1e-12);

  bool was_null = false;
  for (double th : {0.9, 0.7, 0.5, 0.3, 0.1, 0.05, 0.01, 0.0}) {
    const auto r = detect_relative(batch, 1, th);
    if (was_null) EXPECT_FALSE(r.planted) << th;
    was_null = !r.planted;
    EXPECT_EQ(r.planted, r.sigma <= th);
  }
}

TEST(DetectRelative, SoundnessImprovesWithDimension) {
  auto fp_rate = [](std::size_t n) {
    int fp = 0;
    for (int t = 0; t < 100; ++t) fp += detect_relative(dist::sample_null({n}, 100, derive_seed(n, t)), 1, 0.5, false).planted;
    return fp / 100.0;
  };
  const double small = fp_rate(8), mid = fp_rate(16), large = fp_rate(200), big = fp_rate(400);
  EXPECT_GT(small, mid);
  EXPECT_LE(big, large);
}

TEST(Weyl, PerturbedSigmaWithinBound) {
  const double eta = 0.3;
  const auto batch = dist::sample_null({25}, 30, 5);
  NoiseModel model{0.0, BudgetKind::additive, eta, Strategy::random_direction};
  const auto noisy = apply_noise(batch, model, std::nullopt, 6);
  for (int d : {0, 1, 2}) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(d + 1));
    for (int t = 0; t < 400; ++t) {
      for (int j = 0; j <= d; ++j) idx[static_cast<std::size_t>(j)] = (t * 7 + j * 11) % 30;
      std::sort(idx.begin(), idx.end());
      if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) continue;
      Matrix a(25, d + 1), b(25, d + 1);
      for (int j = 0; j <= d; ++j) {
        a.col(j) = batch.data.row(idx[static_cast<std::size_t>(j)]).transpose();
        b.col(j) = noisy.data.row(idx[static_cast<std::size_t>(j)]).transpose();
      }
      EXPECT_LE(std::abs(sigma_min_tuple(a) - sigma_min_tuple(b)), eta * std::sqrt(d + 1.0) + 1e-12);
    }
  }
}

TEST(DetectAdditive, Formulas) {
  EXPECT_EQ(additive_subsample_size(0, 0.05, 0.0, 0.1), static_cast<std::size_t>(std::ceil(2 * std::log(40.0) / 0.05)));
  EXPECT_EQ(additive_subsample_size(0, 0.05, 0.0, 0.1), 148u);
  const double l2 = std::pow(std::log(40.0), 2);
  EXPECT_NEAR(additive_threshold(0.05, 0.0, 0.1, 400, 64), 0.05 * 20 / (64 * l2), 1e-15);
  EXPECT_NEAR(additive_budget(0.05, 0.0, 0.1, 400, 0, 64), 0.05 * 20 / (64 * l2), 1e-15);
  EXPECT_NEAR(additive_budget(0.05, 0.2, 0.1, 400, 2, 10), 0.05 * 0.8 * 20 / (30 * l2), 1e-15);
  EXPECT_EQ(required_samples(1, 0.05, 0.2), 500u);
  EXPECT_EQ(required_samples(1, 0.05, 0.2, 5.0), 250u);
}

TEST(DetectAdditive, OriginInSubsampleTriggers) {
  const std::size_t j = additive_subsample_size(0, 0.05, 0.0, 0.1);
  auto batch = dist::sample_null({50}, j, 2);
  batch.data.row(17).setZero();
  AdditiveParams params{0.05, 0.0, 0.1, std::nullopt, 64.0};
  const auto v = detect_additive(batch, 0, params, 1);
  EXPECT_TRUE(v.planted);
  EXPECT_EQ(v.witness, (std::vector<std::size_t>{17}));
  EXPECT_EQ(v.sigma, 0.0);
  EXPECT_THROW(detect_additive(dist::sample_null({50}, j - 1, 2), 0, params, 1), InvalidArgument);
}

TEST(DetectAdditive, PerturbedPlantedPointStillTriggers) {
  const std::size_t n = 400, j = additive_subsample_size(0, 0.05, 0.0, 0.1);
  auto batch = dist::sample_null({n}, j, 3);
  AdditiveParams params{0.05, 0.0, 0.1, std::nullopt, 64.0};
  const double tau = additive_threshold(0.05, 0.0, 0.1, n, 64.0);
  Vector z = Vector::Zero(n);
  z(5) = tau / 2;  // eta sqrt(d+1) = tau / 2
  batch.data.row(60) = z.transpose();
  const auto v = detect_additive(batch, 0, params, 9);
  EXPECT_TRUE(v.planted);
  EXPECT_NEAR(v.sigma, tau / 2, 1e-15);
}

TEST(DetectAdditive, NullBatchesAndSubsampleDeterminism) {
  const std::size_t n = 400;
  AdditiveParams params{0.05, 0.0, 0.1, std::nullopt, 64.0};
  int nulls = 0;
  for (int t = 0; t < 50; ++t) nulls += !detect_additive(dist::sample_null({n}, 300, derive_seed(8, t)), 0, params, t).planted;
  EXPECT_GE(nulls, 48);

  auto batch = dist::sample_null({10}, 300, 1);
  params.tau = 1e9;
  const auto a = detect_additive(batch, 1, params, 5), b = detect_additive(batch, 1, params, 5);
  EXPECT_EQ(a.witness, b.witness);
  EXPECT_TRUE(a.planted);
  EXPECT_EQ(a.tuples_scanned, 1u);
  EXPECT_LT(a.witness[0], a.witness[1]);
}

TEST(Incoherence, ExamplesAndPerturbationBound) {
  EXPECT_EQ(incoherence(from_rows(Matrix::Identity(4, 6))), 0.0);
  Matrix zero = Matrix::Identity(3, 3);
  zero.row(1).setZero();
  EXPECT_THROW(incoherence(from_rows(zero)), InvalidArgument);

  const std::size_t n = 200, m = 100;
  const double eps = 0.05;
  for (int t = 0; t < 5; ++t) {
    const auto batch = dist::sample_null({n}, m, derive_seed(77, t));
    const double clean = incoherence(batch);
    const double c = clean * std::sqrt(static_cast<double>(n)) / std::sqrt(std::log(static_cast<double>(m)));
    NoiseModel model{0.0, BudgetKind::relative, eps, Strategy::random_direction};
    const double noisy = incoherence(apply_noise(batch, model, std::nullopt, t));
    const double bound = (c * std::sqrt(std::log(static_cast<double>(m))) / std::sqrt(static_cast<double>(n)) +
                          2 * eps + eps * eps) /
                         ((1 - eps) * (1 - eps));
    EXPECT_LE(noisy, bound + 1e-9);
  }
}

TEST(Verdict, Jsonl) {
  DetectionVerdict v;
  v.planted = true;
  v.witness = {2, 9};
  v.sigma = 0.25;
  v.tuples_scanned = 12;
  v.elapsed_ns = 77;
  EXPECT_EQ(to_jsonl(v), "{\"verdict\":\"PLANTED\",\"witness\":[2,9],\"sigma\":0.25,\"tuple_count_scanned\":12,\"elapsed_ns\":77}");
  v.planted = false;
  v.witness.clear();
  EXPECT_NE(to_jsonl(v).find("\"verdict\":\"NULL\",\"witness\":[]"), std::string::npos);
}
