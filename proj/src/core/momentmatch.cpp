#include "lowdeg/momentmatch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace lowdeg::mm {

using dist::gaussian_moment;

MomentIndexSet::MomentIndexSet(int k) : k_(k) {
  if (k < 0) throw InvalidArgument("MomentIndexSet: negative degree");
  for (int l1 = k - k % 2; l1 >= 0; l1 -= 2)
    for (int l2 = k - l1 - (k - l1) % 2; l2 >= 0; l2 -= 2)
      if (l1 + l2 > 0) indices_.emplace_back(l1, l2);
}

Eigen::Index MomentIndexSet::position(int l1, int l2) const noexcept {
  for (std::size_t i = 0; i < indices_.size(); ++i)
    if (indices_[i].first == l1 && indices_[i].second == l2) return static_cast<Eigen::Index>(i);
  return -1;
}

MomentVector::MomentVector(MomentIndexSet idx, Vector v) : index_set(std::move(idx)), values(std::move(v)) {
  if (values.size() != index_set.D()) throw InvalidArgument("MomentVector: length does not match the index set");
  if (!values.allFinite()) throw InvalidArgument("MomentVector: non-finite entry");
}

double MomentVector::at(int l1, int l2) const {
  const auto pos = index_set.position(l1, l2);
  if (pos < 0) throw InvalidArgument("MomentVector: index not in the set");
  return values(pos);
}

std::string to_json(const MomentVector& v) {
  std::ostringstream os;
  char buf[64];
  os << "{\"k\":" << v.index_set.k() << ",\"indices\":[";
  const auto& idx = v.index_set.indices();
  for (std::size_t i = 0; i < idx.size(); ++i)
    os << (i ? "," : "") << '[' << idx[i].first << ',' << idx[i].second << ']';
  os << "],\"values\":[";
  for (Eigen::Index i = 0; i < v.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v.values(i));
    os << (i ? "," : "") << buf;
  }
  os << "]}";
  return os.str();
}

MomentVector phi_features(double lambda, double z, const MomentIndexSet& idx) {
  Vector v(idx.D());
  for (Eigen::Index i = 0; i < idx.D(); ++i) {
    const auto [l1, l2] = idx.indices()[static_cast<std::size_t>(i)];
    v(i) = std::pow(lambda, l1) * std::pow(z, l2);
  }
  return {idx, v};
}

namespace {

// Features of every column without the MomentVector wrapper.
void fill_features(double lambda, double z, const MomentIndexSet& idx, double* out) {
  for (std::size_t i = 0; i < idx.indices().size(); ++i) {
    const auto [l1, l2] = idx.indices()[i];
    out[i] = std::pow(lambda, l1) * std::pow(z, l2);
  }
}

}  // namespace

MomentVector nu_mean(const MomentIndexSet& idx) {
  Vector v(idx.D());
  for (Eigen::Index i = 0; i < idx.D(); ++i) {
    const auto [l1, l2] = idx.indices()[static_cast<std::size_t>(i)];
    v(i) = gaussian_moment(l2) * gaussian_moment(l1 + l2);
  }
  return {idx, v};
}

MomentVector target_vector(int k, double alpha, const DiscreteMeasure& mu1) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("target_vector: alpha must lie in (0,1)");
  if (mu1.size() == 0 || mu1.dim() != 1) throw InvalidArgument("target_vector: mu1 must be a measure on R");
  const MomentIndexSet idx(k);
  Vector v(idx.D());
  for (Eigen::Index i = 0; i < idx.D(); ++i) {
    const auto [l1, l2] = idx.indices()[static_cast<std::size_t>(i)];
    if (l1 == 0) {
      const double c = gaussian_moment(l2);
      v(i) = (c * c - alpha * mu1.moment({l2})) / (1.0 - alpha);
    } else {
      v(i) = gaussian_moment(l2) * gaussian_moment(l1 + l2) / (1.0 - alpha);
    }
  }
  return {idx, v};
}

std::vector<double> symmetric_nodes(int count, double radius) {
  if (count < 1) throw InvalidArgument("symmetric_nodes: need at least one node");
  if (!(radius > 0.0)) throw InvalidArgument("symmetric_nodes: radius must be positive");
  // x_i = R cos((2i-1) pi / (2N)) for i = 1..ceil(N/2), then mirrored.
  std::vector<double> half;
  for (int i = 1; 2 * i <= count; ++i) half.push_back(radius * std::cos((2.0 * i - 1.0) * std::numbers::pi / (2.0 * count)));
  std::vector<double> out;
  for (double x : half) out.push_back(-x);
  if (count % 2 == 1) out.push_back(0.0);
  for (auto it = half.rbegin(); it != half.rend(); ++it) out.push_back(*it);
  return out;
}

Matrix tensor_grid(const std::vector<double>& lambda_nodes, const std::vector<double>& z_nodes) {
  Matrix g(static_cast<Eigen::Index>(lambda_nodes.size() * z_nodes.size()), 2);
  Eigen::Index r = 0;
  for (double l : lambda_nodes)
    for (double z : z_nodes) {
      g(r, 0) = l;
      g(r, 1) = z;
      ++r;
    }
  return g;
}

Matrix default_grid(const GridSpec& spec) {
  return tensor_grid(symmetric_nodes(spec.lambda_count, spec.lambda_radius),
                     symmetric_nodes(spec.z_count, spec.z_radius));
}

namespace {

// Orbit representatives (lambda >= 0, z >= 0) of a sign-symmetric grid.
std::vector<std::pair<double, double>> orbit_representatives(const Matrix& grid) {
  if (grid.cols() != 2) throw InvalidArgument("grid must have two columns (lambda, z)");
  std::set<std::pair<double, double>> points;
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    if (!std::isfinite(grid(r, 0)) || !std::isfinite(grid(r, 1))) throw InvalidArgument("grid: non-finite point");
    points.emplace(grid(r, 0), grid(r, 1));
  }
  std::vector<std::pair<double, double>> reps;
  for (const auto& [l, z] : points) {
    if (!points.count({-l, z}) || !points.count({l, -z}))
      throw InvalidArgument("grid is not symmetric under lambda -> -lambda and z -> -z");
    if (l >= 0.0 && z >= 0.0) reps.emplace_back(l, z);
  }
  return reps;
}

bool feasible_at(int k, double alpha, const Matrix& grid, const DiscreteMeasure& mu1, const SolveOptions& options) {
  try {
    solve_mu2(grid, target_vector(k, alpha, mu1), options);
    return true;
  } catch (const InfeasibleError&) {
    return false;
  } catch (const NumericError&) {
    return false;
  }
}

}  // namespace

DiscreteMeasure solve_mu2(const Matrix& grid, const MomentVector& theta, const SolveOptions& options) {
  const auto& idx = theta.index_set;
  const Eigen::Index D = idx.D();
  if (grid.rows() < D + 1) throw InvalidArgument("solve_mu2: grid has fewer than D+1 points");
  const auto reps = orbit_representatives(grid);

  Matrix features(D, static_cast<Eigen::Index>(reps.size()));
  for (std::size_t j = 0; j < reps.size(); ++j)
    fill_features(reps[j].first, reps[j].second, idx, features.col(static_cast<Eigen::Index>(j)).data());

  const auto lp_result = lp::convex_feasibility(features, theta.values, options.lp);
  if (!lp_result.feasible) {
    if (lp_result.certificate.size() == 0)
      throw NumericError("solve_mu2: LP iteration cap reached and the NNLS fallback left a residual");
    throw InfeasibleError("solve_mu2: target moments are not reachable on this grid",
                          MomentVector(idx, lp_result.certificate), lp_result.certificate_margin);
  }

  std::vector<Eigen::Index> keep;
  double total = 0.0;
  for (Eigen::Index j = 0; j < lp_result.weights.size(); ++j)
    if (lp_result.weights(j) > 0.0) {
      keep.push_back(j);
      total += lp_result.weights(j);
    }
  Matrix points(static_cast<Eigen::Index>(keep.size()), 2);
  std::vector<double> weights;
  for (std::size_t a = 0; a < keep.size(); ++a) {
    const auto& rep = reps[static_cast<std::size_t>(keep[a])];
    points(static_cast<Eigen::Index>(a), 0) = rep.first;
    points(static_cast<Eigen::Index>(a), 1) = rep.second;
    weights.push_back(lp_result.weights(keep[a]) / total);
  }
  DiscreteMeasure mu2(std::move(points), std::move(weights));
  const double residual = moment_residual(mu2, theta);
  if (residual > options.residual_tol)
    throw NumericError("solve_mu2: residual " + std::to_string(residual) + " exceeds the tolerance");
  return mu2;
}

double moment_residual(const DiscreteMeasure& mu2, const MomentVector& theta) {
  if (mu2.dim() != 2) throw InvalidArgument("moment_residual: mu2 must be a measure on R^2");
  const auto& idx = theta.index_set;
  Vector acc = Vector::Zero(idx.D());
  Vector f(idx.D());
  for (std::size_t a = 0; a < mu2.size(); ++a) {
    fill_features(mu2.point(a)(0), mu2.point(a)(1), idx, f.data());
    acc += mu2.weight(a) * f;
  }
  return (acc - theta.values).cwiseAbs().maxCoeff();
}

DiscreteMeasure symmetrize(const DiscreteMeasure& mu2) {
  if (mu2.dim() != 2) throw InvalidArgument("symmetrize: mu2 must be a measure on R^2");
  std::map<std::pair<double, double>, double> acc;
  for (std::size_t a = 0; a < mu2.size(); ++a) {
    const double l = std::abs(mu2.point(a)(0));
    const double z = std::abs(mu2.point(a)(1));
    // Signed zeros compare equal, so atoms on an axis get two images, the origin one.
    const std::set<std::pair<double, double>> images{{l, z}, {-l, z}, {l, -z}, {-l, -z}};
    for (const auto& p : images) acc[p] += mu2.weight(a) / static_cast<double>(images.size());
  }
  Matrix points(static_cast<Eigen::Index>(acc.size()), 2);
  std::vector<double> weights;
  Eigen::Index r = 0;
  for (const auto& [p, w] : acc) {
    points(r, 0) = p.first;
    points(r, 1) = p.second;
    weights.push_back(w);
    ++r;
  }
  return {std::move(points), std::move(weights)};
}

MaxAlphaResult max_alpha(int k, const Matrix& grid, const DiscreteMeasure& mu1, double bisect_tol,
                         const SolveOptions& options) {
  if (!(bisect_tol > 0.0 && bisect_tol < 0.5)) throw InvalidArgument("max_alpha: bisect_tol must lie in (0, 1/2)");
  MaxAlphaResult result;
  auto feasible = [&](double a) {
    ++result.solves;
    return feasible_at(k, a, grid, mu1, options);
  };

  if (!feasible(bisect_tol)) {
    result.value = 0.0;
    result.diagnostics = "infeasible already at alpha = " + std::to_string(bisect_tol);
    return result;
  }
  double lo = bisect_tol;
  double hi = 0.5;
  if (feasible(hi)) {
    lo = hi;
  } else {
    while (hi - lo > bisect_tol) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? lo : hi) = mid;
    }
  }
  result.value = lo;
  for (int i = 1; i <= 10; ++i) {
    const double a = lo * i / 10.0;
    const bool ok = feasible(a);
    result.probes.emplace_back(a, ok);
    if (!ok) result.monotone = false;
  }
  if (!result.monotone) result.diagnostics = "feasibility is not monotone along the probe points";
  return result;
}

Matrix sample_nu_features(const MomentIndexSet& idx, std::size_t count, std::uint64_t seed) {
  Matrix out(idx.D(), static_cast<Eigen::Index>(count));
  for (std::size_t t = 0; t < count; ++t) {
    Stream rng(seed, stream_id::nu_features, t);
    std::normal_distribution<double> normal;
    const double lambda = normal(rng);
    const double g = normal(rng);
    fill_features(lambda, lambda * g, idx, out.col(static_cast<Eigen::Index>(t)).data());
  }
  return out;
}

namespace {

double halfspace_fraction(const Matrix& centered, const Vector& v) {
  const Eigen::RowVectorXd proj = v.transpose() * centered;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < proj.size(); ++i)
    if (proj(i) >= 0.0) ++hits;
  return static_cast<double>(hits) / static_cast<double>(proj.size());
}

}  // namespace

DepthEstimate tukey_depth(const Matrix& samples, const Vector& theta, std::size_t n_directions,
                          std::uint64_t seed) {
  const Eigen::Index D = samples.rows();
  const Eigen::Index N = samples.cols();
  if (theta.size() != D) throw InvalidArgument("tukey_depth: theta has the wrong length");
  if (N < 1000) throw InvalidArgument("tukey_depth: at least 10^3 samples required");
  if (n_directions < 1000) throw InvalidArgument("tukey_depth: at least 10^3 directions required");

  // Depth is affine invariant, so search in whitened coordinates.
  const Vector mean = samples.rowwise().mean();
  const Matrix centered_samples = samples.colwise() - mean;
  const Matrix cov = centered_samples * centered_samples.transpose() / static_cast<double>(N);
  Matrix l = Matrix::Identity(D, D);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
    l = llt.matrixL();
  } else {
    for (Eigen::Index i = 0; i < D; ++i) l(i, i) = cov(i, i) > 0.0 ? std::sqrt(cov(i, i)) : 1.0;
  }
  const auto tri = l.triangularView<Eigen::Lower>();
  const Matrix z = tri.solve(samples.colwise() - theta);

  Vector best_v = Vector::Unit(D, 0);
  double best = halfspace_fraction(z, best_v);
  auto consider = [&](const Vector& v) {
    const double f = halfspace_fraction(z, v);
    if (f < best) {
      best = f;
      best_v = v;
    }
  };
  for (Eigen::Index i = 0; i < D; ++i) {
    consider(Vector::Unit(D, i));
    consider(-Vector::Unit(D, i));
  }
  for (std::size_t r = 0; r < n_directions; ++r) {
    Stream rng(seed, stream_id::directions, r);
    consider(random_unit_vector(rng, D));
  }
  // Coordinate descent on the sphere.
  for (double step = 0.5; step >= 1e-3;) {
    bool improved = false;
    for (Eigen::Index i = 0; i < D && !improved; ++i)
      for (double sign : {1.0, -1.0}) {
        Vector v = best_v;
        v(i) += sign * step;
        const double norm = v.norm();
        if (norm == 0.0) continue;
        const double before = best;
        consider(v / norm);
        if (best < before) {
          improved = true;
          break;
        }
      }
    if (!improved) step *= 0.5;
  }

  DepthEstimate out;
  out.upper = best;
  out.lower = std::max(0.0, best - std::sqrt(std::log(1000.0) / (2.0 * static_cast<double>(N))));
  // <v, L^{-1}(x - theta)> = <L^{-T} v, x - theta>
  Vector u = l.transpose().triangularView<Eigen::Upper>().solve(best_v);
  out.direction = u / u.norm();
  return out;
}

CaratheodoryResult caratheodory_test(const Vector& theta, const FeatureSampler& sampler, Eigen::Index D,
                                     double depth_estimate, std::size_t trials, std::uint64_t seed,
                                     std::optional<std::size_t> points_override) {
  if (!(depth_estimate > 0.0)) throw InvalidArgument("caratheodory_test: depth estimate must be positive");
  if (theta.size() != D) throw InvalidArgument("caratheodory_test: theta has the wrong length");
  if (trials < 1) throw InvalidArgument("caratheodory_test: need at least one trial");
  const auto m = points_override ? *points_override
                                 : static_cast<std::size_t>(std::ceil((3.0 * static_cast<double>(D) + 1.0) / depth_estimate - 1e-12));
  if (m < 1) throw InvalidArgument("caratheodory_test: need at least one point per trial");

  CaratheodoryResult result;
  result.trials = trials;
  result.points_per_trial = m;
  Matrix f(D, static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      Stream rng(derive_seed(seed, t), stream_id::caratheodory, i);
      const Vector v = sampler(rng);
      if (v.size() != D) throw InvalidArgument("caratheodory_test: sampler returned the wrong length");
      f.col(static_cast<Eigen::Index>(i)) = v;
    }
    if (lp::convex_feasibility(f, theta).feasible) ++result.successes;
  }
  result.frequency = static_cast<double>(result.successes) / static_cast<double>(trials);
  return result;
}

namespace {

double p_beta(const MomentVector& beta, double lambda, double z) {
  double acc = 0.0;
  const auto& idx = beta.index_set.indices();
  for (std::size_t i = 0; i < idx.size(); ++i)
    acc += beta.values(static_cast<Eigen::Index>(i)) * std::pow(lambda, idx[i].first) * std::pow(z, idx[i].second);
  return acc;
}

template <typename F>
void for_each_nu_draw(std::size_t trials, std::uint64_t seed, F&& f) {
  for (std::size_t t = 0; t < trials; ++t) {
    Stream rng(seed, stream_id::anticonc, t);
    std::normal_distribution<double> normal;
    const double lambda = normal(rng);
    const double g = normal(rng);
    f(lambda, lambda * g);
  }
}

dist::Estimate proportion(std::size_t hits, std::size_t trials) {
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials))};
}

}  // namespace

TailReport anticonc_tail(const MomentVector& beta, double delta, double t, std::size_t trials,
                         std::uint64_t seed, double C) {
  if (trials < 100000) throw InvalidArgument("anticonc_tail: at least 10^5 trials required");
  if (!(delta >= 0.0)) throw InvalidArgument("anticonc_tail: delta must be nonnegative");
  TailReport report;
  report.mean = beta.values.dot(nu_mean(beta.index_set).values);
  if (std::abs(report.mean) < 1e-12) throw InvalidArgument("anticonc_tail: |E p_beta| below 1e-12, the band is empty");
  const double width = delta * std::abs(report.mean);
  std::size_t hits = 0;
  for_each_nu_draw(trials, seed, [&](double lambda, double z) {
    if (std::abs(p_beta(beta, lambda, z) - t) <= width) ++hits;
  });
  report.estimate = proportion(hits, trials);
  const double k = beta.index_set.k();
  report.bound_polynomial = C * k * std::pow(std::sqrt(k) * delta, 1.0 / (2.0 * k));
  report.bound_log_concave = C * k * std::pow(delta, 1.0 / k);
  return report;
}

double p_beta_variance(const MomentVector& beta) {
  const auto& idx = beta.index_set.indices();
  double second = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const int z_pow = idx[a].second + idx[b].second;
      const int lambda_pow = idx[a].first + idx[b].first + z_pow;
      second += beta.values(static_cast<Eigen::Index>(a)) * beta.values(static_cast<Eigen::Index>(b)) *
                gaussian_moment(z_pow) * gaussian_moment(lambda_pow);
    }
  const double mean = beta.values.dot(nu_mean(beta.index_set).values);
  return second - mean * mean;
}

OneSidedReport onesided_tail(const MomentVector& beta, double delta, double delta1, std::size_t trials,
                             std::uint64_t seed) {
  if (trials < 100000) throw InvalidArgument("onesided_tail: at least 10^5 trials required");
  if (!(delta >= 0.0 && delta1 > 0.0)) throw InvalidArgument("onesided_tail: need delta >= 0 and delta1 > 0");
  const double mean = beta.values.dot(nu_mean(beta.index_set).values);
  const double var = p_beta_variance(beta);
  if (!(var > 0.0)) throw InvalidArgument("onesided_tail: p_beta has zero variance");
  const double sd = std::sqrt(var);
  std::size_t upper = 0, band = 0, band1 = 0;
  for_each_nu_draw(trials, seed, [&](double lambda, double z) {
    const double dev = p_beta(beta, lambda, z) - mean;
    if (dev >= delta * sd) ++upper;
    if (std::abs(dev) <= delta * sd) ++band;
    if (std::abs(dev) <= delta1 * sd) ++band1;
  });
  OneSidedReport r;
  r.delta = delta;
  r.delta1 = delta1;
  r.upper_tail = proportion(upper, trials);
  r.band = proportion(band, trials);
  r.band_delta1 = proportion(band1, trials);
  r.bound16 = delta1 * delta1 / 16.0 - r.band.value;
  r.bound8 = delta1 * delta1 / 8.0 - r.band.value;
  return r;
}

dist::PlantedSpec assemble_planted(int k, const Matrix& grid, const DiscreteMeasure& mu1, double alpha,
                                   std::size_t n, const SolveOptions& options) {
  if (n < 1) throw InvalidArgument("assemble_planted: n must be at least 1");
  for (int l = 1; l <= std::max(k, 1); l += 2)
    if (std::abs(mu1.moment({l})) > 1e-12) throw InvalidArgument("assemble_planted: mu1 must be symmetric");
  const auto raw = solve_mu2(grid, target_vector(k, alpha, mu1), options);
  dist::PlantedSpec spec;
  spec.variant = dist::PlantedVariant::general;
  spec.alpha = alpha;
  spec.n = n;
  spec.mu1 = mu1;
  spec.mu2 = symmetrize(raw);
  spec.validate();
  return spec;
}

}  // namespace lowdeg::mm
