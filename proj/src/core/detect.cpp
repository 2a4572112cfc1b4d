#include "lowdeg/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lowdeg/error.hpp"

namespace lowdeg::detect {

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::random_direction: return "random_direction";
    case Strategy::evade: return "evade";
    case Strategy::spoof: return "spoof";
  }
  return "none";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "none") return Strategy::none;
  if (s == "random_direction") return Strategy::random_direction;
  if (s == "evade") return Strategy::evade;
  if (s == "spoof") return Strategy::spoof;
  throw InvalidArgument("unknown adversary strategy '" + s + "'");
}

const char* to_string(BudgetKind b) noexcept { return b == BudgetKind::relative ? "relative" : "additive"; }

BudgetKind budget_kind_from_string(const std::string& s) {
  if (s == "relative") return BudgetKind::relative;
  if (s == "additive") return BudgetKind::additive;
  throw InvalidArgument("unknown budget kind '" + s + "'");
}

void NoiseModel::validate() const {
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("NoiseModel: p must lie in [0,1)");
  if (!(budget >= 0.0) || !std::isfinite(budget)) throw InvalidArgument("NoiseModel: budget must be a nonnegative number");
}

namespace {

// Scale z so that norm2(z) <= bound holds as evaluated, not just in exact arithmetic.
void enforce_budget(Vector& z, double bound) {
  if (bound <= 0.0) {
    z.setZero();
    return;
  }
  const double nz = norm2(z.data(), z.size());
  if (nz > bound) z *= bound / nz;
  while (norm2(z.data(), z.size()) > bound) z *= 1.0 - 0x1.0p-50;
}

void check_subspace(const Matrix& s, Eigen::Index n) {
  if (s.rows() != n) throw InvalidArgument("subspace basis has the wrong number of rows");
  if (s.cols() > 0 && (s.transpose() * s - Matrix::Identity(s.cols(), s.cols())).cwiseAbs().maxCoeff() > 1e-8)
    throw InvalidArgument("subspace basis must have orthonormal columns");
}

}  // namespace

dist::SampleBatch apply_noise(const dist::SampleBatch& batch, const NoiseModel& model,
                              const std::optional<Matrix>& subspace, std::uint64_t seed,
                              const dist::ScaleLaw& scale_law) {
  model.validate();
  const auto n = static_cast<Eigen::Index>(batch.cols());
  const auto m = batch.rows();
  if ((model.strategy == Strategy::evade || model.strategy == Strategy::spoof) && !subspace)
    throw InvalidArgument(std::string("strategy ") + to_string(model.strategy) + " needs a subspace");
  if (subspace) check_subspace(*subspace, n);

  dist::SampleBatch out = batch;
  out.seed_record = seed;
  const dist::ScaleMixtureSpec null_spec{static_cast<std::size_t>(n), scale_law};

  Vector evade_direction;
  if (model.strategy == Strategy::evade) {
    Stream rng(seed, stream_id::noise_perturb, std::numeric_limits<std::uint64_t>::max());
    for (;;) {
      Vector w = random_unit_vector(rng, n);
      w -= *subspace * (subspace->transpose() * w);
      const double nw = w.norm();
      if (nw > 1e-6) {
        evade_direction = w / nw;
        break;
      }
    }
  }

  std::size_t planted_seen = 0;
  Vector z(n);
  for (std::size_t r = 0; r < m; ++r) {
    auto row = out.data.row(static_cast<Eigen::Index>(r));
    Stream rerandomize(seed, stream_id::noise_rerandomize, r);
    if (model.p > 0.0 && rerandomize.uniform() < model.p) {
      dist::draw_null_row(null_spec, rerandomize, row.data());
      out.provenance[r] = dist::Provenance::rerandomized;
    }
    if (model.strategy == Strategy::none || model.budget == 0.0) continue;

    const Vector x = row.transpose();
    double bound = model.budget;
    if (model.budget_kind == BudgetKind::relative) {
      bound *= norm2(x.data(), n);
      if (bound == 0.0) continue;
    }
    const bool is_planted = out.provenance[r] == dist::Provenance::planted;
    Stream rng(seed, stream_id::noise_perturb, r);
    switch (model.strategy) {
      case Strategy::none:
        continue;
      case Strategy::random_direction:
        z = bound * random_unit_vector(rng, n);
        break;
      case Strategy::evade:
        if (!is_planted) continue;
        z = (planted_seen++ % 2 == 0 ? bound : -bound) * evade_direction;
        break;
      case Strategy::spoof:
        if (is_planted) continue;
        z = *subspace * (subspace->transpose() * x) - x;
        break;
    }
    enforce_budget(z, bound);
    if (norm2(z.data(), n) == 0.0) continue;
    row += z.transpose();
    out.perturbed[r] = 1;
  }
  return out;
}

namespace {

// Smallest eigenvalue of a symmetric Gram matrix, clamped square root.
double sigma_from_gram(const Matrix& g) {
  double lam;
  if (g.rows() == 1) {
    lam = g(0, 0);
  } else if (g.rows() == 2) {
    const double mid = 0.5 * (g(0, 0) + g(1, 1));
    const double half = 0.5 * (g(0, 0) - g(1, 1));
    lam = mid - std::hypot(half, g(0, 1));
  } else {
    lam = jacobi_eigen(g).values(0);
  }
  return std::sqrt(std::max(lam, 0.0));
}

// Advances `t` to the next k-subset of {0..n-1} in lexicographic order.
bool next_combination(std::vector<std::size_t>& t, std::size_t n) {
  const std::size_t k = t.size();
  for (std::size_t i = k; i-- > 0;) {
    if (t[i] < n - k + i) {
      ++t[i];
      for (std::size_t j = i + 1; j < k; ++j) t[j] = t[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// Scans all (d+1)-subsets of the rows of `a` (already normalized or raw).
DetectionVerdict scan_tuples(const Matrix& a, const std::vector<std::size_t>& labels, int d, double threshold) {
  DetectionVerdict v;
  const auto count = static_cast<std::size_t>(a.rows());
  const auto size = static_cast<std::size_t>(d + 1);
  v.sigma = std::numeric_limits<double>::infinity();
  if (count < size) return v;

  std::vector<double> norms;
  Matrix gram;
  if (size == 1) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Vector row = a.row(i).transpose();
      norms.push_back(norm2(row.data(), row.size()));
    }
  } else {
    gram = a * a.transpose();
  }

  std::vector<std::size_t> t(size);
  for (std::size_t i = 0; i < size; ++i) t[i] = i;
  Matrix sub(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  do {
    ++v.tuples_scanned;
    double sigma;
    if (size == 1) {
      sigma = norms[t[0]];
    } else {
      for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j)
          sub(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              gram(static_cast<Eigen::Index>(t[i]), static_cast<Eigen::Index>(t[j]));
      sigma = sigma_from_gram(sub);
    }
    if (sigma <= threshold) {
      v.planted = true;
      v.sigma = sigma;
      for (auto i : t) v.witness.push_back(labels[i]);
      return v;
    }
    v.sigma = std::min(v.sigma, sigma);
  } while (next_combination(t, count));
  return v;
}

std::int64_t elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double sigma_min_tuple(const Matrix& columns) {
  if (columns.cols() < 1) throw InvalidArgument("sigma_min_tuple: need at least one column");
  if (columns.cols() > columns.rows()) throw InvalidArgument("sigma_min_tuple: more columns than rows");
  if (columns.cols() == 1) return norm2(columns.data(), columns.rows());
  return sigma_from_gram(columns.transpose() * columns);
}

Matrix recover_subspace(const Matrix& columns, int d) {
  if (d < 1) throw InvalidArgument("recover_subspace: d must be at least 1");
  if (columns.cols() <= d) throw InvalidArgument("recover_subspace: need at least d+1 columns");
  const auto eig = jacobi_eigen(columns.transpose() * columns);
  const Eigen::Index c = columns.cols();
  Matrix u(columns.rows(), d);
  for (int j = 0; j < d; ++j) {
    const double lam = eig.values(c - 1 - j);
    if (!(lam > 0.0)) throw NumericError("recover_subspace: rank below d", j);
    u.col(j) = columns * eig.vectors.col(c - 1 - j) / std::sqrt(lam);
  }
  // One Householder pass removes the rounding left by the Gram route.
  Eigen::HouseholderQR<Matrix> qr(u);
  Matrix q = qr.householderQ() * Matrix::Identity(u.rows(), d);
  for (int j = 0; j < d; ++j)
    if (q.col(j).dot(u.col(j)) < 0.0) q.col(j) = -q.col(j);
  return q;
}

std::string to_jsonl(const DetectionVerdict& v) {
  std::ostringstream os;
  char buf[64];
  os << "{\"verdict\":\"" << (v.planted ? "PLANTED" : "NULL") << "\",\"witness\":[";
  for (std::size_t i = 0; i < v.witness.size(); ++i) os << (i ? "," : "") << v.witness[i];
  if (std::isfinite(v.sigma))
    std::snprintf(buf, sizeof buf, "%.17g", v.sigma);
  else
    std::snprintf(buf, sizeof buf, "null");
  os << "],\"sigma\":" << buf << ",\"tuple_count_scanned\":" << v.tuples_scanned
     << ",\"elapsed_ns\":" << v.elapsed_ns << '}';
  return os.str();
}

std::size_t required_samples(int d, double alpha, double p, double C) {
  if (d < 0 || !(alpha > 0.0 && alpha <= 1.0) || !(p >= 0.0 && p < 1.0) || !(C > 0.0))
    throw InvalidArgument("required_samples: need d >= 0, alpha in (0,1], p in [0,1), C > 0");
  return static_cast<std::size_t>(std::ceil(C * (d + 1) / (alpha * (1.0 - p)) - 1e-9));
}

DetectionVerdict detect_relative(const dist::SampleBatch& batch, int d, double threshold, bool want_subspace) {
  const auto start = std::chrono::steady_clock::now();
  if (d < 0) throw InvalidArgument("detect_relative: d must be nonnegative");
  const auto m = batch.rows();
  if (m < static_cast<std::size_t>(d + 1)) throw InvalidArgument("detect_relative: fewer than d+1 samples");
  if (batch.cols() < static_cast<std::size_t>(d + 1)) throw InvalidArgument("detect_relative: d+1 exceeds the dimension");

  Matrix a = batch.data;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vector row = a.row(i).transpose();
    const double norm = norm2(row.data(), row.size());
    if (norm > 0.0) a.row(i) /= norm;
  }
  std::vector<std::size_t> labels(m);
  for (std::size_t i = 0; i < m; ++i) labels[i] = i;
  auto v = scan_tuples(a, labels, d, threshold);
  if (v.planted && want_subspace && d >= 1) {
    Matrix cols(a.cols(), d + 1);
    for (int j = 0; j <= d; ++j) cols.col(j) = a.row(static_cast<Eigen::Index>(v.witness[static_cast<std::size_t>(j)])).transpose();
    try {
      v.subspace = recover_subspace(cols, d);
    } catch (const NumericError&) {
      v.subspace.resize(0, 0);
    }
  }
  v.elapsed_ns = elapsed_since(start);
  return v;
}

std::size_t additive_subsample_size(int d, double alpha, double p, double delta) {
  if (d < 0 || !(alpha > 0.0 && alpha <= 1.0) || !(p >= 0.0 && p < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw InvalidArgument("additive_subsample_size: need d >= 0, alpha in (0,1], p in [0,1), delta in (0,1)");
  return static_cast<std::size_t>(std::ceil(2.0 * std::log(4.0 / delta) * (d + 1) / (alpha * (1.0 - p)) - 1e-9));
}

double additive_threshold(double alpha, double p, double delta, std::size_t n, double c) {
  const double l = std::log(4.0 / delta);
  return alpha * (1.0 - p) * std::sqrt(static_cast<double>(n)) / (c * l * l);
}

double additive_budget(double alpha, double p, double delta, std::size_t n, int d, double C) {
  const double l = std::log(4.0 / delta);
  return alpha * (1.0 - p) * std::sqrt(static_cast<double>(n)) / (C * (d + 1) * l * l);
}

DetectionVerdict detect_additive(const dist::SampleBatch& batch, int d, const AdditiveParams& params,
                                 std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  if (!(params.c_threshold > 0.0)) throw InvalidArgument("detect_additive: c_threshold must be positive");
  if (batch.cols() < static_cast<std::size_t>(d + 1)) throw InvalidArgument("detect_additive: d+1 exceeds the dimension");
  const auto size = additive_subsample_size(d, params.alpha, params.p, params.delta);
  const auto m = batch.rows();
  if (m < size)
    throw InvalidArgument("detect_additive: need at least " + std::to_string(size) + " samples, got " + std::to_string(m));
  const double tau = params.tau ? *params.tau
                                : additive_threshold(params.alpha, params.p, params.delta, batch.cols(), params.c_threshold);

  // Partial Fisher-Yates on a counter-based stream.
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  Stream rng(seed, stream_id::subsample, 0);
  for (std::size_t i = 0; i < size; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(m - i));
    std::swap(order[i], order[std::min(j, m - 1)]);
  }
  std::vector<std::size_t> labels(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
  std::sort(labels.begin(), labels.end());

  Matrix a(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(batch.cols()));
  for (std::size_t i = 0; i < size; ++i) a.row(static_cast<Eigen::Index>(i)) = batch.row(labels[i]);
  auto v = scan_tuples(a, labels, d, tau);
  if (v.planted && d >= 1) {
    Matrix cols(a.cols(), d + 1);
    for (int j = 0; j <= d; ++j) cols.col(j) = batch.row(v.witness[static_cast<std::size_t>(j)]).transpose();
    try {
      v.subspace = recover_subspace(cols, d);
    } catch (const NumericError&) {
      v.subspace.resize(0, 0);
    }
  }
  v.elapsed_ns = elapsed_since(start);
  return v;
}

double incoherence(const dist::SampleBatch& batch) {
  if (batch.rows() < 2) throw InvalidArgument("incoherence: need at least two rows");
  Matrix a = batch.data;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vector row = a.row(i).transpose();
    const double norm = norm2(row.data(), row.size());
    if (norm == 0.0) throw InvalidArgument("incoherence: row " + std::to_string(i) + " is zero");
    a.row(i) /= norm;
  }
  const Matrix g = a * a.transpose();
  double best = 0.0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i + 1; j < g.cols(); ++j) best = std::max(best, std::abs(g(i, j)));
  return best;
}

}  // namespace lowdeg::detect
