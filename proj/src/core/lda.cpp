#include "lowdeg/lda.hpp"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "lowdeg/error.hpp"
#include "lowdeg/orthopoly.hpp"

namespace lowdeg::lda {

const char* to_string(AdvantageKind kind) noexcept {
  switch (kind) {
    case AdvantageKind::exact: return "exact";
    case AdvantageKind::upper_bound: return "upper_bound";
    case AdvantageKind::monte_carlo_lower: return "monte_carlo_lower";
  }
  return "exact";
}

std::string to_jsonl(const AdvantageReport& report) {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", report.value);
  os << "{\"k\":" << report.k << ",\"m\":" << report.m << ",\"kind\":\"" << to_string(report.kind)
     << "\",\"value\":" << buf << ",\"components\":[";
  for (std::size_t i = 0; i < report.components.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", report.components[i]);
    os << (i ? "," : "") << buf;
  }
  os << "]}";
  return os.str();
}

AdvantageReport lda_single_pointmass(const dist::ScaleLaw& scale_law, double alpha, int k) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("lda_single_pointmass: alpha must lie in [0,1]");
  if (k < 0) throw InvalidArgument("lda_single_pointmass: negative degree");
  const auto basis = ortho::build_basis(ortho::radial_oracle(scale_law), k);

  AdvantageReport report;
  report.k = k;
  report.m = 1;
  report.kind = AdvantageKind::exact;
  double total = 0.0;
  for (int j = 1; j <= k; ++j) {
    const double mu = alpha * basis.evaluate(j, 0.0);
    report.components.push_back(mu * mu);
    total += mu * mu;
  }
  report.value = std::sqrt(total);
  return report;
}

double lift_bound(double delta, int m) {
  if (!(delta >= 0.0)) throw InvalidArgument("lift_bound: delta must be nonnegative");
  if (m < 1) throw InvalidArgument("lift_bound: m must be at least 1");
  return std::sqrt(std::expm1(m * std::log1p(delta * delta)));
}

double theorem_bound(double alpha, int k, int m, double C) {
  if (alpha < 0.0 || k < 0 || m < 0 || C < 0.0) throw InvalidArgument("theorem_bound: arguments must be nonnegative");
  return std::sqrt(std::expm1(m * std::log1p(C * C * alpha * alpha * k)));
}

double mean_var_ratio_max(int k) {
  if (k < 0 || k > 30) throw InvalidArgument("mean_var_ratio_max: degree must lie in [0, 30]");
  double total = 0.0;
  for (int i1 = 0; i1 <= k; i1 += 2)
    for (int i2 = 0; i1 + i2 <= k; i2 += 2) {
      if (i1 == 0 && i2 == 0) continue;
      total += ortho::diagonal_coeff_sq(i1) * ortho::diagonal_coeff_sq(i2);
    }
  return std::sqrt(total);
}

double mean_var_ratio_stirling_bound(int k) {
  const double r = 2.0 * k / std::numbers::pi;
  return std::sqrt(r + 2.0 * std::sqrt(r));
}

std::size_t monomial_count(std::size_t variables, int k) {
  // C(variables + k, k), saturating well above any guard.
  double acc = 1.0;
  for (int j = 1; j <= k; ++j) {
    acc = acc * static_cast<double>(variables + static_cast<std::size_t>(j)) / j;
    if (acc > 1e15) return static_cast<std::size_t>(1e15);
  }
  return static_cast<std::size_t>(std::llround(acc));
}

namespace {

using Exponents = std::vector<int>;

// All exponent vectors of length `vars` with total degree in [1, k], graded order.
std::vector<Exponents> enumerate_monomials(std::size_t vars, int k) {
  std::vector<Exponents> out;
  Exponents cur(vars, 0);
  for (int degree = 1; degree <= k; ++degree) {
    // compositions of `degree` into `vars` parts, lexicographically decreasing in the first slot
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
      if (pos + 1 == vars) {
        cur[pos] = left;
        out.push_back(cur);
        return;
      }
      for (int e = left; e >= 0; --e) {
        cur[pos] = e;
        rec(pos + 1, left - e);
      }
    };
    rec(0, degree);
  }
  return out;
}

// Single-sample moments with memoisation.
class MomentTable {
 public:
  explicit MomentTable(const DiscreteMeasure& measure) : measure_(measure) {}
  double operator()(const Exponents& e) {
    if (std::all_of(e.begin(), e.end(), [](int x) { return x == 0; })) return 1.0;
    auto it = cache_.find(e);
    if (it != cache_.end()) return it->second;
    const double v = measure_.moment(e);
    cache_.emplace(e, v);
    return v;
  }

 private:
  const DiscreteMeasure& measure_;
  std::map<Exponents, double> cache_;
};

// E over the m-fold product of the monomial with exponent vector `e` of length m*n.
double product_moment(MomentTable& table, const Exponents& e, std::size_t n, int m) {
  double acc = 1.0;
  Exponents block(n);
  for (int s = 0; s < m; ++s) {
    std::copy(e.begin() + static_cast<std::ptrdiff_t>(s * n), e.begin() + static_cast<std::ptrdiff_t>((s + 1) * n),
              block.begin());
    acc *= table(block);
    if (acc == 0.0) break;
  }
  return acc;
}

}  // namespace

AdvantageReport lda_bruteforce(const DiscreteMeasure& p, const DiscreteMeasure& q, int k, int m,
                               const BruteForceOptions& options) {
  if (p.dim() != q.dim()) throw InvalidArgument("lda_bruteforce: P and Q live in different dimensions");
  if (k < 0 || m < 1) throw InvalidArgument("lda_bruteforce: need k >= 0 and m >= 1");
  const auto n = static_cast<std::size_t>(q.dim());
  const std::size_t vars = n * static_cast<std::size_t>(m);
  if (monomial_count(vars, k) > options.max_monomials)
    throw InvalidArgument("lda_bruteforce: " + std::to_string(monomial_count(vars, k)) +
                          " monomials exceed the guard of " + std::to_string(options.max_monomials));

  AdvantageReport report;
  report.k = k;
  report.m = m;
  report.kind = AdvantageKind::exact;
  if (k == 0) return report;

  const auto monomials = enumerate_monomials(vars, k);
  const auto count = static_cast<Eigen::Index>(monomials.size());
  MomentTable p_table(p), q_table(q);

  Vector mean_q(count), diff(count);
  for (Eigen::Index a = 0; a < count; ++a) {
    const auto& e = monomials[static_cast<std::size_t>(a)];
    mean_q(a) = product_moment(q_table, e, n, m);
    diff(a) = product_moment(p_table, e, n, m) - mean_q(a);
  }

  Matrix gram(count, count);
  Exponents sum(vars);
  for (Eigen::Index a = 0; a < count; ++a) {
    for (Eigen::Index b = a; b < count; ++b) {
      const auto& ea = monomials[static_cast<std::size_t>(a)];
      const auto& eb = monomials[static_cast<std::size_t>(b)];
      for (std::size_t v = 0; v < vars; ++v) sum[v] = ea[v] + eb[v];
      const double cov = product_moment(q_table, sum, n, m) - mean_q(a) * mean_q(b);
      gram(a, b) = cov;
      gram(b, a) = cov;
    }
  }

  // Equilibrate, then invert on the nondegenerate eigenspace.
  Vector scale(count);
  for (Eigen::Index a = 0; a < count; ++a) {
    const double g = gram(a, a);
    scale(a) = g > 0.0 ? 1.0 / std::sqrt(g) : 0.0;
  }
  const Matrix scaled = scale.asDiagonal() * gram * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(scaled);
  if (eig.info() != Eigen::Success) throw NumericError("lda_bruteforce: eigendecomposition failed");
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0)) throw NumericError("lda_bruteforce: Q-covariance is fully degenerate");

  const Vector projected = eig.eigenvectors().transpose() * scale.asDiagonal() * diff;
  double total = 0.0;
  for (Eigen::Index i = count - 1; i >= 0; --i) {
    const double lam = eig.eigenvalues()(i);
    if (lam <= options.pivot_tolerance * top) continue;
    const double c = projected(i) * projected(i) / lam;
    report.components.push_back(c);
    total += c;
  }
  report.value = std::sqrt(total);
  return report;
}

}  // namespace lowdeg::lda
