#include "lowdeg/orthopoly.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "lowdeg/error.hpp"

namespace lowdeg::ortho {

int Polynomial::degree() const noexcept {
  for (int j = static_cast<int>(coeffs.size()) - 1; j >= 0; --j)
    if (coeffs[static_cast<std::size_t>(j)] != 0.0) return j;
  return 0;
}

double Polynomial::operator()(double x) const noexcept {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  if (coeffs.empty() || other.coeffs.empty()) return {};
  Polynomial out{std::vector<double>(coeffs.size() + other.coeffs.size() - 1, 0.0)};
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    for (std::size_t j = 0; j < other.coeffs.size(); ++j) out.coeffs[i + j] += coeffs[i] * other.coeffs[j];
  return out;
}

Polynomial hermite_normalized(int m) {
  if (m < 0 || m > kMaxDegree)
    throw InvalidArgument("hermite_normalized: degree must lie in [0, " + std::to_string(kMaxDegree) + "]");
  std::vector<double> prev(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<double> cur(static_cast<std::size_t>(m) + 1, 0.0);
  cur[0] = 1.0;
  for (int j = 0; j < m; ++j) {
    std::vector<double> next(cur.size(), 0.0);
    const double a = 1.0 / std::sqrt(static_cast<double>(j + 1));
    const double b = std::sqrt(static_cast<double>(j)) * a;
    for (std::size_t e = 0; e + 1 < cur.size(); ++e) next[e + 1] += a * cur[e];
    for (std::size_t e = 0; e < cur.size(); ++e) next[e] -= b * prev[e];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return Polynomial{std::move(cur)};
}

double diagonal_coeff_sq(int i) {
  if (i < 0 || i > kMaxDegree) throw InvalidArgument("diagonal_coeff_sq: degree out of range");
  if (i % 2 != 0) throw InvalidArgument("diagonal_coeff_sq: degree must be even");
  // i!/(2^i ((i/2)!)^2) = prod_{j=1}^{i/2} (2j-1)/(2j)
  double acc = 1.0;
  for (int j = 1; j <= i / 2; ++j) acc *= static_cast<double>(2 * j - 1) / static_cast<double>(2 * j);
  return acc;
}

MomentOracle standard_normal_oracle() {
  return {"normal", [](int ell) { return dist::gaussian_moment(ell); }};
}

MomentOracle radial_oracle(const dist::ScaleLaw& law) {
  return {"radial:" + law.name(), [law](int ell) { return dist::radial_moment(law, ell); }};
}

MomentOracle discrete_oracle(const DiscreteMeasure& measure) {
  if (measure.dim() != 1) throw InvalidArgument("discrete_oracle: measure must live on R");
  return {"discrete", [measure](int ell) { return measure.moment({ell}); }};
}

Polynomial OrthonormalBasis::polynomial(int j) const {
  Polynomial p;
  p.coeffs.resize(static_cast<std::size_t>(j) + 1);
  for (int e = 0; e <= j; ++e) p.coeffs[static_cast<std::size_t>(e)] = transform(j, e);
  return p;
}

double OrthonormalBasis::evaluate(int j, double x) const {
  double acc = 0.0;
  for (int e = j; e >= 0; --e) acc = acc * x + transform(j, e);
  return acc;
}

OrthonormalBasis build_basis(const MomentOracle& oracle, int k) {
  if (k < 0 || k > kMaxDegree)
    throw InvalidArgument("build_basis: degree must lie in [0, " + std::to_string(kMaxDegree) + "]");
  const Eigen::Index n = k + 1;

  std::vector<double> moments(static_cast<std::size_t>(2 * k + 1));
  for (int l = 0; l <= 2 * k; ++l) {
    moments[static_cast<std::size_t>(l)] = oracle.moment(l);
    if (!std::isfinite(moments[static_cast<std::size_t>(l)]))
      throw NumericError("build_basis: non-finite moment of order " + std::to_string(l), l);
  }

  Vector scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = moments[static_cast<std::size_t>(2 * i)];
    if (!(h > 0.0))
      throw NumericError("build_basis: Hankel matrix not positive definite at pivot " + std::to_string(i),
                         static_cast<int>(i));
    scale(i) = 1.0 / std::sqrt(h);
  }

  // Equilibrated Hankel matrix and its Cholesky factor, accumulated in long double.
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> hs(n, n), l(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      hs(i, j) = static_cast<long double>(moments[static_cast<std::size_t>(i + j)]) * scale(i) * scale(j);
  l.setZero();
  for (Eigen::Index j = 0; j < n; ++j) {
    long double d = hs(j, j);
    for (Eigen::Index p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > kPivotTolerance))
      throw NumericError("build_basis: Hankel matrix not positive definite at pivot " + std::to_string(j),
                         static_cast<int>(j));
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      long double s = hs(i, j);
      for (Eigen::Index p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / l(j, j);
    }
  }

  // Rows of L^{-1} are the orthonormal polynomials in the scaled monomials x^e * scale(e).
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> linv =
      Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>::Identity(n, n);
  l.triangularView<Eigen::Lower>().solveInPlace(linv);

  OrthonormalBasis basis;
  basis.max_degree = k;
  basis.moment_source = oracle.name;
  basis.transform = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      basis.transform(i, j) = static_cast<double>(linv(i, j)) * scale(j);

  const auto gram = (linv * hs * linv.transpose()).eval();
  long double worst = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const long double target = (i == j) ? 1.0L : 0.0L;
      worst = std::max(worst, std::abs(gram(i, j) - target));
    }
  basis.gram_error = static_cast<double>(worst);
  if (basis.gram_error > 1e-9)
    throw NumericError("build_basis: orthonormality lost (Gram error " + std::to_string(basis.gram_error) + ")");
  return basis;
}

double christoffel_sum(const OrthonormalBasis& basis, double x0) {
  double acc = 0.0;
  for (int j = 0; j <= basis.max_degree; ++j) {
    const double p = basis.evaluate(j, x0);
    acc += p * p;
  }
  return acc;
}

void write_basis_csv(std::ostream& os, const OrthonormalBasis& basis) {
  os << "row";
  for (int e = 0; e <= basis.max_degree; ++e) os << ",c" << e;
  os << '\n';
  char buf[64];
  for (int j = 0; j <= basis.max_degree; ++j) {
    os << j;
    for (int e = 0; e <= basis.max_degree; ++e) {
      std::snprintf(buf, sizeof buf, "%.17g", basis.transform(j, e));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace lowdeg::ortho
