#include "lowdeg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lowdeg {

SymmetricEigen jacobi_eigen(const Matrix& symmetric, double tol, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  Matrix a = symmetric;
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off <= tol * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });

  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    out.vectors.col(i) = v.col(src);
  }
  return out;
}

Vector random_unit_vector(Stream& rng, Eigen::Index dim) {
  std::normal_distribution<double> normal;
  Vector u(dim);
  double nrm = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) u(i) = normal(rng);
    nrm = u.norm();
  } while (nrm == 0.0);
  return u / nrm;
}

Matrix random_orthonormal_basis(Stream& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> normal;
  Matrix g(n, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, d);
  return q;
}

double largest_principal_angle(const Matrix& basis_a, const Matrix& basis_b) {
  // sin of the largest angle is the spectral norm of the part of B outside span(A);
  // asin is accurate for small angles where acos of the cosine is not.
  const Matrix residual = basis_b - basis_a * (basis_a.transpose() * basis_b);
  Eigen::JacobiSVD<Matrix> svd(residual);
  const double sine = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (sine < 0.7) return std::asin(sine);
  Eigen::JacobiSVD<Matrix> cos_svd(basis_a.transpose() * basis_b);
  const auto& c = cos_svd.singularValues();
  const double cosine = c.size() ? std::clamp(c(c.size() - 1), 0.0, 1.0) : 0.0;
  return std::acos(cosine);
}

double norm2(const double* x, Eigen::Index n) noexcept {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += x[i] * x[i];
  return std::sqrt(acc);
}

}  // namespace lowdeg
