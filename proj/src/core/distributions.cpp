#include "lowdeg/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "lowdeg/error.hpp"

namespace lowdeg::dist {

double gaussian_moment(int ell) {
  if (ell < 0) throw InvalidArgument("gaussian_moment: negative order");
  if (ell % 2 != 0) return 0.0;
  if (ell <= 30) {
    std::uint64_t acc = 1;
    for (int j = ell - 1; j > 1; j -= 2) acc *= static_cast<std::uint64_t>(j);
    return static_cast<double>(acc);
  }
  double acc = 1.0;
  for (int j = ell - 1; j > 1; j -= 2) acc *= j;
  return acc;
}

double q_mixed_moment(int l1, int l2) {
  if (l1 < 0 || l2 < 0) throw InvalidArgument("q_mixed_moment: negative exponent");
  if (l1 % 2 != 0 || l2 % 2 != 0) return 0.0;
  return gaussian_moment(l1) * gaussian_moment(l2) * gaussian_moment(l1 + l2);
}

ScaleLaw ScaleLaw::standard_normal() {
  ScaleLaw law;
  law.name_ = "normal";
  return law;
}

ScaleLaw ScaleLaw::heavy_two_scale() {
  ScaleLaw law;
  law.name_ = "heavy_two_scale";
  law.abs_values_ = {0.5, std::sqrt(7.75)};
  law.probabilities_ = {0.9, 0.1};
  return law;
}

ScaleLaw ScaleLaw::from_name(const std::string& name) {
  if (name == "normal") return standard_normal();
  if (name == "heavy_two_scale") return heavy_two_scale();
  throw InvalidArgument("unknown scale law '" + name + "' (expected normal or heavy_two_scale)");
}

double ScaleLaw::moment(int ell) const {
  if (ell < 0) throw InvalidArgument("ScaleLaw::moment: negative order");
  if (abs_values_.empty()) return gaussian_moment(ell);
  if (ell % 2 != 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < abs_values_.size(); ++i)
    acc += probabilities_[i] * std::pow(abs_values_[i], ell);
  return acc;
}

double ScaleLaw::sample(Stream& rng) const {
  if (abs_values_.empty()) {
    std::normal_distribution<double> normal;
    return normal(rng);
  }
  double u = rng.uniform();
  std::size_t i = 0;
  while (i + 1 < probabilities_.size() && u >= probabilities_[i]) u -= probabilities_[i++];
  return (rng() & 1U) ? abs_values_[i] : -abs_values_[i];
}

double radial_moment(const ScaleLaw& law, int ell) {
  return law.moment(ell) * gaussian_moment(ell);
}

PlantedSpec PlantedSpec::point_mass(std::size_t n, double alpha) {
  PlantedSpec spec;
  spec.variant = PlantedVariant::point_mass;
  spec.n = n;
  spec.alpha = alpha;
  return spec;
}

PlantedSpec PlantedSpec::on_subspace(Matrix basis, double alpha) {
  PlantedSpec spec;
  spec.variant = PlantedVariant::subspace;
  spec.n = static_cast<std::size_t>(basis.rows());
  spec.alpha = alpha;
  spec.subspace_basis = std::move(basis);
  return spec;
}

void PlantedSpec::validate() const {
  if (n < 1) throw InvalidArgument("PlantedSpec: dimension must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("PlantedSpec: alpha must lie in [0,1]");
  if (variant == PlantedVariant::general) {
    if (mu1.size() == 0 || mu1.dim() != 1) throw InvalidArgument("PlantedSpec: mu1 must be a measure on R");
    if (mu2.size() == 0 || mu2.dim() != 2) throw InvalidArgument("PlantedSpec: mu2 must be a measure on R^2");
    if (signal_direction) {
      if (static_cast<std::size_t>(signal_direction->size()) != n)
        throw InvalidArgument("PlantedSpec: signal direction has wrong length");
      if (std::abs(signal_direction->norm() - 1.0) > 1e-12)
        throw InvalidArgument("PlantedSpec: signal direction must be a unit vector");
    }
  }
  if (variant == PlantedVariant::subspace) {
    const auto& b = subspace_basis;
    if (static_cast<std::size_t>(b.rows()) != n || b.cols() < 1 || b.cols() > b.rows())
      throw InvalidArgument("PlantedSpec: subspace basis must be n x d with 1 <= d <= n");
    const Matrix gram = b.transpose() * b;
    if ((gram - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw InvalidArgument("PlantedSpec: subspace basis columns must be orthonormal");
  }
}

const char* to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::null: return "null";
    case Provenance::planted: return "planted";
    case Provenance::rerandomized: return "rerandomized";
  }
  return "null";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "null") return Provenance::null;
  if (s == "planted") return Provenance::planted;
  if (s == "rerandomized") return Provenance::rerandomized;
  throw IoError("unknown provenance tag '" + s + "'");
}

void draw_null_row(const ScaleMixtureSpec& spec, Stream& rng, double* out) {
  const double lambda = spec.scale_law.sample(rng);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < spec.n; ++i) out[i] = lambda * normal(rng);
}

namespace {

SampleBatch empty_batch(std::size_t m, std::size_t n, std::uint64_t seed) {
  SampleBatch batch;
  batch.data = RowMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  batch.provenance.assign(m, Provenance::null);
  batch.perturbed.assign(m, 0);
  batch.seed_record = seed;
  return batch;
}

// x <- H x where H is the Householder reflection swapping e_n and v.
void reflect_onto(const Vector& v, double* x, std::size_t n) {
  Vector w = -v;
  w(static_cast<Eigen::Index>(n - 1)) += 1.0;
  const double ww = w.squaredNorm();
  if (ww < 1e-30) return;
  double wx = 0.0;
  for (std::size_t i = 0; i < n; ++i) wx += w(static_cast<Eigen::Index>(i)) * x[i];
  const double f = 2.0 * wx / ww;
  for (std::size_t i = 0; i < n; ++i) x[i] -= f * w(static_cast<Eigen::Index>(i));
}

}  // namespace

SampleBatch sample_null(const ScaleMixtureSpec& spec, std::size_t m, std::uint64_t seed) {
  if (spec.n < 1) throw InvalidArgument("sample_null: dimension must be at least 1");
  SampleBatch batch = empty_batch(m, spec.n, seed);
  for (std::size_t r = 0; r < m; ++r) {
    Stream rng(seed, stream_id::null_rows, r);
    draw_null_row(spec, rng, batch.data.row(static_cast<Eigen::Index>(r)).data());
  }
  return batch;
}

SampleBatch sample_planted(const PlantedSpec& spec, std::size_t m, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n;
  SampleBatch batch = empty_batch(m, n, seed);
  const ScaleMixtureSpec null_spec{n, spec.scale_law};

  for (std::size_t r = 0; r < m; ++r) {
    Stream rng(seed, stream_id::planted_rows, r);
    std::normal_distribution<double> normal;
    double* x = batch.data.row(static_cast<Eigen::Index>(r)).data();
    const bool planted = rng.uniform() < spec.alpha;
    if (planted) batch.provenance[r] = Provenance::planted;

    switch (spec.variant) {
      case PlantedVariant::point_mass:
        if (!planted) draw_null_row(null_spec, rng, x);
        break;
      case PlantedVariant::subspace:
        if (planted) {
          const double lambda = spec.scale_law.sample(rng);
          const Eigen::Index d = spec.subspace_basis.cols();
          Vector coeff(d);
          for (Eigen::Index j = 0; j < d; ++j) coeff(j) = lambda * normal(rng);
          Eigen::Map<Vector>(x, static_cast<Eigen::Index>(n)) = spec.subspace_basis * coeff;
        } else {
          draw_null_row(null_spec, rng, x);
        }
        break;
      case PlantedVariant::general:
        if (planted) {
          x[n - 1] = spec.mu1.point(spec.mu1.draw(rng.uniform()))(0);
        } else {
          const auto atom = spec.mu2.point(spec.mu2.draw(rng.uniform()));
          const double lambda = atom(0);
          for (std::size_t i = 0; i + 1 < n; ++i) x[i] = lambda * normal(rng);
          x[n - 1] = atom(1);
        }
        if (spec.signal_direction) reflect_onto(*spec.signal_direction, x, n);
        break;
    }
  }
  return batch;
}

Estimate small_ball_estimate(double gamma, std::size_t n, std::size_t trials, std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma < 0.5)) throw InvalidArgument("small_ball_estimate: gamma must lie in (0, 1/2)");
  if (n < 1) throw InvalidArgument("small_ball_estimate: dimension must be at least 1");
  if (trials < 10000) throw InvalidArgument("small_ball_estimate: at least 10^4 trials required");
  const ScaleMixtureSpec spec{n, ScaleLaw::standard_normal()};
  const double radius = gamma * std::sqrt(static_cast<double>(n));
  std::vector<double> row(n);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Stream rng(seed, stream_id::small_ball, t);
    draw_null_row(spec, rng, row.data());
    if (norm2(row.data(), static_cast<Eigen::Index>(n)) <= radius) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials))};
}

void write_batch_csv(std::ostream& os, const SampleBatch& batch) {
  for (std::size_t c = 0; c < batch.cols(); ++c) os << 'x' << (c + 1) << ',';
  os << "provenance,perturbed\n";
  char buf[64];
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    for (std::size_t c = 0; c < batch.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g",
                    batch.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      os << buf << ',';
    }
    os << to_string(batch.provenance[r]) << ',' << static_cast<int>(batch.perturbed[r]) << '\n';
  }
}

SampleBatch read_batch_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("batch CSV: missing header");
  const auto fields = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + 1);
  if (fields < 3 || line.rfind(",provenance,perturbed") == std::string::npos)
    throw IoError("batch CSV: header must be x1,...,xn,provenance,perturbed");
  const std::size_t n = fields - 2;

  std::vector<std::vector<double>> rows;
  std::vector<Provenance> prov;
  std::vector<std::uint8_t> perturbed;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != fields) throw IoError("batch CSV: ragged row");
    std::vector<double> values(n);
    for (std::size_t c = 0; c < n; ++c) {
      values[c] = std::stod(cells[c]);
      if (!std::isfinite(values[c])) throw IoError("batch CSV: non-finite entry");
    }
    rows.push_back(std::move(values));
    prov.push_back(provenance_from_string(cells[n]));
    perturbed.push_back(cells[n + 1] == "1" ? 1 : 0);
  }
  SampleBatch batch = empty_batch(rows.size(), n, 0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < n; ++c)
      batch.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  batch.provenance = std::move(prov);
  batch.perturbed = std::move(perturbed);
  return batch;
}

}  // namespace lowdeg::dist
