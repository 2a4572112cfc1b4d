#include "lowdeg/lowdeg.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "lowdeg/detect.hpp"
#include "lowdeg/distributions.hpp"
#include "lowdeg/error.hpp"
#include "lowdeg/harness.hpp"
#include "lowdeg/lda.hpp"
#include "lowdeg/momentmatch.hpp"
#include "lowdeg/orthopoly.hpp"

using namespace lowdeg;

struct ldg_batch {
  dist::SampleBatch batch;
};
struct ldg_measure {
  DiscreteMeasure measure;
};
struct ldg_planted {
  dist::PlantedSpec spec;
};
struct ldg_verdict {
  detect::DetectionVerdict verdict;
  std::string json;
};
struct ldg_string {
  std::string text;
};

namespace {

thread_local std::string last_error;

ldg_status code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return LDG_ERR_INVALID_ARGUMENT;
    case ErrorKind::config: return LDG_ERR_CONFIG;
    case ErrorKind::infeasible: return LDG_ERR_INFEASIBLE;
    case ErrorKind::numeric: return LDG_ERR_NUMERIC;
    case ErrorKind::io: return LDG_ERR_IO;
  }
  return LDG_ERR_INTERNAL;
}

template <typename F>
ldg_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return LDG_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return code_for(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return LDG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return LDG_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return LDG_ERR_INTERNAL;
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw InvalidArgument(message);
}

DiscreteMeasure make_mu1(ldg_mu1 mu1) {
  if (mu1.kind == 0) return DiscreteMeasure::point_mass_1d(0.0);
  if (mu1.kind == 1) return DiscreteMeasure::symmetric_two_point(mu1.t);
  throw InvalidArgument("mu1.kind must be 0 (point mass) or 1 (two point)");
}

Matrix make_grid(const ldg_grid_spec* grid) {
  mm::GridSpec spec;
  if (grid) {
    spec.lambda_count = grid->lambda_count;
    spec.lambda_radius = grid->lambda_radius;
    spec.z_count = grid->z_count;
    spec.z_radius = grid->z_radius;
  }
  return mm::default_grid(spec);
}

ortho::MomentOracle make_oracle(const char* name) {
  require(name != nullptr, "oracle name is NULL");
  const std::string s(name);
  if (s == "normal") return ortho::standard_normal_oracle();
  if (s == "product_normal") return ortho::product_normal_oracle();
  if (s == "heavy_two_scale") return ortho::radial_oracle(dist::ScaleLaw::heavy_two_scale());
  throw InvalidArgument("unknown moment oracle '" + s + "'");
}

DiscreteMeasure make_measure(size_t n, const double* points, const double* weights, size_t size) {
  require(points && weights && size > 0 && n > 0, "measure arrays must be non-empty");
  Matrix pts(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < size; ++i)
    for (size_t j = 0; j < n; ++j) pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = points[i * n + j];
  return {pts, std::vector<double>(weights, weights + size)};
}

ldg_string* make_string(std::string s) { return new ldg_string{std::move(s)}; }

}  // namespace

extern "C" {

const char* ldg_version(void) { return "0.1.0"; }
const char* ldg_last_error(void) { return last_error.c_str(); }

const char* ldg_status_string(ldg_status status) {
  switch (status) {
    case LDG_OK: return "ok";
    case LDG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LDG_ERR_CONFIG: return "configuration error";
    case LDG_ERR_INFEASIBLE: return "infeasible";
    case LDG_ERR_NUMERIC: return "numerical failure";
    case LDG_ERR_IO: return "i/o error";
    case LDG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ldg_string_data(const ldg_string* s) { return s ? s->text.c_str() : ""; }
void ldg_string_free(ldg_string* s) { delete s; }

ldg_status ldg_sample_null(size_t n, size_t m, uint64_t seed, ldg_batch** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = new ldg_batch{dist::sample_null({n}, m, seed)};
  });
}

ldg_status ldg_sample_planted_pointmass(size_t n, double alpha, size_t m, uint64_t seed, ldg_batch** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = new ldg_batch{dist::sample_planted(dist::PlantedSpec::point_mass(n, alpha), m, seed)};
  });
}

ldg_status ldg_sample_planted_subspace(const double* basis, size_t n, size_t d, double alpha, size_t m, uint64_t seed,
                                       ldg_batch** out) {
  return guarded([&] {
    require(out != nullptr && basis != nullptr, "NULL argument");
    const Matrix b = Eigen::Map<const Matrix>(basis, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    *out = new ldg_batch{dist::sample_planted(dist::PlantedSpec::on_subspace(b, alpha), m, seed)};
  });
}

ldg_status ldg_random_subspace(size_t n, size_t d, uint64_t seed, double* basis_out) {
  return guarded([&] {
    require(basis_out != nullptr, "basis_out is NULL");
    require(d <= n, "d exceeds n");
    Stream rng(seed, stream_id::subspace, 0);
    const Matrix b = random_orthonormal_basis(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Eigen::Map<Matrix>(basis_out, b.rows(), b.cols()) = b;
  });
}

ldg_status ldg_batch_read_csv(const char* path, ldg_batch** out) {
  return guarded([&] {
    require(path && out, "NULL argument");
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open '") + path + "'");
    *out = new ldg_batch{dist::read_batch_csv(in)};
  });
}

ldg_status ldg_batch_write_csv(const ldg_batch* batch, const char* path) {
  return guarded([&] {
    require(batch && path, "NULL argument");
    if (std::string(path).empty()) {
      dist::write_batch_csv(std::cout, batch->batch);
      std::cout.flush();
      return;
    }
    std::ofstream os(path);
    if (!os) throw IoError(std::string("cannot write '") + path + "'");
    dist::write_batch_csv(os, batch->batch);
    if (!os) throw IoError(std::string("write failed for '") + path + "'");
  });
}

size_t ldg_batch_rows(const ldg_batch* batch) { return batch ? batch->batch.rows() : 0; }
size_t ldg_batch_cols(const ldg_batch* batch) { return batch ? batch->batch.cols() : 0; }
const double* ldg_batch_data(const ldg_batch* batch) { return batch ? batch->batch.data.data() : nullptr; }

ldg_provenance ldg_batch_provenance(const ldg_batch* batch, size_t row) {
  if (!batch || row >= batch->batch.rows()) return LDG_PROVENANCE_NULL;
  return static_cast<ldg_provenance>(batch->batch.provenance[row]);
}

void ldg_batch_free(ldg_batch* batch) { delete batch; }

ldg_status ldg_apply_noise(const ldg_batch* batch, double p, ldg_budget_kind kind, double budget, ldg_strategy strategy,
                           const double* subspace, size_t d, uint64_t seed, ldg_batch** out) {
  return guarded([&] {
    require(batch && out, "NULL argument");
    require(kind == LDG_BUDGET_RELATIVE || kind == LDG_BUDGET_ADDITIVE, "unknown budget kind");
    require(strategy >= LDG_STRATEGY_NONE && strategy <= LDG_STRATEGY_SPOOF, "unknown strategy");
    std::optional<Matrix> basis;
    // With d = 0 the subspace is {0} and needs no storage.
    if (subspace || (d == 0 && (strategy == LDG_STRATEGY_EVADE || strategy == LDG_STRATEGY_SPOOF)))
      basis = Matrix(Eigen::Map<const Matrix>(subspace, static_cast<Eigen::Index>(batch->batch.cols()),
                                              static_cast<Eigen::Index>(d)));
    detect::NoiseModel model{p, kind == LDG_BUDGET_RELATIVE ? detect::BudgetKind::relative : detect::BudgetKind::additive,
                             budget, static_cast<detect::Strategy>(strategy)};
    *out = new ldg_batch{detect::apply_noise(batch->batch, model, basis, seed)};
  });
}

ldg_status ldg_detect_relative(const ldg_batch* batch, int d, double threshold, ldg_verdict** out) {
  return guarded([&] {
    require(batch && out, "NULL argument");
    auto v = detect::detect_relative(batch->batch, d, threshold);
    *out = new ldg_verdict{v, detect::to_jsonl(v)};
  });
}

ldg_status ldg_detect_additive(const ldg_batch* batch, int d, double alpha, double p, double delta, double tau,
                               double c_threshold, uint64_t seed, ldg_verdict** out) {
  return guarded([&] {
    require(batch && out, "NULL argument");
    detect::AdditiveParams params;
    params.alpha = alpha;
    params.p = p;
    params.delta = delta;
    params.c_threshold = c_threshold;
    if (!std::isnan(tau)) params.tau = tau;
    auto v = detect::detect_additive(batch->batch, d, params, seed);
    *out = new ldg_verdict{v, detect::to_jsonl(v)};
  });
}

int ldg_verdict_planted(const ldg_verdict* v) { return v && v->verdict.planted ? 1 : 0; }
double ldg_verdict_sigma(const ldg_verdict* v) { return v ? v->verdict.sigma : NAN; }
size_t ldg_verdict_witness_size(const ldg_verdict* v) { return v ? v->verdict.witness.size() : 0; }
size_t ldg_verdict_witness(const ldg_verdict* v, size_t i) {
  return v && i < v->verdict.witness.size() ? v->verdict.witness[i] : 0;
}
size_t ldg_verdict_tuples_scanned(const ldg_verdict* v) { return v ? v->verdict.tuples_scanned : 0; }
const char* ldg_verdict_json(const ldg_verdict* v) { return v ? v->json.c_str() : ""; }
void ldg_verdict_free(ldg_verdict* v) { delete v; }

ldg_status ldg_incoherence(const ldg_batch* batch, double* out) {
  return guarded([&] {
    require(batch && out, "NULL argument");
    *out = detect::incoherence(batch->batch);
  });
}

ldg_status ldg_sigma_min_tuple(const double* columns, size_t n, size_t cols, double* out) {
  return guarded([&] {
    require(columns && out, "NULL argument");
    *out = detect::sigma_min_tuple(Eigen::Map<const Matrix>(columns, static_cast<Eigen::Index>(n),
                                                            static_cast<Eigen::Index>(cols)));
  });
}

ldg_status ldg_additive_budget(double alpha, double p, double delta, size_t n, int d, double C, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    require(alpha > 0.0 && p >= 0.0 && p < 1.0 && delta > 0.0 && delta < 1.0 && d >= 0 && C > 0.0,
            "need alpha > 0, p in [0,1), delta in (0,1), d >= 0, C > 0");
    *out = detect::additive_budget(alpha, p, delta, n, d, C);
  });
}

ldg_status ldg_lda_single_pointmass(const char* scale_law, double alpha, int k, ldg_string** report_json) {
  return guarded([&] {
    require(scale_law && report_json, "NULL argument");
    const auto report = lda::lda_single_pointmass(dist::ScaleLaw::from_name(scale_law), alpha, k);
    *report_json = make_string(lda::to_jsonl(report));
  });
}

ldg_status ldg_lift_bound(double delta, int m, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = lda::lift_bound(delta, m);
  });
}

ldg_status ldg_theorem_bound(double alpha, int k, int m, double C, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = lda::theorem_bound(alpha, k, m, C);
  });
}

ldg_status ldg_mean_var_ratio_max(int k, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = lda::mean_var_ratio_max(k);
  });
}

ldg_status ldg_lda_bruteforce(size_t n, const double* p_points, const double* p_weights, size_t p_size,
                              const double* q_points, const double* q_weights, size_t q_size, int k, int m,
                              ldg_string** report_json) {
  return guarded([&] {
    require(report_json != nullptr, "report_json is NULL");
    const auto p = make_measure(n, p_points, p_weights, p_size);
    const auto q = make_measure(n, q_points, q_weights, q_size);
    *report_json = make_string(lda::to_jsonl(lda::lda_bruteforce(p, q, k, m)));
  });
}

ldg_status ldg_christoffel(const char* oracle, int k, double x0, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = ortho::christoffel_sum(ortho::build_basis(make_oracle(oracle), k), x0);
  });
}

ldg_status ldg_basis_csv(const char* oracle, int k, ldg_string** csv) {
  return guarded([&] {
    require(csv != nullptr, "csv is NULL");
    std::ostringstream os;
    ortho::write_basis_csv(os, ortho::build_basis(make_oracle(oracle), k));
    *csv = make_string(os.str());
  });
}

void ldg_grid_default(ldg_grid_spec* spec) {
  if (!spec) return;
  const mm::GridSpec g;
  spec->lambda_count = g.lambda_count;
  spec->lambda_radius = g.lambda_radius;
  spec->z_count = g.z_count;
  spec->z_radius = g.z_radius;
}

ldg_status ldg_solve_mu2(int k, double alpha, ldg_mu1 mu1, const ldg_grid_spec* grid, double residual_tol,
                         ldg_measure** out, ldg_string** certificate_json) {
  if (certificate_json) *certificate_json = nullptr;
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    mm::SolveOptions options;
    options.residual_tol = residual_tol;
    try {
      *out = new ldg_measure{mm::solve_mu2(make_grid(grid), mm::target_vector(k, alpha, make_mu1(mu1)), options)};
    } catch (const mm::InfeasibleError& e) {
      if (certificate_json) *certificate_json = make_string(mm::to_json(e.certificate()));
      throw;
    }
  });
}

ldg_status ldg_max_alpha(int k, ldg_mu1 mu1, const ldg_grid_spec* grid, double bisect_tol, double* value, int* monotone) {
  return guarded([&] {
    require(value != nullptr, "value is NULL");
    const auto r = mm::max_alpha(k, make_grid(grid), make_mu1(mu1), bisect_tol);
    *value = r.value;
    if (monotone) *monotone = r.monotone ? 1 : 0;
  });
}

ldg_status ldg_assemble_planted(int k, ldg_mu1 mu1, const ldg_grid_spec* grid, double alpha, size_t n,
                                ldg_planted** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = new ldg_planted{mm::assemble_planted(k, make_grid(grid), make_mu1(mu1), alpha, n)};
  });
}

ldg_status ldg_planted_sample(const ldg_planted* spec, size_t m, uint64_t seed, ldg_batch** out) {
  return guarded([&] {
    require(spec && out, "NULL argument");
    *out = new ldg_batch{dist::sample_planted(spec->spec, m, seed)};
  });
}

ldg_status ldg_planted_mu2(const ldg_planted* spec, ldg_measure** out) {
  return guarded([&] {
    require(spec && out, "NULL argument");
    *out = new ldg_measure{spec->spec.mu2};
  });
}

void ldg_planted_free(ldg_planted* spec) { delete spec; }

size_t ldg_measure_size(const ldg_measure* mu) { return mu ? mu->measure.size() : 0; }
size_t ldg_measure_dim(const ldg_measure* mu) { return mu ? static_cast<size_t>(mu->measure.dim()) : 0; }
double ldg_measure_point(const ldg_measure* mu, size_t i, size_t coord) {
  if (!mu || i >= mu->measure.size() || coord >= static_cast<size_t>(mu->measure.dim())) return NAN;
  return mu->measure.point(i)(static_cast<Eigen::Index>(coord));
}
double ldg_measure_weight(const ldg_measure* mu, size_t i) {
  return mu && i < mu->measure.size() ? mu->measure.weight(i) : NAN;
}

ldg_status ldg_measure_write_csv(const ldg_measure* mu, const char* path) {
  return guarded([&] {
    require(mu && path, "NULL argument");
    if (std::string(path).empty()) {
      write_measure_csv(std::cout, mu->measure);
      std::cout.flush();
      return;
    }
    std::ofstream os(path);
    if (!os) throw IoError(std::string("cannot write '") + path + "'");
    write_measure_csv(os, mu->measure);
  });
}

void ldg_measure_free(ldg_measure* mu) { delete mu; }

ldg_status ldg_tukey_depth(int k, double delta, size_t samples, size_t directions, uint64_t seed, double* lower,
                           double* upper) {
  return guarded([&] {
    require(lower && upper, "NULL argument");
    const mm::MomentIndexSet idx(k);
    const Matrix f = mm::sample_nu_features(idx, samples, seed);
    const Vector theta = (1.0 + delta) * mm::nu_mean(idx).values;
    const auto d = mm::tukey_depth(f, theta, directions, derive_seed(seed, 1));
    *lower = d.lower;
    *upper = d.upper;
  });
}

ldg_status ldg_anticonc_tail(int l1, int l2, double delta, double t, size_t trials, uint64_t seed, double C,
                             double out[4]) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    require(l1 >= 0 && l2 >= 0 && l1 % 2 == 0 && l2 % 2 == 0 && l1 + l2 > 0, "l1, l2 must be even, not both zero");
    const mm::MomentIndexSet idx(l1 + l2);
    Vector beta = Vector::Zero(idx.D());
    beta(idx.position(l1, l2)) = 1.0;
    const mm::MomentVector b(idx, beta);
    const double center = std::isnan(t) ? b.values.dot(mm::nu_mean(idx).values) : t;
    const auto r = mm::anticonc_tail(b, delta, center, trials, seed, C);
    out[0] = r.estimate.value;
    out[1] = r.estimate.standard_error;
    out[2] = r.bound_polynomial;
    out[3] = r.bound_log_concave;
  });
}

ldg_status ldg_small_ball(double gamma, size_t n, size_t trials, uint64_t seed, double* estimate,
                          double* standard_error) {
  return guarded([&] {
    require(estimate && standard_error, "NULL argument");
    const auto e = dist::small_ball_estimate(gamma, n, trials, seed);
    *estimate = e.value;
    *standard_error = e.standard_error;
  });
}

ldg_status ldg_experiment_validate(const char* config_path) {
  return guarded([&] {
    require(config_path != nullptr, "config_path is NULL");
    harness::load_config(config_path);
  });
}

ldg_status ldg_experiment_run(const char* config_path, unsigned threads, ldg_format format, const char* out_path,
                              uint64_t* seed_override, ldg_string** aggregate_json) {
  return guarded([&] {
    require(config_path != nullptr, "config_path is NULL");
    require(format == LDG_FORMAT_CSV || format == LDG_FORMAT_JSONL, "unknown output format");
    auto config = harness::load_config(config_path);
    if (seed_override) config.master_seed = *seed_override;
    const std::string path = out_path ? std::string(out_path) : config.output_path;

    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!path.empty()) {
      file.open(path);
      if (!file) throw IoError("cannot write '" + path + "'");
      os = &file;
    }
    std::unique_ptr<harness::CsvWriter> csv;
    std::unique_ptr<harness::JsonlWriter> jsonl;
    if (format == LDG_FORMAT_CSV)
      csv = std::make_unique<harness::CsvWriter>(*os, harness::record_keys(config));
    else
      jsonl = std::make_unique<harness::JsonlWriter>(*os);

    harness::RunOptions options;
    options.threads = threads;
    options.sink = [&](const harness::ResultRecord& r) {
      if (csv)
        csv->write(r);
      else
        jsonl->write(r);
    };
    const auto records = harness::run(config, options);
    if (aggregate_json) {
      std::ostringstream line;
      harness::JsonlWriter(line).write(records.back());
      std::string text = line.str();
      if (!text.empty() && text.back() == '\n') text.pop_back();
      *aggregate_json = make_string(text);
    }
  });
}

}  // extern "C"
