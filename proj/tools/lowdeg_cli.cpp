// Command-line front end. Talks to the library only through the C interface.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "lowdeg/lowdeg.h"

namespace {

struct Globals {
  uint64_t seed = 1;
  std::string out;
  unsigned threads = 1;
  std::string format = "csv";
};

// Thrown after a failed library call; carries the process exit code.
struct Failure {
  int exit_code;
};

int exit_code_for(ldg_status s) {
  switch (s) {
    case LDG_OK: return 0;
    case LDG_ERR_INVALID_ARGUMENT:
    case LDG_ERR_CONFIG:
    case LDG_ERR_IO: return 2;
    case LDG_ERR_INFEASIBLE:
    case LDG_ERR_NUMERIC: return 3;
    default: return 1;
  }
}

void check(ldg_status s) {
  if (s == LDG_OK) return;
  std::fprintf(stderr, "error (%s): %s\n", ldg_status_string(s), ldg_last_error());
  throw Failure{exit_code_for(s)};
}

// Output stream for --out, stdout when empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) {
        std::fprintf(stderr, "error: cannot write '%s'\n", path.c_str());
        throw Failure{2};
      }
    }
  }
  std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One row of named scalars, as CSV (header + row) or one JSON object.
void emit(const Globals& g, const std::vector<std::pair<std::string, std::string>>& fields) {
  Output out(g.out);
  auto& os = out.get();
  if (g.format == "jsonl") {
    os << '{';
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto& v = fields[i].second;
      const bool numeric = !v.empty() && (std::isdigit(static_cast<unsigned char>(v[0])) || v[0] == '-');
      os << (i ? "," : "") << '"' << fields[i].first << "\":" << (numeric ? v : '"' + v + '"');
    }
    os << "}\n";
  } else {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i].first;
    os << '\n';
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i].second;
    os << '\n';
  }
}

void emit_text(const Globals& g, const std::string& text) {
  Output out(g.out);
  out.get() << text;
  if (!text.empty() && text.back() != '\n') out.get() << '\n';
}

ldg_batch* read_batch(const std::string& path) {
  ldg_batch* b = nullptr;
  check(ldg_batch_read_csv(path.c_str(), &b));
  return b;
}

uint64_t derive_noise_seed(uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL; }

ldg_strategy parse_strategy(const std::string& s) {
  if (s == "none") return LDG_STRATEGY_NONE;
  if (s == "random_direction") return LDG_STRATEGY_RANDOM_DIRECTION;
  if (s == "evade") return LDG_STRATEGY_EVADE;
  return LDG_STRATEGY_SPOOF;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planted subspace detection and low-degree advantage toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--out", g.out, "Output file (stdout when omitted)");
  app.add_option("--threads", g.threads, "Worker threads for experiments")->check(CLI::Range(1u, 1024u));
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();

  // sample
  auto* sample = app.add_subcommand("sample", "Draw a batch from the null or a planted distribution");
  std::size_t n = 100, m = 100, d = 1;
  std::string kind = "null";
  double alpha = 0.05;
  int k = 4;
  double noise_p = 0.0, budget = 0.0;
  std::string budget_kind = "relative", strategy = "none";
  sample->add_option("--n", n, "Dimension")->capture_default_str();
  sample->add_option("--m", m, "Number of samples")->capture_default_str();
  sample->add_option("--kind", kind, "Distribution")
      ->check(CLI::IsMember({"null", "pointmass", "subspace", "general"}))
      ->capture_default_str();
  sample->add_option("--alpha", alpha, "Planted fraction")->capture_default_str();
  sample->add_option("--d", d, "Subspace dimension (kind=subspace)")->capture_default_str();
  sample->add_option("--k", k, "Matched degree (kind=general)")->capture_default_str();
  sample->add_option("--noise-p", noise_p, "Rerandomization probability")->capture_default_str();
  sample->add_option("--budget", budget, "Perturbation budget")->capture_default_str();
  sample->add_option("--budget-kind", budget_kind, "Budget kind")
      ->check(CLI::IsMember({"relative", "additive"}))
      ->capture_default_str();
  sample->add_option("--strategy", strategy, "Adversary")
      ->check(CLI::IsMember({"none", "random_direction", "evade", "spoof"}))
      ->capture_default_str();

  // detect-rel / detect-add
  auto* detect_rel = app.add_subcommand("detect-rel", "Relative-noise detector on a batch CSV");
  std::string input;
  double threshold = 0.5;
  int dd = 1;
  detect_rel->add_option("input", input, "Batch CSV")->required();
  detect_rel->add_option("--d", dd, "Subspace dimension")->capture_default_str();
  detect_rel->add_option("--threshold", threshold, "Singular value threshold")->capture_default_str();

  auto* detect_add = app.add_subcommand("detect-add", "Additive-noise detector on a batch CSV");
  double p = 0.0, delta = 0.1, tau = NAN, c_threshold = 64.0;
  detect_add->add_option("input", input, "Batch CSV")->required();
  detect_add->add_option("--d", dd, "Subspace dimension")->capture_default_str();
  detect_add->add_option("--alpha", alpha, "Planted fraction")->capture_default_str();
  detect_add->add_option("--p", p, "Rerandomization probability")->capture_default_str();
  detect_add->add_option("--delta", delta, "Failure probability")->capture_default_str();
  detect_add->add_option("--tau", tau, "Threshold (derived when omitted)");
  detect_add->add_option("--c-threshold", c_threshold, "Constant in the derived threshold")->capture_default_str();

  // lda
  auto* lda = app.add_subcommand("lda", "Exact single-sample advantage of the point-mass mixture");
  std::string scale_law = "normal";
  int samples_m = 1;
  double C = 0.0;
  lda->add_option("--alpha", alpha, "Planted fraction")->capture_default_str();
  lda->add_option("--k", k, "Degree")->capture_default_str();
  lda->add_option("--scale-law", scale_law, "Scale law")
      ->check(CLI::IsMember({"normal", "heavy_two_scale"}))
      ->capture_default_str();
  lda->add_option("--samples", samples_m, "Sample count for the lifted bound")->capture_default_str();
  lda->add_option("--C", C, "Constant for the closed-form bound (reported when > 0)");

  // christoffel
  auto* christoffel = app.add_subcommand("christoffel", "Christoffel sum or orthonormal basis");
  std::string oracle = "product_normal";
  double x0 = 0.0;
  bool basis = false;
  christoffel->add_option("--oracle", oracle, "Moment oracle")
      ->check(CLI::IsMember({"normal", "product_normal", "heavy_two_scale"}))
      ->capture_default_str();
  christoffel->add_option("--k", k, "Degree")->capture_default_str();
  christoffel->add_option("--x0", x0, "Evaluation point")->capture_default_str();
  christoffel->add_flag("--basis", basis, "Print the basis coefficients instead");

  // moment-match
  auto* moment = app.add_subcommand("moment-match", "Solve for the matching (lambda, z) measure");
  std::string mu1 = "point";
  double mu1_t = 0.5, residual_tol = 1e-8, bisect_tol = 1e-4;
  bool find_max = false;
  ldg_grid_spec grid;
  ldg_grid_default(&grid);
  moment->add_option("--k", k, "Matched degree")->capture_default_str();
  moment->add_option("--alpha", alpha, "Planted fraction")->capture_default_str();
  moment->add_option("--mu1", mu1, "Planted-branch law")->check(CLI::IsMember({"point", "two_point"}))->capture_default_str();
  moment->add_option("--mu1-t", mu1_t, "Atom location of the two-point law")->capture_default_str();
  moment->add_option("--residual-tol", residual_tol, "Residual tolerance")->capture_default_str();
  moment->add_option("--grid-lambda", grid.lambda_count, "Lambda nodes")->capture_default_str();
  moment->add_option("--grid-z", grid.z_count, "z nodes")->capture_default_str();
  moment->add_option("--lambda-radius", grid.lambda_radius, "Lambda range")->capture_default_str();
  moment->add_option("--z-radius", grid.z_radius, "z range")->capture_default_str();
  moment->add_flag("--max-alpha", find_max, "Bisect for the largest feasible alpha instead");
  moment->add_option("--bisect-tol", bisect_tol, "Bisection tolerance")->capture_default_str();

  // tukey
  auto* tukey = app.add_subcommand("tukey", "Depth of (1+delta) E[Phi] under the feature law");
  std::size_t samples = 100000, directions = 1000;
  double tdelta = 1e-3;
  tukey->add_option("--k", k, "Degree")->capture_default_str();
  tukey->add_option("--delta", tdelta, "Relative shift of the mean")->capture_default_str();
  tukey->add_option("--samples", samples, "Feature samples")->capture_default_str();
  tukey->add_option("--directions", directions, "Random directions")->capture_default_str();

  // anticonc
  auto* anticonc = app.add_subcommand("anticonc", "Band probability of lambda^l1 z^l2");
  int l1 = 2, l2 = 0;
  double t = NAN, ac_C = 1.0;
  std::size_t trials = 1000000;
  anticonc->add_option("--l1", l1, "lambda exponent")->capture_default_str();
  anticonc->add_option("--l2", l2, "z exponent")->capture_default_str();
  anticonc->add_option("--delta", delta, "Relative band half-width")->capture_default_str();
  anticonc->add_option("--t", t, "Band centre (mean when omitted)");
  anticonc->add_option("--trials", trials, "Monte Carlo trials")->capture_default_str();
  anticonc->add_option("--C", ac_C, "Constant in the reported bounds")->capture_default_str();

  // incoherence
  auto* incoherence = app.add_subcommand("incoherence", "Max |<a_i, a_j>| of normalized rows");
  std::string inc_input;
  incoherence->add_option("input", inc_input, "Batch CSV (a null batch is drawn when omitted)");
  incoherence->add_option("--n", n, "Dimension")->capture_default_str();
  incoherence->add_option("--m", m, "Samples")->capture_default_str();

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a configured multi-trial experiment");
  std::string config;
  bool seed_given = false;
  experiment->add_option("config", config, "INI config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  seed_given = app.get_option("--seed")->count() > 0;

  try {
    if (*sample) {
      ldg_batch* batch = nullptr;
      std::vector<double> basis_cols;
      if (kind == "null") {
        check(ldg_sample_null(n, m, g.seed, &batch));
      } else if (kind == "pointmass") {
        check(ldg_sample_planted_pointmass(n, alpha, m, g.seed, &batch));
      } else if (kind == "subspace") {
        basis_cols.resize(n * d);
        check(ldg_random_subspace(n, d, g.seed, basis_cols.data()));
        check(ldg_sample_planted_subspace(basis_cols.data(), n, d, alpha, m, g.seed, &batch));
      } else {
        ldg_planted* spec = nullptr;
        check(ldg_assemble_planted(k, ldg_mu1{0, 0.0}, &grid, alpha, n, &spec));
        const ldg_status s = ldg_planted_sample(spec, m, g.seed, &batch);
        ldg_planted_free(spec);
        check(s);
      }
      if (strategy != "none" || noise_p > 0.0) {
        ldg_batch* noisy = nullptr;
        const ldg_status s = ldg_apply_noise(
            batch, noise_p, budget_kind == "relative" ? LDG_BUDGET_RELATIVE : LDG_BUDGET_ADDITIVE, budget,
            parse_strategy(strategy), basis_cols.empty() ? nullptr : basis_cols.data(), basis_cols.empty() ? 0 : d,
            derive_noise_seed(g.seed), &noisy);
        ldg_batch_free(batch);
        check(s);
        batch = noisy;
      }
      const ldg_status s = ldg_batch_write_csv(batch, g.out.c_str());
      ldg_batch_free(batch);
      check(s);
    } else if (*detect_rel || *detect_add) {
      ldg_batch* batch = read_batch(input);
      ldg_verdict* v = nullptr;
      const ldg_status s = *detect_rel ? ldg_detect_relative(batch, dd, threshold, &v)
                                       : ldg_detect_additive(batch, dd, alpha, p, delta, tau, c_threshold, g.seed, &v);
      ldg_batch_free(batch);
      check(s);
      if (g.format == "jsonl") {
        emit_text(g, ldg_verdict_json(v));
      } else {
        std::string witness;
        for (std::size_t i = 0; i < ldg_verdict_witness_size(v); ++i)
          witness += (i ? " " : "") + std::to_string(ldg_verdict_witness(v, i));
        emit(g, {{"verdict", ldg_verdict_planted(v) ? "PLANTED" : "NULL"},
                 {"witness", witness},
                 {"sigma", fmt(ldg_verdict_sigma(v))},
                 {"tuple_count_scanned", std::to_string(ldg_verdict_tuples_scanned(v))}});
      }
      ldg_verdict_free(v);
    } else if (*lda) {
      ldg_string* report = nullptr;
      check(ldg_lda_single_pointmass(scale_law.c_str(), alpha, k, &report));
      std::string text = ldg_string_data(report);
      ldg_string_free(report);
      // value is the single-sample advantage; the lifted bound follows from it.
      const auto pos = text.find("\"value\":");
      const double value = std::stod(text.substr(pos + 8));
      double lifted = 0.0;
      check(ldg_lift_bound(value, samples_m, &lifted));
      std::vector<std::pair<std::string, std::string>> fields{
          {"k", std::to_string(k)}, {"alpha", fmt(alpha)}, {"lda_exact", fmt(value)},
          {"samples", std::to_string(samples_m)}, {"lift_bound", fmt(lifted)}};
      if (C > 0.0) {
        double tb = 0.0;
        check(ldg_theorem_bound(alpha, k, samples_m, C, &tb));
        fields.emplace_back("theorem_bound", fmt(tb));
      }
      if (g.format == "jsonl" && samples_m == 1 && C <= 0.0)
        emit_text(g, text);
      else
        emit(g, fields);
    } else if (*christoffel) {
      if (basis) {
        ldg_string* csv = nullptr;
        check(ldg_basis_csv(oracle.c_str(), k, &csv));
        emit_text(g, ldg_string_data(csv));
        ldg_string_free(csv);
      } else {
        double value = 0.0;
        check(ldg_christoffel(oracle.c_str(), k, x0, &value));
        emit(g, {{"oracle", oracle}, {"k", std::to_string(k)}, {"x0", fmt(x0)}, {"christoffel_sum", fmt(value)}});
      }
    } else if (*moment) {
      const ldg_mu1 law{mu1 == "point" ? 0 : 1, mu1_t};
      if (find_max) {
        double value = 0.0;
        int monotone = 0;
        check(ldg_max_alpha(k, law, &grid, bisect_tol, &value, &monotone));
        emit(g, {{"k", std::to_string(k)}, {"max_alpha", fmt(value)}, {"monotone", monotone ? "1" : "0"}});
      } else {
        ldg_measure* mu2 = nullptr;
        ldg_string* cert = nullptr;
        const ldg_status s = ldg_solve_mu2(k, alpha, law, &grid, residual_tol, &mu2, &cert);
        if (s == LDG_ERR_INFEASIBLE && cert) {
          std::fprintf(stderr, "certificate: %s\n", ldg_string_data(cert));
          ldg_string_free(cert);
        }
        check(s);
        const ldg_status w = ldg_measure_write_csv(mu2, g.out.c_str());
        ldg_measure_free(mu2);
        check(w);
      }
    } else if (*tukey) {
      double lower = 0.0, upper = 0.0;
      check(ldg_tukey_depth(k, tdelta, samples, directions, g.seed, &lower, &upper));
      emit(g, {{"k", std::to_string(k)}, {"delta", fmt(tdelta)}, {"depth_lower", fmt(lower)}, {"depth_upper", fmt(upper)}});
    } else if (*anticonc) {
      double out[4];
      check(ldg_anticonc_tail(l1, l2, delta, t, trials, g.seed, ac_C, out));
      emit(g, {{"l1", std::to_string(l1)},
               {"l2", std::to_string(l2)},
               {"delta", fmt(delta)},
               {"estimate", fmt(out[0])},
               {"standard_error", fmt(out[1])},
               {"bound_polynomial", fmt(out[2])},
               {"bound_log_concave", fmt(out[3])}});
    } else if (*incoherence) {
      ldg_batch* batch = nullptr;
      if (inc_input.empty())
        check(ldg_sample_null(n, m, g.seed, &batch));
      else
        batch = read_batch(inc_input);
      double value = 0.0;
      const ldg_status s = ldg_incoherence(batch, &value);
      const std::size_t rows = ldg_batch_rows(batch), cols = ldg_batch_cols(batch);
      ldg_batch_free(batch);
      check(s);
      emit(g, {{"n", std::to_string(cols)}, {"m", std::to_string(rows)}, {"incoherence", fmt(value)}});
    } else if (*experiment) {
      uint64_t seed = g.seed;
      ldg_string* agg = nullptr;
      const char* out_path = app.get_option("--out")->count() ? g.out.c_str() : nullptr;
      check(ldg_experiment_run(config.c_str(), g.threads, g.format == "csv" ? LDG_FORMAT_CSV : LDG_FORMAT_JSONL,
                               out_path, seed_given ? &seed : nullptr, &agg));
      std::fprintf(stderr, "%s\n", ldg_string_data(agg));
      ldg_string_free(agg);
    }
  } catch (const Failure& f) {
    return f.exit_code;
  }
  return 0;
}
