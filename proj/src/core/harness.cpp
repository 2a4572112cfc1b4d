#include "lowdeg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "lowdeg/detect.hpp"
#include "lowdeg/distributions.hpp"
#include "lowdeg/error.hpp"
#include "lowdeg/lda.hpp"
#include "lowdeg/momentmatch.hpp"
#include "lowdeg/orthopoly.hpp"

namespace lowdeg::harness {

const std::vector<std::string>& experiment_types() {
  static const std::vector<std::string> types{"detect_relative", "detect_additive", "lda_curve", "moment_match",
                                              "tukey", "anticonc", "incoherence"};
  return types;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno != 0) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_uint64(const std::string& s) {
  if (s.empty() || s[0] == '-') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 0);
  if (end != s.c_str() + s.size() || errno != 0) return std::nullopt;
  return v;
}

// Typed access to [parameters] that records problems instead of throwing.
class Params {
 public:
  Params(const std::map<std::string, std::string>& values, std::vector<std::string>& problems)
      : values_(values), problems_(problems) {}

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      if (!fallback) problems_.push_back("missing parameter '" + key + "'");
      return fallback.value_or(0.0);
    }
    const auto v = parse_double(it->second);
    if (!v) problems_.push_back("parameter '" + key + "' is not a number: '" + it->second + "'");
    return v.value_or(0.0);
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      if (!fallback) problems_.push_back("missing parameter '" + key + "'");
      return fallback.value_or(0);
    }
    const auto v = parse_int(it->second);
    if (!v) problems_.push_back("parameter '" + key + "' is not an integer: '" + it->second + "'");
    return v.value_or(0);
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      if (!fallback) problems_.push_back("missing parameter '" + key + "'");
      return fallback.value_or("");
    }
    return it->second;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void require(bool ok, const std::string& message) {
    if (!ok) problems_.push_back(message);
  }

 private:
  const std::map<std::string, std::string>& values_;
  std::vector<std::string>& problems_;
};

// One experiment: parameters are read (and validated) up front, trials are pure functions
// of the trial seed.
struct Experiment {
  std::string metric;
  bool binary = false;
  std::function<double(std::int64_t trial, std::uint64_t seed)> trial;
  std::function<std::map<std::string, std::string>(std::int64_t trial)> extra_parameters;
};

bool arm_is_planted(Params& p) {
  const auto arm = p.text("arm");
  p.require(arm == "planted" || arm == "null", "parameter 'arm' must be 'planted' or 'null'");
  return arm == "planted";
}

detect::Strategy read_strategy(Params& p) {
  const auto s = p.text("strategy", std::string("none"));
  try {
    return detect::strategy_from_string(s);
  } catch (const InvalidArgument&) {
    p.require(false, "parameter 'strategy' must be none, random_direction, evade or spoof");
    return detect::Strategy::none;
  }
}

Experiment make_detect_relative(Params& p) {
  const auto n = p.integer("n");
  const auto d = p.integer("d");
  const double alpha = p.real("alpha");
  const double prob = p.real("p");
  const double eps = p.real("epsilon");
  const double threshold = p.real("threshold", 0.5);
  const double C = p.real("C", 10.0);
  const bool planted = arm_is_planted(p);
  const auto strategy = read_strategy(p);
  p.require(n >= 1, "parameter 'n' must be at least 1");
  p.require(d >= 1 && d < n, "parameter 'd' must satisfy 1 <= d < n");
  p.require(alpha > 0.0 && alpha <= 1.0, "parameter 'alpha' must lie in (0,1]");
  p.require(prob >= 0.0 && prob < 1.0, "parameter 'p' must lie in [0,1)");
  p.require(eps >= 0.0, "parameter 'epsilon' must be nonnegative");
  std::int64_t m = 0;
  if (p.has("m")) {
    m = p.integer("m");
  } else if (alpha > 0.0 && alpha <= 1.0 && prob >= 0.0 && prob < 1.0 && d >= 0 && C > 0.0) {
    m = static_cast<std::int64_t>(detect::required_samples(static_cast<int>(d), alpha, prob, C));
  }
  p.require(m >= d + 1, "parameter 'm' must be at least d+1");

  Experiment e;
  e.metric = "success";
  e.binary = true;
  e.trial = [=](std::int64_t, std::uint64_t seed) {
    Stream basis_rng(seed, stream_id::subspace, 0);
    Stream decoy_rng(seed, stream_id::subspace, 1);
    const Matrix basis = random_orthonormal_basis(basis_rng, n, d);
    const Matrix decoy = random_orthonormal_basis(decoy_rng, n, d);
    const auto batch = planted ? dist::sample_planted(dist::PlantedSpec::on_subspace(basis, alpha),
                                                      static_cast<std::size_t>(m), seed)
                               : dist::sample_null({static_cast<std::size_t>(n)}, static_cast<std::size_t>(m), seed);
    const detect::NoiseModel model{prob, detect::BudgetKind::relative, eps, strategy};
    const auto noisy = detect::apply_noise(batch, model, strategy == detect::Strategy::spoof ? decoy : basis,
                                           derive_seed(seed, 1));
    const auto verdict = detect::detect_relative(noisy, static_cast<int>(d), threshold, false);
    return verdict.planted == planted ? 1.0 : 0.0;
  };
  return e;
}

Experiment make_detect_additive(Params& p) {
  const auto n = p.integer("n");
  const auto d = p.integer("d");
  const double alpha = p.real("alpha");
  const double prob = p.real("p");
  const double delta = p.real("delta");
  const double c_threshold = p.real("c_threshold", 64.0);
  const double C = p.real("C", 64.0);
  const bool planted = arm_is_planted(p);
  const auto strategy = read_strategy(p);
  p.require(n >= 1, "parameter 'n' must be at least 1");
  p.require(d >= 0 && d < n, "parameter 'd' must satisfy 0 <= d < n");
  p.require(alpha > 0.0 && alpha <= 1.0, "parameter 'alpha' must lie in (0,1]");
  p.require(prob >= 0.0 && prob < 1.0, "parameter 'p' must lie in [0,1)");
  p.require(delta > 0.0 && delta < 1.0, "parameter 'delta' must lie in (0,1)");
  p.require(c_threshold > 0.0 && C > 0.0, "parameters 'c_threshold' and 'C' must be positive");
  const bool valid = alpha > 0.0 && alpha <= 1.0 && prob >= 0.0 && prob < 1.0 && delta > 0.0 && delta < 1.0 &&
                     d >= 0 && n >= 1 && C > 0.0;
  const double eta = p.has("eta") ? p.real("eta")
                                  : (valid ? detect::additive_budget(alpha, prob, delta, static_cast<std::size_t>(n),
                                                                     static_cast<int>(d), C)
                                           : 0.0);
  const std::int64_t subsample =
      valid ? static_cast<std::int64_t>(detect::additive_subsample_size(static_cast<int>(d), alpha, prob, delta)) : 0;
  const std::int64_t m = p.has("m") ? p.integer("m") : subsample;
  p.require(m >= subsample, "parameter 'm' is below the subsample size |J| = " + std::to_string(subsample));
  p.require(eta >= 0.0, "parameter 'eta' must be nonnegative");

  Experiment e;
  e.metric = "success";
  e.binary = true;
  e.trial = [=](std::int64_t, std::uint64_t seed) {
    Stream basis_rng(seed, stream_id::subspace, 0);
    Stream decoy_rng(seed, stream_id::subspace, 1);
    const Matrix basis = random_orthonormal_basis(basis_rng, n, d);
    const Matrix decoy = random_orthonormal_basis(decoy_rng, n, d);
    dist::SampleBatch batch;
    if (!planted)
      batch = dist::sample_null({static_cast<std::size_t>(n)}, static_cast<std::size_t>(m), seed);
    else if (d == 0)
      batch = dist::sample_planted(dist::PlantedSpec::point_mass(static_cast<std::size_t>(n), alpha),
                                   static_cast<std::size_t>(m), seed);
    else
      batch = dist::sample_planted(dist::PlantedSpec::on_subspace(basis, alpha), static_cast<std::size_t>(m), seed);
    const detect::NoiseModel model{prob, detect::BudgetKind::additive, eta, strategy};
    const auto noisy = detect::apply_noise(batch, model, strategy == detect::Strategy::spoof ? decoy : basis,
                                           derive_seed(seed, 1));
    detect::AdditiveParams params;
    params.alpha = alpha;
    params.p = prob;
    params.delta = delta;
    params.c_threshold = c_threshold;
    const auto verdict = detect::detect_additive(noisy, static_cast<int>(d), params, derive_seed(seed, 2));
    return verdict.planted == planted ? 1.0 : 0.0;
  };
  return e;
}

Experiment make_lda_curve(Params& p, std::int64_t trials) {
  const auto k_min = p.integer("k_min", 1);
  const auto k_max = p.integer("k_max");
  const double alpha = p.real("alpha");
  const auto law_name = p.text("scale_law", std::string("normal"));
  p.require(k_min >= 0 && k_max >= k_min, "parameters must satisfy 0 <= k_min <= k_max");
  p.require(k_max <= ortho::kMaxDegree, "parameter 'k_max' exceeds the basis degree cap");
  p.require(alpha >= 0.0 && alpha <= 1.0, "parameter 'alpha' must lie in [0,1]");
  p.require(trials == k_max - k_min + 1, "lda_curve runs one trial per degree: trials must equal k_max - k_min + 1");
  std::optional<dist::ScaleLaw> law;
  try {
    law = dist::ScaleLaw::from_name(law_name);
  } catch (const InvalidArgument&) {
    p.require(false, "parameter 'scale_law' must be 'normal' or 'heavy_two_scale'");
  }

  Experiment e;
  e.metric = "lda_exact";
  e.trial = [=](std::int64_t trial, std::uint64_t) {
    return lda::lda_single_pointmass(*law, alpha, static_cast<int>(k_min + trial)).value;
  };
  e.extra_parameters = [=](std::int64_t trial) {
    return std::map<std::string, std::string>{{"k", trial < 0 ? std::string() : std::to_string(k_min + trial)}};
  };
  return e;
}

Experiment make_moment_match(Params& p) {
  const auto k = p.integer("k");
  const double alpha = p.real("alpha");
  const auto n = p.integer("n", 2);
  const auto samples = p.integer("samples");
  mm::GridSpec grid_spec;
  grid_spec.lambda_count = static_cast<int>(p.integer("grid_lambda", 41));
  grid_spec.z_count = static_cast<int>(p.integer("grid_z", 81));
  grid_spec.lambda_radius = p.real("lambda_radius", 6.0);
  grid_spec.z_radius = p.real("z_radius", 12.0);
  const auto mu1_kind = p.text("mu1", std::string("point"));
  const double mu1_t = p.real("mu1_t", 0.5);
  p.require(k >= 1 && k <= 8, "parameter 'k' must lie in [1, 8]");
  p.require(alpha > 0.0 && alpha < 1.0, "parameter 'alpha' must lie in (0,1)");
  p.require(n >= 2, "parameter 'n' must be at least 2");
  p.require(samples >= 2, "parameter 'samples' must be at least 2");
  p.require(grid_spec.lambda_count >= 1 && grid_spec.z_count >= 1, "grid node counts must be positive");
  p.require(grid_spec.lambda_radius > 0.0 && grid_spec.z_radius > 0.0, "grid radii must be positive");
  p.require(mu1_kind == "point" || mu1_kind == "two_point", "parameter 'mu1' must be 'point' or 'two_point'");
  p.require(mu1_kind != "two_point" || mu1_t > 0.0, "parameter 'mu1_t' must be positive");

  // The LP is solved once, lazily, and shared by all trials.
  struct Shared {
    std::once_flag once;
    std::optional<dist::PlantedSpec> spec;
    std::exception_ptr error;
  };
  auto shared = std::make_shared<Shared>();
  Experiment e;
  e.metric = "max_abs_z";
  e.trial = [=](std::int64_t, std::uint64_t seed) {
    std::call_once(shared->once, [&] {
      try {
        const auto mu1 = mu1_kind == "point" ? DiscreteMeasure::point_mass_1d(0.0) : DiscreteMeasure::symmetric_two_point(mu1_t);
        shared->spec = mm::assemble_planted(static_cast<int>(k), mm::default_grid(grid_spec), mu1, alpha,
                                            static_cast<std::size_t>(n));
      } catch (...) {
        shared->error = std::current_exception();
      }
    });
    if (shared->error) std::rethrow_exception(shared->error);
    const auto batch = dist::sample_planted(*shared->spec, static_cast<std::size_t>(samples), seed);
    double worst = 0.0;
    const Eigen::Index last = batch.data.cols() - 1;
    const auto N = static_cast<double>(batch.rows());
    for (int l1 = 0; l1 <= k; ++l1)
      for (int l2 = 0; l1 + l2 <= k; ++l2) {
        if (l1 + l2 == 0) continue;
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index r = 0; r < batch.data.rows(); ++r) {
          const double v = std::pow(batch.data(r, 0), l1) * std::pow(batch.data(r, last), l2);
          s += v;
          s2 += v * v;
        }
        const double mean = s / N;
        const double se = std::sqrt(std::max(s2 / N - mean * mean, 0.0) / N);
        const double diff = mean - dist::q_mixed_moment(l1, l2);
        const double z = se > 0.0 ? std::abs(diff) / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        worst = std::max(worst, z);
      }
    return worst;
  };
  return e;
}

Experiment make_tukey(Params& p) {
  const auto k = p.integer("k");
  const double delta = p.real("delta");
  const auto samples = p.integer("samples");
  const auto directions = p.integer("directions", 1000);
  p.require(k >= 2 && k <= 8, "parameter 'k' must lie in [2, 8]");
  p.require(delta >= 0.0, "parameter 'delta' must be nonnegative");
  p.require(samples >= 1000, "parameter 'samples' must be at least 1000");
  p.require(directions >= 1000, "parameter 'directions' must be at least 1000");
  Experiment e;
  e.metric = "depth_lower";
  e.trial = [=](std::int64_t, std::uint64_t seed) {
    const mm::MomentIndexSet idx(static_cast<int>(k));
    const Matrix f = mm::sample_nu_features(idx, static_cast<std::size_t>(samples), seed);
    const Vector theta = (1.0 + delta) * mm::nu_mean(idx).values;
    return mm::tukey_depth(f, theta, static_cast<std::size_t>(directions), derive_seed(seed, 1)).lower;
  };
  return e;
}

Experiment make_anticonc(Params& p) {
  const auto l1 = p.integer("l1");
  const auto l2 = p.integer("l2");
  const double delta = p.real("delta");
  const auto samples = p.integer("samples");
  const bool has_t = p.has("t");
  const double t = p.real("t", 0.0);
  p.require(l1 >= 0 && l2 >= 0 && l1 % 2 == 0 && l2 % 2 == 0 && l1 + l2 > 0 && l1 + l2 <= 8,
            "parameters 'l1', 'l2' must be even with 0 < l1 + l2 <= 8");
  p.require(delta >= 0.0, "parameter 'delta' must be nonnegative");
  p.require(samples >= 100000, "parameter 'samples' must be at least 100000");
  Experiment e;
  e.metric = "band_probability";
  e.trial = [=](std::int64_t, std::uint64_t seed) {
    const mm::MomentIndexSet idx(static_cast<int>(l1 + l2));
    Vector beta = Vector::Zero(idx.D());
    beta(idx.position(static_cast<int>(l1), static_cast<int>(l2))) = 1.0;
    const mm::MomentVector b(idx, beta);
    const double center = has_t ? t : b.values.dot(mm::nu_mean(idx).values);
    return mm::anticonc_tail(b, delta, center, static_cast<std::size_t>(samples), seed).estimate.value;
  };
  return e;
}

Experiment make_incoherence(Params& p) {
  const auto n = p.integer("n");
  const auto m = p.integer("m");
  const double eps = p.real("epsilon", 0.0);
  p.require(n >= 1, "parameter 'n' must be at least 1");
  p.require(m >= 2, "parameter 'm' must be at least 2");
  p.require(eps >= 0.0, "parameter 'epsilon' must be nonnegative");
  Experiment e;
  e.metric = "incoherence";
  e.trial = [=](std::int64_t, std::uint64_t seed) {
    auto batch = dist::sample_null({static_cast<std::size_t>(n)}, static_cast<std::size_t>(m), seed);
    if (eps > 0.0)
      batch = detect::apply_noise(batch, {0.0, detect::BudgetKind::relative, eps, detect::Strategy::random_direction},
                                  std::nullopt, derive_seed(seed, 1));
    return detect::incoherence(batch);
  };
  return e;
}

Experiment make_experiment(const ExperimentConfig& config, std::vector<std::string>& problems) {
  Params p(config.parameters, problems);
  const auto& type = config.experiment;
  if (type == "detect_relative") return make_detect_relative(p);
  if (type == "detect_additive") return make_detect_additive(p);
  if (type == "lda_curve") return make_lda_curve(p, config.trials);
  if (type == "moment_match") return make_moment_match(p);
  if (type == "tukey") return make_tukey(p);
  if (type == "anticonc") return make_anticonc(p);
  if (type == "incoherence") return make_incoherence(p);
  problems.push_back("unknown experiment type '" + type + "'");
  return {};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig config;
  std::vector<std::string> problems;
  std::string section;
  std::string line;
  std::map<std::string, std::string> experiment_section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back("line " + std::to_string(line_no) + ": malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "parameters")
        problems.push_back("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": empty key");
      continue;
    }
    auto& target = section == "experiment" ? experiment_section : config.parameters;
    if (section.empty()) {
      problems.push_back("line " + std::to_string(line_no) + ": key '" + key + "' outside any section");
      continue;
    }
    if (!target.emplace(key, value).second)
      problems.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }

  for (const auto& [key, value] : experiment_section) {
    if (key == "type") {
      config.experiment = value;
    } else if (key == "seed") {
      const auto v = parse_uint64(value);
      if (!v) problems.push_back("'seed' must be an unsigned 64-bit integer");
      config.master_seed = v.value_or(0);
    } else if (key == "trials") {
      const auto v = parse_int(value);
      if (!v) problems.push_back("'trials' must be an integer");
      config.trials = v.value_or(0);
    } else if (key == "output") {
      config.output_path = value;
    } else {
      problems.push_back("unknown key '" + key + "' in [experiment]");
    }
  }
  if (!experiment_section.count("type")) problems.push_back("missing 'type' in [experiment]");
  if (!experiment_section.count("seed")) problems.push_back("missing 'seed' in [experiment]");
  if (!experiment_section.count("trials")) problems.push_back("missing 'trials' in [experiment]");

  if (!problems.empty()) throw ConfigError(problems);
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_config(in);
}

void validate(const ExperimentConfig& config) {
  std::vector<std::string> problems;
  if (config.trials < 1) problems.push_back("'trials' must be at least 1");
  make_experiment(config, problems);
  if (!problems.empty()) throw ConfigError(problems);
}

std::vector<std::string> record_keys(const ExperimentConfig& config) {
  std::set<std::string> keys;
  for (const auto& [k, v] : config.parameters) keys.insert(k);
  if (config.experiment == "lda_curve") keys.insert("k");
  return {keys.begin(), keys.end()};
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials) {
  if (trials == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<ResultRecord> run(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<std::string> problems;
  if (config.trials < 1) problems.push_back("'trials' must be at least 1");
  auto experiment = make_experiment(config, problems);
  if (!problems.empty()) throw ConfigError(problems);

  const auto trials = static_cast<std::size_t>(config.trials);
  auto params_for = [&](std::int64_t trial) {
    auto params = config.parameters;
    if (experiment.extra_parameters)
      for (auto& [k, v] : experiment.extra_parameters(trial)) params[k] = v;
    return params;
  };

  std::vector<std::optional<ResultRecord>> slots(trials);
  std::vector<ResultRecord> records;
  records.reserve(trials + 1);
  std::mutex mutex;
  std::size_t flushed = 0;
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= trials) return;
      {
        std::lock_guard lock(mutex);
        if (failure) return;
      }
      ResultRecord rec;
      rec.experiment = config.experiment;
      rec.trial = static_cast<std::int64_t>(t);
      rec.seed = derive_seed(config.master_seed, t);
      rec.parameters = params_for(rec.trial);
      rec.metric = experiment.metric;
      rec.ci_low = rec.ci_high = std::numeric_limits<double>::quiet_NaN();
      const auto start = std::chrono::steady_clock::now();
      try {
        rec.value = experiment.trial(rec.trial, rec.seed);
      } catch (const Error& e) {
        std::lock_guard lock(mutex);
        if (!failure)
          failure = std::make_exception_ptr(Error(e.kind(), "trial " + std::to_string(t) + " (seed " +
                                                                std::to_string(rec.seed) + "): " + e.what()));
        return;
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();

      std::lock_guard lock(mutex);
      slots[t] = std::move(rec);
      while (flushed < trials && slots[flushed]) {
        records.push_back(*slots[flushed]);
        if (options.sink) options.sink(records.back());
        ++flushed;
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(trials)));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ResultRecord agg;
  agg.experiment = config.experiment;
  agg.trial = -1;
  agg.seed = config.master_seed;
  agg.parameters = params_for(-1);
  std::int64_t wall = 0;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t successes = 0;
  for (const auto& r : records) {
    wall += r.wall_ns;
    sum += r.value;
    sum_sq += r.value * r.value;
    if (r.value == 1.0) ++successes;
  }
  const double n = static_cast<double>(records.size());
  if (experiment.binary) {
    agg.metric = "success_rate";
    agg.value = static_cast<double>(successes) / n;
    std::tie(agg.ci_low, agg.ci_high) = wilson_interval(successes, records.size());
  } else {
    agg.metric = "mean_" + experiment.metric;
    agg.value = sum / n;
    const double var = records.size() > 1 ? std::max(0.0, (sum_sq - n * agg.value * agg.value) / (n - 1.0)) : 0.0;
    const double se = std::sqrt(var / n);
    agg.ci_low = agg.value - 1.959963984540054 * se;
    agg.ci_high = agg.value + 1.959963984540054 * se;
  }
  agg.wall_ns = wall;
  records.push_back(agg);
  if (options.sink) options.sink(records.back());
  return records;
}

CsvWriter::CsvWriter(std::ostream& os, std::vector<std::string> keys) : os_(os), keys_(std::move(keys)) {
  os_ << "experiment,trial,seed";
  for (const auto& k : keys_) os_ << ',' << csv_field(k);
  os_ << ",metric,value,ci_low,ci_high,wall_ns\n";
}

void CsvWriter::write(const ResultRecord& r) {
  os_ << csv_field(r.experiment) << ',' << (r.trial < 0 ? std::string("aggregate") : std::to_string(r.trial)) << ','
      << r.seed;
  for (const auto& k : keys_) {
    const auto it = r.parameters.find(k);
    os_ << ',' << (it == r.parameters.end() ? std::string() : csv_field(it->second));
  }
  os_ << ',' << csv_field(r.metric) << ',' << format_double(r.value) << ',' << format_double(r.ci_low) << ','
      << format_double(r.ci_high) << ',' << r.wall_ns << '\n';
  os_.flush();
}

void JsonlWriter::write(const ResultRecord& r) {
  os_ << "{\"experiment\":" << json_string(r.experiment) << ",\"trial\":";
  if (r.trial < 0)
    os_ << "\"aggregate\"";
  else
    os_ << r.trial;
  os_ << ",\"seed\":" << r.seed << ",\"parameters\":{";
  bool first = true;
  for (const auto& [k, v] : r.parameters) {
    os_ << (first ? "" : ",") << json_string(k) << ':' << json_string(v);
    first = false;
  }
  auto num = [](double v) { return std::isnan(v) ? std::string("null") : format_double(v); };
  os_ << "},\"metric\":" << json_string(r.metric) << ",\"value\":" << num(r.value) << ",\"ci_low\":" << num(r.ci_low)
      << ",\"ci_high\":" << num(r.ci_high) << ",\"wall_ns\":" << r.wall_ns << "}\n";
  os_.flush();
}

std::string emit_curve(const std::vector<ResultRecord>& records, const std::string& x_key, const std::string& y_key) {
  std::ostringstream os;
  os << csv_field(x_key) << ',' << csv_field(y_key) << ",ci_low,ci_high\n";
  if (records.empty()) return os.str();
  const auto& id = records.front().experiment;
  struct Row {
    double x;
    std::string x_text;
    const ResultRecord* rec;
  };
  std::vector<Row> rows;
  for (const auto& r : records) {
    if (r.experiment != id) throw InvalidArgument("emit_curve: records mix experiments '" + id + "' and '" + r.experiment + "'");
    if (r.metric != y_key) continue;
    const auto it = r.parameters.find(x_key);
    if (it == r.parameters.end()) throw InvalidArgument("emit_curve: record lacks parameter '" + x_key + "'");
    const auto x = parse_double(it->second);
    if (!x) throw InvalidArgument("emit_curve: parameter '" + x_key + "' is not numeric");
    rows.push_back({*x, it->second, &r});
  }
  if (rows.empty()) throw InvalidArgument("emit_curve: no records carry metric '" + y_key + "'");
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.x < b.x; });
  for (const auto& row : rows)
    os << csv_field(row.x_text) << ',' << format_double(row.rec->value) << ',' << format_double(row.rec->ci_low) << ','
       << format_double(row.rec->ci_high) << '\n';
  return os.str();
}

}  // namespace lowdeg::harness
