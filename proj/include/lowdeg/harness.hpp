#pragma once

// Experiment configuration, deterministic multi-trial orchestration and result files.
//
// Config files are INI-style:
//
//   [experiment]
//   type = detect_relative
//   seed = 7
//   trials = 200
//   output = results.csv
//
//   [parameters]
//   n = 200
//   ...
//
// Trial t runs with seed derive_seed(seed, t). Each trial yields one record; a final
// aggregate record (trial = -1) summarises the trial metric.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace lowdeg::harness {

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t master_seed = 0;
  std::int64_t trials = 1;
  std::string output_path;
  std::map<std::string, std::string> parameters;
};

/// Known experiment ids.
const std::vector<std::string>& experiment_types();

/// Parses and validates; ConfigError lists every problem found.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
/// Throws ConfigError with every missing or malformed key for the chosen experiment.
void validate(const ExperimentConfig& config);

struct ResultRecord {
  std::string experiment;
  std::int64_t trial = 0;  // -1 for the aggregate
  std::uint64_t seed = 0;
  std::map<std::string, std::string> parameters;
  std::string metric;
  double value = 0.0;
  double ci_low = 0.0;  // NaN when not applicable
  double ci_high = 0.0;
  std::int64_t wall_ns = 0;
};

using RecordSink = std::function<void(const ResultRecord&)>;

struct RunOptions {
  unsigned threads = 1;
  /// Receives records in trial order as soon as each prefix of trials is complete.
  RecordSink sink;
};

/// Runs every trial. Results do not depend on the thread count.
std::vector<ResultRecord> run(const ExperimentConfig& config, const RunOptions& options = {});

/// Parameter columns of the records `run` produces for this config, sorted.
std::vector<std::string> record_keys(const ExperimentConfig& config);

/// 95% Wilson score interval for `successes` out of `trials`.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials);

/// `experiment,trial,seed,<keys>,metric,value,ci_low,ci_high,wall_ns`
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> keys);
  void write(const ResultRecord& record);

 private:
  std::ostream& os_;
  std::vector<std::string> keys_;
};

class JsonlWriter {
 public:
  explicit JsonlWriter(std::ostream& os) : os_(os) {}
  void write(const ResultRecord& record);

 private:
  std::ostream& os_;
};

/// Two columns plus CI, sorted by the numeric value of parameter `x_key`, over the trial
/// records whose metric is `y_key`. Throws InvalidArgument on mixed experiment ids or
/// records lacking `x_key`.
std::string emit_curve(const std::vector<ResultRecord>& records, const std::string& x_key, const std::string& y_key);

}  // namespace lowdeg::harness
