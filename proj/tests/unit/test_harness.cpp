#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "lowdeg/error.hpp"
#include "lowdeg/harness.hpp"
#include "lowdeg/rng.hpp"

using namespace lowdeg;
using namespace lowdeg::harness;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string config_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string csv_without_wall(const ExperimentConfig& cfg, unsigned threads) {
  RunOptions opts;
  opts.threads = threads;
  auto records = run(cfg, opts);
  std::ostringstream os;
  CsvWriter w(os, record_keys(cfg));
  for (auto& r : records) {
    r.wall_ns = 0;
    w.write(r);
  }
  return os.str();
}

const char* kIncoherence = R"(
# null batches
[experiment]
type = incoherence
seed = 17
trials = 6

[parameters]
n = 50
m = 20
epsilon = 0.05
)";

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  const auto cfg = parse(std::string(kIncoherence) + "; trailing comment\n");
  EXPECT_EQ(cfg.experiment, "incoherence");
  EXPECT_EQ(cfg.master_seed, 17u);
  EXPECT_EQ(cfg.trials, 6);
  EXPECT_EQ(cfg.parameters.at("n"), "50");
  EXPECT_EQ(cfg.parameters.at("epsilon"), "0.05");
  EXPECT_TRUE(cfg.output_path.empty());
  EXPECT_EQ(experiment_types().size(), 7u);
}

TEST(Config, ListsEveryProblem) {
  const auto msg = config_error("[experiment]\ntype = detect_relative\nseed = 1\ntrials = 0\n[parameters]\nd = 1\nalpha = 2\n");
  for (const char* needle : {"'trials' must be at least 1", "missing parameter 'n'", "missing parameter 'p'",
                             "missing parameter 'epsilon'", "missing parameter 'arm'", "'alpha'"})
    EXPECT_NE(msg.find(needle), std::string::npos) << needle << "\n" << msg;
}

TEST(Config, StructuralErrors) {
  EXPECT_NE(config_error("[experiment]\ntype = warp\nseed = 1\ntrials = 1\n").find("unknown experiment type"), std::string::npos);
  EXPECT_NE(config_error("[nope]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(config_error("x = 1\n").find("outside any section"), std::string::npos);
  EXPECT_NE(config_error("[experiment]\njunk\n").find("expected key = value"), std::string::npos);
  EXPECT_NE(config_error("[experiment]\nseed = 1\nseed = 2\n").find("duplicate key"), std::string::npos);
  EXPECT_NE(config_error("[experiment]\nseed = -3\n").find("'seed'"), std::string::npos);
  EXPECT_NE(config_error("[experiment]\n").find("missing 'type'"), std::string::npos);
  EXPECT_NE(config_error("[parameters]\nn = x\n[experiment]\ntype = incoherence\nseed = 1\ntrials = 1\n").find("'n'"),
            std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), IoError);
}

TEST(Config, LoadsFromFile) {
  const auto cfg = load_config(std::string(LOWDEG_TEST_DATA) + "/lda_curve.ini");
  EXPECT_EQ(cfg.experiment, "lda_curve");
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Run, OneTrialGivesTrialPlusAggregate) {
  auto cfg = parse(kIncoherence);
  cfg.trials = 1;
  const auto records = run(cfg);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].trial, 0);
  EXPECT_EQ(records[0].metric, "incoherence");
  EXPECT_EQ(records[1].trial, -1);
  EXPECT_EQ(records[1].metric, "mean_incoherence");
  EXPECT_EQ(records[1].value, records[0].value);
}

TEST(Run, SeedsAndDeterminism) {
  const auto cfg = parse(kIncoherence);
  const auto a = run(cfg);
  for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(a[t].seed, derive_seed(17, t));
  EXPECT_EQ(csv_without_wall(cfg, 1), csv_without_wall(cfg, 1));
  EXPECT_EQ(csv_without_wall(cfg, 1), csv_without_wall(cfg, 4));
}

TEST(Run, SinkSeesTrialOrderWithThreads) {
  auto cfg = parse(kIncoherence);
  cfg.trials = 12;
  std::vector<std::int64_t> seen;
  RunOptions opts;
  opts.threads = 3;
  opts.sink = [&](const ResultRecord& r) { seen.push_back(r.trial); };
  run(cfg, opts);
  std::vector<std::int64_t> want;
  for (int t = 0; t < 12; ++t) want.push_back(t);
  want.push_back(-1);
  EXPECT_EQ(seen, want);
}

TEST(Run, BinaryAggregateUsesWilson) {
  const auto cfg = parse(R"([experiment]
type = detect_relative
seed = 3
trials = 4
[parameters]
n = 40
d = 1
alpha = 0.2
p = 0
epsilon = 0
arm = null
m = 30
)");
  const auto r = run(cfg);
  ASSERT_EQ(r.size(), 5u);
  const auto& agg = r.back();
  EXPECT_EQ(agg.metric, "success_rate");
  std::size_t wins = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_TRUE(r[t].value == 0.0 || r[t].value == 1.0);
    wins += r[t].value == 1.0;
    EXPECT_TRUE(std::isnan(r[t].ci_low));
  }
  EXPECT_DOUBLE_EQ(agg.value, wins / 4.0);
  const auto [lo, hi] = wilson_interval(wins, 4);
  EXPECT_EQ(agg.ci_low, lo);
  EXPECT_EQ(agg.ci_high, hi);
}

TEST(Wilson, KnownValues) {
  const double z = 1.959963984540054;
  auto [lo, hi] = wilson_interval(0, 10);
  EXPECT_EQ(lo, 0.0);
  EXPECT_NEAR(hi, z * z / (10 + z * z), 1e-12);
  std::tie(lo, hi) = wilson_interval(10, 10);
  EXPECT_NEAR(lo, 10 / (10 + z * z), 1e-12);
  EXPECT_NEAR(hi, 1.0, 1e-15);
  std::tie(lo, hi) = wilson_interval(50, 100);
  EXPECT_NEAR(0.5 * (lo + hi), 0.5, 1e-12);
  EXPECT_NEAR(hi - lo, 2 * z * std::sqrt(0.25 / 100 + z * z / 40000) / (1 + z * z / 100), 1e-12);
}

TEST(Run, TrialErrorsCarryContext) {
  const auto cfg = parse(R"([experiment]
type = moment_match
seed = 1
trials = 1
[parameters]
k = 4
alpha = 0.1
samples = 100
grid_lambda = 1
grid_z = 1
)");
  try {
    run(cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("trial 0"), std::string::npos) << e.what();
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
}

TEST(Experiments, EveryTypeRuns) {
  const std::vector<std::string> configs = {
      "type = detect_additive\n[parameters]\nn = 60\nd = 0\nalpha = 0.3\np = 0\ndelta = 0.2\narm = planted\n",
      "type = moment_match\n[parameters]\nk = 2\nalpha = 0.1\nsamples = 20000\nmu1 = two_point\n",
      "type = tukey\n[parameters]\nk = 2\ndelta = 0.001\nsamples = 2000\n",
      "type = anticonc\n[parameters]\nl1 = 2\nl2 = 0\ndelta = 0.1\nsamples = 100000\n",
  };
  for (const auto& body : configs) {
    const auto cfg = parse("[experiment]\nseed = 5\ntrials = 2\n" + body);
    const auto r = run(cfg);
    ASSERT_EQ(r.size(), 3u) << body;
    for (const auto& rec : r) EXPECT_TRUE(std::isfinite(rec.value)) << body;
  }
  const auto mm = run(parse("[experiment]\nseed = 5\ntrials = 2\ntype = moment_match\n[parameters]\nk = 4\nalpha = 0.2\nsamples = 50000\n"));
  EXPECT_LT(mm[0].value, 5.0);
  const auto anti = run(parse("[experiment]\nseed = 5\ntrials = 1\ntype = anticonc\n[parameters]\nl1 = 2\nl2 = 0\ndelta = 0.1\nsamples = 100000\n"));
  EXPECT_NEAR(anti[0].value, 0.0505, 0.01);
}

TEST(Curve, LdaCurveMonotone) {
  const auto cfg = parse("[experiment]\ntype = lda_curve\nseed = 0\ntrials = 20\n[parameters]\nk_min = 1\nk_max = 20\nalpha = 0.1\n");
  const auto records = run(cfg, {4, {}});
  const auto csv = emit_curve(records, "k", "lda_exact");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "k,lda_exact,ci_low,ci_high");
  int rows = 0;
  double prev = -1.0;
  while (std::getline(is, line)) {
    ++rows;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    EXPECT_EQ(std::stoi(line.substr(0, c1)), rows);
    const double v = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_EQ(rows, 20);
  EXPECT_NE(config_error("[experiment]\ntype = lda_curve\nseed = 0\ntrials = 3\n[parameters]\nk_max = 20\nalpha = 0.1\n")
                .find("trials must equal"),
            std::string::npos);
}

TEST(Curve, EdgeCases) {
  EXPECT_EQ(emit_curve({}, "k", "v"), "k,v,ci_low,ci_high\n");
  ResultRecord a, b;
  a.experiment = "x";
  a.metric = "v";
  a.parameters["k"] = "2";
  b = a;
  b.experiment = "y";
  EXPECT_THROW(emit_curve({a, b}, "k", "v"), InvalidArgument);
  EXPECT_THROW(emit_curve({a}, "n", "v"), InvalidArgument);
  EXPECT_THROW(emit_curve({a}, "k", "w"), InvalidArgument);
  ResultRecord c = a;
  c.parameters["k"] = "1";
  c.value = 7;
  a.value = 3;
  a.ci_low = a.ci_high = std::nan("");
  c.ci_low = 6;
  c.ci_high = 8;
  EXPECT_EQ(emit_curve({a, c}, "k", "v"), "k,v,ci_low,ci_high\n1,7,6,8\n2,3,,\n");
}

TEST(Writers, CsvAndJsonl) {
  ResultRecord r;
  r.experiment = "incoherence";
  r.trial = 3;
  r.seed = 99;
  r.parameters = {{"m", "20"}, {"n", "a,b"}};
  r.metric = "incoherence";
  r.value = 0.25;
  r.ci_low = r.ci_high = std::nan("");
  r.wall_ns = 12;
  std::ostringstream csv;
  CsvWriter w(csv, {"m", "n"});
  w.write(r);
  r.trial = -1;
  w.write(r);
  EXPECT_EQ(csv.str(),
            "experiment,trial,seed,m,n,metric,value,ci_low,ci_high,wall_ns\n"
            "incoherence,3,99,20,\"a,b\",incoherence,0.25,,,12\n"
            "incoherence,aggregate,99,20,\"a,b\",incoherence,0.25,,,12\n");
  std::ostringstream js;
  JsonlWriter(js).write(r);
  EXPECT_EQ(js.str(),
            "{\"experiment\":\"incoherence\",\"trial\":\"aggregate\",\"seed\":99,\"parameters\":{\"m\":\"20\",\"n\":\"a,b\"},"
            "\"metric\":\"incoherence\",\"value\":0.25,\"ci_low\":null,\"ci_high\":null,\"wall_ns\":12}\n");
}

TEST(Writers, RecordKeysIncludeDegreeForCurves) {
  const auto cfg = parse("[experiment]\ntype = lda_curve\nseed = 0\ntrials = 2\n[parameters]\nk_max = 2\nalpha = 0.1\n");
  EXPECT_EQ(record_keys(cfg), (std::vector<std::string>{"alpha", "k", "k_max"}));
}
