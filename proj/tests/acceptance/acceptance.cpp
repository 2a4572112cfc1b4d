// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 when any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lowdeg/detect.hpp"
#include "lowdeg/distributions.hpp"
#include "lowdeg/harness.hpp"
#include "lowdeg/lda.hpp"
#include "lowdeg/momentmatch.hpp"
#include "lowdeg/orthopoly.hpp"

using namespace lowdeg;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += "[violated: " + what + "] ";
    }
  }
  void note(const std::string& s) { detail += s + " "; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double c(int l) { return dist::gaussian_moment(l); }

// Monte Carlo mean and standard error of f over the rows of a batch.
std::pair<double, double> row_mean(const dist::SampleBatch& b, const std::function<double(Eigen::Index)>& f) {
  double s = 0.0, s2 = 0.0;
  const auto n = static_cast<double>(b.rows());
  for (Eigen::Index r = 0; r < b.data.rows(); ++r) {
    const double v = f(r);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt(std::max(s2 / n - m * m, 0.0) / n)};
}

// He_m / sqrt(m!) from the explicit alternating sum, in long double.
std::vector<long double> hermite_closed_form(int m) {
  std::vector<long double> out(static_cast<std::size_t>(m + 1), 0.0L);
  const long double mf = std::tgamma(static_cast<long double>(m + 1));
  for (int j = 0; 2 * j <= m; ++j) {
    const long double t = mf / (std::tgamma(static_cast<long double>(j + 1)) *
                                std::tgamma(static_cast<long double>(m - 2 * j + 1)) * std::pow(2.0L, j));
    out[static_cast<std::size_t>(m - 2 * j)] = (j % 2 ? -t : t) / std::sqrt(mf);
  }
  return out;
}

Outcome criterion1() {
  Outcome o;
  double orth = 0.0;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) {
      const auto prod = ortho::hermite_normalized(i) * ortho::hermite_normalized(j);
      double e = 0.0;
      for (std::size_t p = 0; p < prod.coeffs.size(); ++p) e += prod.coeffs[p] * c(static_cast<int>(p));
      orth = std::max(orth, std::abs(e - (i == j ? 1.0 : 0.0)));
    }
  double coeff_abs = 0.0, coeff_rel = 0.0;
  for (int m = 0; m <= 30; ++m) {
    const auto h = ortho::hermite_normalized(m);
    const auto ref = hermite_closed_form(m);
    long double scale = 0.0L;
    for (auto v : ref) scale = std::max(scale, std::abs(v));
    for (int e = 0; e <= m; ++e) {
      const double diff = std::abs(h.coeffs[static_cast<std::size_t>(e)] - static_cast<double>(ref[static_cast<std::size_t>(e)]));
      coeff_abs = std::max(coeff_abs, diff);
      coeff_rel = std::max(coeff_rel, diff / static_cast<double>(scale));
    }
  }
  o.note("max|E[h_i h_j]-delta|=" + fmt("%.2e", orth) + " max coeff err abs=" + fmt("%.2e", coeff_abs) +
         " rel=" + fmt("%.2e", coeff_rel));
  o.require(orth <= 1e-9, "orthonormality within 1e-9");
  o.require(coeff_abs <= 1e-10, "recurrence vs closed form within 1e-10");
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto b = dist::sample_null({2}, 1000000, 20240101);
  double worst = 0.0;
  for (int l1 = 0; l1 <= 6; ++l1)
    for (int l2 = 0; l1 + l2 <= 6; ++l2) {
      if (l1 + l2 == 0) continue;
      const auto [m, se] = row_mean(b, [&](Eigen::Index r) { return std::pow(b.data(r, 0), l1) * std::pow(b.data(r, 1), l2); });
      const double truth = (l1 % 2 == 0 && l2 % 2 == 0) ? c(l1) * c(l2) * c(l1 + l2) : 0.0;
      const double z = std::abs(m - truth) / se;
      worst = std::max(worst, z);
      o.require(z <= 5.0, "pair (" + std::to_string(l1) + "," + std::to_string(l2) + ") z=" + fmt("%.2f", z));
    }
  o.note("27 pairs, max |z|=" + fmt("%.2f", worst));
  return o;
}

Outcome criterion3() {
  Outcome o;
  double worst = 0.0;
  for (int k = 1; k <= 8; ++k) {
    std::vector<std::pair<int, int>> mono;
    for (int a = 0; a <= k; ++a)
      for (int b = 0; a + b <= k; ++b)
        if (a + b > 0) mono.emplace_back(a, b);
    const auto n = static_cast<Eigen::Index>(mono.size());
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> g(n, n);
    Eigen::Matrix<long double, Eigen::Dynamic, 1> mean(n);
    for (Eigen::Index i = 0; i < n; ++i) mean(i) = c(mono[i].first) * c(mono[i].second);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        g(i, j) = c(mono[i].first + mono[j].first) * c(mono[i].second + mono[j].second) - mean(i) * mean(j);
    const double rayleigh = static_cast<double>(std::sqrt(mean.dot(g.ldlt().solve(mean))));
    worst = std::max(worst, std::abs(rayleigh - lda::mean_var_ratio_max(k)));
  }
  const double witness = 2.0 / std::sqrt(2.0 * (c(4) - 1.0));
  bool stirling = true;
  for (int k = 0; k <= 30; ++k)
    stirling = stirling && lda::mean_var_ratio_max(k) <= lda::mean_var_ratio_stirling_bound(k) + 1e-9;
  o.note("max |closed form - Rayleigh| (k<=8)=" + fmt("%.2e", worst) + " value(2)=" + fmt("%.17g", lda::mean_var_ratio_max(2)) +
         " witness ratio=" + fmt("%.17g", witness));
  o.require(worst <= 1e-7, "agreement with numerical maximization within 1e-7");
  o.require(lda::mean_var_ratio_max(2) == 1.0 && witness == 1.0, "exactly 1 at k=2 with witness lambda^2+g^2");
  o.require(stirling, "Stirling bound for k<=30");
  return o;
}

Outcome criterion4() {
  Outcome o;
  const double v = lda::lda_single_pointmass(dist::ScaleLaw::standard_normal(), 0.1, 2).value;
  const double target = 0.1 / std::sqrt(8.0);
  double worst = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double K = ortho::christoffel_sum(ortho::build_basis(ortho::product_normal_oracle(), k), 0.0);
    worst = std::max(worst, (K - 1.0) / k);
  }
  o.note("LDA(0.1,2)=" + fmt("%.17g", v) + " |diff|=" + fmt("%.2e", std::abs(v - target)) +
         " max_k (K_k-1)/k=" + fmt("%.4f", worst));
  o.require(std::abs(v - target) <= 1e-10, "lda_single_pointmass(0.1,2) = 0.1/sqrt(8)");
  o.require(worst <= 4.0, "(K_k-1)/k <= 4 for k<=20");
  return o;
}

Outcome criterion5() {
  Outcome o;
  std::mt19937_64 gen(5150);
  std::uniform_real_distribution<double> pos(-2.0, 2.0);
  std::exponential_distribution<double> ex(1.0);
  double worst_gap = -1e300, worst_m1 = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int s = 2 + static_cast<int>(gen() % 4);
    Matrix pts(s, 1);
    std::vector<double> qw(static_cast<std::size_t>(s)), pw(static_cast<std::size_t>(s));
    double qs = 0.0, ps = 0.0;
    for (int i = 0; i < s; ++i) {
      pts(i, 0) = pos(gen);
      qw[static_cast<std::size_t>(i)] = ex(gen);
      pw[static_cast<std::size_t>(i)] = ex(gen);
      qs += qw[static_cast<std::size_t>(i)];
      ps += pw[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < s; ++i) {
      qw[static_cast<std::size_t>(i)] /= qs;
      pw[static_cast<std::size_t>(i)] /= ps;
    }
    const DiscreteMeasure q(pts, qw), p(pts, pw);
    const int k = 1 + static_cast<int>(gen() % 3), m = 1 + static_cast<int>(gen() % 3);
    const double one = lda::lda_bruteforce(p, q, k, 1).value;
    const double many = lda::lda_bruteforce(p, q, k, m).value;
    worst_gap = std::max(worst_gap, many - lda::lift_bound(one, m));
    if (m == 1) worst_m1 = std::max(worst_m1, std::abs(many - lda::lift_bound(one, 1)));
  }
  o.note("max LDA(m) - lift bound=" + fmt("%.3e", worst_gap) + " max m=1 gap=" + fmt("%.2e", worst_m1));
  o.require(worst_gap <= 1e-9, "lifting bound on 100 instances");
  o.require(worst_m1 <= 1e-6, "equality at m=1");
  return o;
}

Outcome criterion6() {
  Outcome o;
  const Matrix grid = mm::default_grid();
  const auto delta0 = DiscreteMeasure::point_mass_1d(0.0);
  for (int k : {2, 4}) {
    const auto theta = mm::target_vector(k, 1e-4, delta0);
    const double r = mm::moment_residual(mm::solve_mu2(grid, theta), theta);
    o.note("k=" + std::to_string(k) + " residual(alpha=1e-4)=" + fmt("%.2e", r));
    o.require(r <= 1e-8, "residual at k=" + std::to_string(k));
  }
  const auto best = mm::max_alpha(2, grid, delta0, 1e-4);
  o.note("max_alpha(2)=" + fmt("%.6g", best.value));
  o.require(best.value >= 1e-4, "max_alpha(k=2) >= 1e-4");
  for (int k : {2, 4}) {
    const double alpha = mm::max_alpha(k, grid, delta0, 1e-4).value;
    const auto spec = mm::assemble_planted(k, grid, delta0, alpha, 3);
    const auto b = dist::sample_planted(spec, 1000000, derive_seed(66, static_cast<std::uint64_t>(k)));
    double worst = 0.0;
    for (int l1 = 0; l1 <= k; ++l1)
      for (int l2 = 0; l1 + l2 <= k; ++l2) {
        if (l1 + l2 == 0) continue;
        const auto [m, se] = row_mean(b, [&](Eigen::Index r) { return std::pow(b.data(r, 0), l1) * std::pow(b.data(r, 2), l2); });
        const double z = std::abs(m - dist::q_mixed_moment(l1, l2)) / se;
        worst = std::max(worst, z);
      }
    o.note("k=" + std::to_string(k) + " alpha=" + fmt("%.4g", alpha) + " max |z|=" + fmt("%.2f", worst));
    o.require(worst <= 5.0, "end-to-end moments at k=" + std::to_string(k));
  }
  return o;
}

harness::ExperimentConfig detection_config(const std::string& type, const std::string& arm, const std::string& strategy,
                                           std::uint64_t seed) {
  harness::ExperimentConfig cfg;
  cfg.experiment = type;
  cfg.master_seed = seed;
  cfg.trials = 200;
  cfg.parameters = {{"arm", arm}, {"strategy", strategy}};
  return cfg;
}

double success_rate(const harness::ExperimentConfig& cfg) {
  const auto records = harness::run(cfg);
  return records.back().value;
}

Outcome criterion7() {
  Outcome o;
  std::uint64_t seed = 700;
  for (const std::string strategy : {"random_direction", "evade", "spoof"})
    for (const std::string arm : {"planted", "null"}) {
      auto cfg = detection_config("detect_relative", arm, strategy, ++seed);
      cfg.parameters.insert({{"n", "200"}, {"d", "1"}, {"alpha", "0.05"}, {"p", "0.2"}, {"epsilon", "0.0625"}, {"m", "500"}});
      const double rate = success_rate(cfg);
      o.note(strategy + "/" + arm + "=" + fmt("%.3f", rate));
      o.require(rate >= 0.95, strategy + " " + arm + " arm >= 0.95");
    }
  return o;
}

Outcome criterion8() {
  Outcome o;
  const double eta = detect::additive_budget(0.05, 0.0, 0.1, 400, 0, 64.0);
  o.note("eta=tau=" + fmt("%.6g", eta) + " |J|=" + std::to_string(detect::additive_subsample_size(0, 0.05, 0.0, 0.1)));
  std::uint64_t seed = 800;
  for (const std::string strategy : {"random_direction", "spoof"})
    for (const std::string arm : {"planted", "null"}) {
      auto cfg = detection_config("detect_additive", arm, strategy, ++seed);
      cfg.parameters.insert({{"n", "400"}, {"d", "0"}, {"alpha", "0.05"}, {"p", "0"}, {"delta", "0.1"},
                             {"c_threshold", "64"}, {"C", "64"}});
      const double rate = success_rate(cfg);
      o.note(strategy + "/" + arm + "=" + fmt("%.3f", rate));
      o.require(rate >= 0.90, strategy + " " + arm + " arm >= 0.90");
    }
  return o;
}

Outcome criterion9() {
  Outcome o;
  const mm::MomentIndexSet idx(2);
  const Vector v = mm::phi_features(1.0, 1.0, idx).values;
  const mm::FeatureSampler two_point = [v](Stream& rng) -> Vector { return (rng() & 1u) ? v : Vector(-v); };
  Matrix draws(2, 4000);
  for (Eigen::Index i = 0; i < draws.cols(); ++i) {
    Stream rng(9, stream_id::caratheodory, static_cast<std::uint64_t>(i));
    draws.col(i) = two_point(rng);
  }
  const Vector theta = Vector::Zero(2);
  const auto depth = mm::tukey_depth(draws, theta, 1000, 91);
  const auto at7 = mm::caratheodory_test(theta, two_point, 2, 0.5, 200, 92, std::size_t{7});
  const auto at_formula = mm::caratheodory_test(theta, two_point, 2, 0.5, 200, 93);
  o.note("two-point depth upper=" + fmt("%.3f", depth.upper) + " freq(m=7)=" + fmt("%.3f", at7.frequency) +
         " freq(m=" + std::to_string(at_formula.points_per_trial) + ")=" + fmt("%.3f", at_formula.frequency));
  o.require(std::abs(depth.upper - 0.5) <= 0.05, "two-point depth estimate near 1/2");
  o.require(at7.frequency >= 0.4, "membership frequency >= 0.4 at m=7");

  for (int k : {2, 4}) {
    const mm::MomentIndexSet kidx(k);
    const Matrix f = mm::sample_nu_features(kidx, 20000, derive_seed(94, static_cast<std::uint64_t>(k)));
    const Vector shifted = 1.001 * mm::nu_mean(kidx).values;
    const auto d = mm::tukey_depth(f, shifted, 2000, 95);
    o.note("k=" + std::to_string(k) + " depth of 1.001 E[Phi] in [" + fmt("%.4f", d.lower) + "," + fmt("%.4f", d.upper) + "]");
    o.require(d.lower > 0.0, "positive depth at confidence 1e-3 for k=" + std::to_string(k));
  }
  return o;
}

Outcome criterion10() {
  Outcome o;
  std::vector<double> ratios;
  for (int i = 1; i <= 10; ++i) {
    const double gamma = 0.02 * i;
    ratios.push_back(dist::small_ball_estimate(gamma, 100, 200000, derive_seed(1000, static_cast<std::uint64_t>(i))).value / gamma);
  }
  double mean = 0.0;
  for (double r : ratios) mean += r / ratios.size();
  double spread = 0.0;
  for (double r : ratios) spread = std::max(spread, std::abs(r / mean - 1.0));
  o.note("small-ball P/gamma mean=" + fmt("%.4f", mean) + " max deviation=" + fmt("%.1f%%", 100 * spread));
  o.require(spread <= 0.2, "small-ball ratio within +-20%");

  const std::size_t n = 200, m = 100;
  const double scale = std::sqrt(std::log(static_cast<double>(m))) / std::sqrt(static_cast<double>(n));
  auto fit = [&](std::uint64_t base, std::vector<dist::SampleBatch>* keep) {
    double cmax = 0.0;
    for (int s = 0; s < 20; ++s) {
      auto b = dist::sample_null({n}, m, derive_seed(base, static_cast<std::uint64_t>(s)));
      cmax = std::max(cmax, detect::incoherence(b) / scale);
      if (keep) keep->push_back(std::move(b));
    }
    return cmax;
  };
  std::vector<dist::SampleBatch> batches;
  const double c1 = fit(2000, &batches), c2 = fit(3000, nullptr);
  const double eps = 0.05;
  bool bounded = true, perturbed = true;
  for (std::size_t s = 0; s < batches.size(); ++s) {
    bounded = bounded && detect::incoherence(batches[s]) <= c1 * scale + 1e-12;
    const detect::NoiseModel model{0.0, detect::BudgetKind::relative, eps, detect::Strategy::random_direction};
    const double noisy = detect::incoherence(detect::apply_noise(batches[s], model, std::nullopt, derive_seed(4000, s)));
    perturbed = perturbed && noisy <= (c1 * scale + 2 * eps + eps * eps) / ((1 - eps) * (1 - eps)) + 1e-9;
  }
  o.note("incoherence constant c=" + fmt("%.4f", c1) + " repeat c=" + fmt("%.4f", c2));
  o.require(bounded, "null incoherence <= c sqrt(log m)/sqrt(n) with the fitted c on 20 seeds");
  o.require(perturbed, "epsilon=0.05 perturbed incoherence within the corrupted display");
  o.require(std::abs(c2 / c1 - 1.0) <= 0.2, "fitted constant stable within +-20% on a second seed set");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"Hermite identities", 1, criterion1},
      {"Q moment oracle", 10, criterion2},
      {"Mean/variance extremal value", 60, criterion3},
      {"Single-sample LDA", 60, criterion4},
      {"Lifting lemma", 60, criterion5},
      {"Constructive moment matching", 120, criterion6},
      {"Detection, relative model", 300, criterion7},
      {"Detection, additive model", 300, criterion8},
      {"Tukey/Caratheodory", 120, criterion9},
      {"Small-ball and incoherence scaling", 120, criterion10},
  };
  int failures = 0;
  int number = 0;
  for (const auto& c : criteria) {
    ++number;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail += std::string("[exception: ") + e.what() + "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) o.require(false, "runtime " + fmt("%.1f", secs) + " s over " + fmt("%.0f", c.budget_s) + " s");
    std::printf("%s %2d %-36s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", number, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
