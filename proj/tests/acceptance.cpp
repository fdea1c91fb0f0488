// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "fixtures.hpp"
#include "gwising/experiments.hpp"

namespace {

using namespace gwising;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string suite_detail(const SuiteReport& r) {
  std::string s = fmt("%s: %zu instances, max error %.3g", r.suite.c_str(), r.instances, r.max_error);
  if (!r.failures.empty()) s += " (first failure: " + r.failures.front() + ")";
  return s;
}

constexpr std::uint64_t kSeed = 20261017;

// The p-schedules lambda^n of the bound grid; k* sits near n/2, 0.32 n, 0.68 n.
constexpr double kGridLambdas[] = {0.70710678118654757, 0.625, 0.8};
constexpr int kGridDepths[] = {20, 40, 60};

Verdict lyons_exactness(int workers) {
  auto r = validate_lyons({kSeed, workers, {}}, 500);
  return {r.pass && r.instances == 500, suite_detail(r)};
}

Verdict pruning_equivalence(int workers) {
  auto r = validate_pruning({kSeed, workers, {}}, 500);
  return {r.pass && r.instances == 500, suite_detail(r)};
}

Verdict pruned_law_exactness() {
  auto r = validate_pruned_law();
  return {r.pass, suite_detail(r)};
}

Verdict gamma_identities() {
  bool ok = true;
  double worst_abs = 0.0, worst_log = 0.0;
  for (const auto& pmf : {OffspringPmf::dirac(2), OffspringPmf({{1, 0.5}, {3, 0.5}}),
                          OffspringPmf({{1, 0.5}, {2, 0.5}})}) {
    for (double p : {0.5, 0.3, 0.01, std::ldexp(1.0, -15)}) {
      GammaProfile g(pmf, p, 20);
      ok = ok && g.gamma_bar(0) == 1.0 - p;
      for (int j = 1; j <= 20; ++j) ok = ok && g.gamma_bar(j) == pmf.generating_function(g.gamma_bar(j - 1));
    }
  }
  for (double p : {0.5, 0.3, 0.01, std::ldexp(1.0, -15)}) {
    GammaProfile g(OffspringPmf::dirac(2), p, 20);
    const double log_bar0 = std::log(g.gamma_bar(0));
    for (int k = 0; k <= 20; ++k) {
      const double log_closed = std::ldexp(log_bar0, k);  // log (1-p)^{2^k}
      worst_abs = std::max(worst_abs, std::abs(g.gamma_bar(k) - std::exp(log_closed)));
      worst_log = std::max(worst_log, std::abs(g.log_gamma_bar(k) - log_closed) / std::max(1.0, std::abs(log_closed)));
    }
  }
  ok = ok && worst_abs <= 1e-12 && worst_log <= 1e-12;
  return {ok, fmt("recursion exact; closed form max abs error %.3g, log relative %.3g", worst_abs, worst_log)};
}

Verdict phase_bounds(const std::vector<fixtures::FrozenLaw>& laws) {
  int cases = 0, failed = 0;
  for (const auto& f : laws)
    for (double lambda : kGridLambdas)
      for (int n : kGridDepths) {
        ++cases;
        GammaProfile g(f.pmf, std::pow(lambda, n), n);
        if (!check_phase_bounds(g, f.constants, f.q).all()) ++failed;
      }
  return {failed == 0, fmt("%d of %d (law, q, schedule, n) cases violate a bound", failed, cases)};
}

Verdict moment_bounds(const std::vector<fixtures::FrozenLaw>& laws) {
  int cases = 0, failed = 0;
  double max_v = 0.0;
  for (const auto& f : laws)
    for (double lambda : kGridLambdas)
      for (int n : kGridDepths) {
        ++cases;
        PrunedLaw law(GammaProfile(f.pmf, std::pow(lambda, n), n));
        PrunedMoments mom(law, f.q);
        auto r = check_moment_bounds(law, mom, f.constants);
        max_v = std::max(max_v, r.max_v);
        if (!r.all()) ++failed;
      }
  return {failed == 0, fmt("%d of %d cases violate an identity or bound; max v* %.4g", failed, cases, max_v)};
}

Verdict capacity_oracle(const std::vector<SuiteReport>& capacity) {
  auto spherical = validate_spherical();
  return {capacity[0].pass && spherical.pass, suite_detail(capacity[0]) + "; " + suite_detail(spherical)};
}

Verdict expectation_bound(int workers) {
  std::string detail;
  bool ok = true;
  for (const auto& [name, pmf] : {std::pair{"dirac2", OffspringPmf::dirac(2)},
                                  std::pair{"one_or_three", OffspringPmf({{1, 0.5}, {3, 0.5}})}}) {
    auto cfg = ExperimentConfig::defaults(ScanMode::Capacity);
    cfg.base_pmf = pmf;
    cfg.beta = 0.8;
    cfg.capacity_p = 1.5;
    cfg.schedule = {PSchedule::Kind::Geometric, 1.0, std::sqrt(0.5)};
    cfg.n_grid = {8, 12, 16};
    cfg.replicas = 10000;
    cfg.master_seed = kSeed;
    auto scan = run_capacity_scan(cfg, workers);
    for (const auto& row : scan.summary.rows) {
      const double mean = std::stod(row[3]), se = std::stod(row[4]), bound = std::stod(row[10]);
      const bool here = mean <= bound + 3 * se;
      ok = ok && here;
      detail += fmt("%s%s n=%s mean %.4f vs bound %.4f", detail.empty() ? "" : "; ", name,
                    row[0].c_str(), mean, bound);
    }
  }
  return {ok, detail};
}

Verdict threshold_phenomenology(int workers) {
  auto cfg = ExperimentConfig::defaults(ScanMode::Magnetization);
  cfg.base_pmf = OffspringPmf::dirac(2);
  cfg.beta = std::atanh(0.8);  // nu tanh b = 1.6
  cfg.field_mode = FieldMode::WholeTree;
  cfg.n_grid = {10, 14, 18, 22};
  cfg.replicas = 2000;
  cfg.epsilon = 0.05;
  cfg.epsilon_sweep = {};
  cfg.master_seed = kSeed;

  auto column = [](const Table& t, const std::string& name) {
    auto it = std::find(t.columns.begin(), t.columns.end(), name);
    std::vector<double> out;
    for (const auto& row : t.rows) out.push_back(std::stod(row[it - t.columns.begin()]));
    return out;
  };

  // (a) at the threshold the probability of magnetization stays put
  cfg.schedule = {PSchedule::Kind::Threshold, 1.0, 1.0};
  auto at = column(run_magnetization_scan(cfg, workers).table, "p_m_gt_0.05");
  auto [lo, hi] = std::minmax_element(at.begin(), at.end());
  const bool stable = *hi - *lo <= 0.1;

  // (b) below it, by a factor 0.7^n, it dies out
  cfg.schedule = {PSchedule::Kind::ThresholdTimes, 1.0, 0.7};
  auto below = run_magnetization_scan(cfg, workers).table;
  auto pm = column(below, "p_m_gt_0.05");
  bool decreasing = true;
  for (std::size_t i = 1; i < pm.size(); ++i) decreasing = decreasing && pm[i] < pm[i - 1];
  const bool vanishing = decreasing && pm.back() < 0.05;

  // (c) least-squares slope of log mean r against n
  auto mean_r = column(below, "mean_r");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(mean_r.size());
  for (std::size_t i = 0; i < mean_r.size(); ++i) {
    const double x = cfg.n_grid[i], y = std::log(mean_r[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double target = std::log(0.7);
  const bool rate = std::abs(slope - target) <= 0.2 * std::abs(target);

  return {stable && vanishing && rate,
          fmt("(a) P(m>0.05) in [%.4f, %.4f] %s; (b) %.4f %.4f %.4f %.4f %s; (c) slope %.4f vs log 0.7 = %.4f %s",
              *lo, *hi, stable ? "ok" : "FAIL", pm[0], pm[1], pm[2], pm[3], vanishing ? "ok" : "FAIL",
              slope, target, rate ? "ok" : "FAIL")};
}

Verdict ratio_stability(int workers) {
  constexpr std::size_t kRandomTrees = 600;
  bool ok = true;
  std::string detail;
  for (double beta : {0.3, 0.8, 1.2}) {
    auto fit = ratio_capacity_corpus(kSeed, beta, kRandomTrees, workers);
    auto [lo, hi] = std::minmax_element(fit.begin(), fit.end());
    // widen the width by 10%, half on each side
    const double pad = 0.05 * (*hi - *lo);
    auto fresh = ratio_capacity_corpus(kSeed + 1, beta, kRandomTrees, workers);
    std::size_t outside = 0;
    for (double r : fresh) outside += r < *lo - pad || r > *hi + pad;
    ok = ok && outside == 0 && *lo > 0.0;
    detail += fmt("%sbeta %.1f: [%.4f, %.4f], %zu of %zu fresh outside", detail.empty() ? "" : "; ",
                  beta, *lo, *hi, outside, fresh.size());
  }
  return {ok, detail};
}

Verdict tv_crossing() {
  int tested = 0, off = 0, bound_violations = 0;
  double worst = 0.0;
  for (const auto& pmf : {OffspringPmf::dirac(2), OffspringPmf({{1, 0.5}, {3, 0.5}}),
                          OffspringPmf({{1, 0.5}, {2, 0.5}}), OffspringPmf::dirac(3)})
    for (double lambda : kGridLambdas)
      for (int n : kGridDepths) {
        auto c = tv_curve(pmf, std::pow(lambda, n), n);
        for (int k = 0; k < n; ++k)
          if (k >= c.k_star && c.to_dirac1[k] > c.dirac_bound[k] * (1 + 1e-12)) ++bound_violations;
        if (c.k_star < 10) continue;
        ++tested;
        const double d = std::abs(c.crossing - c.k_star);
        worst = std::max(worst, d);
        off += d > 5.0;
      }
  return {off == 0 && bound_violations == 0 && tested > 0,
          fmt("%d curves with k* >= 10, max |crossing - k*| = %.2f, %d outside +-5; %d Dirac-bound violations",
              tested, worst, off, bound_violations)};
}

Verdict determinism() {
  std::vector<std::string> mismatched;
  auto compare = [&](const std::string& what, const std::function<std::string(int)>& run) {
    const std::string one = run(1);
    for (int w : {2, 5})
      if (run(w) != one) mismatched.push_back(what + " @" + std::to_string(w));
  };
  auto mag = ExperimentConfig::defaults(ScanMode::Magnetization);
  mag.n_grid = {8, 12};
  mag.replicas = 400;
  mag.master_seed = kSeed;
  compare("magnetization", [&](int w) { return run_magnetization_scan(mag, w).table.to_csv(); });
  auto general = mag;
  general.base_pmf = OffspringPmf({{1, 0.5}, {3, 0.5}});
  general.field_mode = FieldMode::LeavesOnly;
  compare("magnetization-gw", [&](int w) { return run_magnetization_scan(general, w).table.to_csv(); });
  auto cap = ExperimentConfig::defaults(ScanMode::Capacity);
  cap.n_grid = {6, 10};
  cap.replicas = 300;
  cap.master_seed = kSeed;
  compare("capacity", [&](int w) {
    auto s = run_capacity_scan(cap, w);
    return s.replicas.to_csv() + s.summary.to_csv();
  });
  compare("validation", [&](int w) {
    return validation_report_json(run_validation({kSeed, w, {}})).dump();
  });
  // single-threaded scans still have to reproduce
  auto gamma = ExperimentConfig::defaults(ScanMode::Gamma);
  compare("gamma", [&](int) { return run_gamma_scan(gamma).bounds.to_csv(); });
  auto tv = ExperimentConfig::defaults(ScanMode::Tv);
  compare("tv", [&](int) { return run_tv_scan(tv).curves.to_csv(); });
  std::string detail = mismatched.empty() ? "6 scans byte-identical at 1, 2 and 5 workers" : "differs:";
  for (const auto& m : mismatched) detail += " " + m;
  return {mismatched.empty(), detail};
}

}  // namespace

int main() {
  const int workers = resolve_workers(std::nullopt);
  const auto laws = fixtures::load_phase_constants();
  std::vector<SuiteReport> capacity;
  bool all = true;

  auto report = [&](int id, const char* name, double limit_seconds, const std::function<Verdict()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_seconds > 0 && secs > limit_seconds) {
      v.pass = false;
      v.detail += fmt("; exceeded the %.0f s budget", limit_seconds);
    }
    all = all && v.pass;
    std::printf("%s criterion %2d  %-32s %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", id, name,
                v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "lyons recursion exactness", 60, [&] { return lyons_exactness(workers); });
  report(2, "pruning equivalence", 60, [&] { return pruning_equivalence(workers); });
  report(3, "pruned law exactness", 60, [] { return pruned_law_exactness(); });
  report(4, "gamma iteration identities", 0, [] { return gamma_identities(); });
  report(5, "phase-transition bounds", 10, [&] { return phase_bounds(laws); });
  report(6, "moment and growth bounds", 0, [&] { return moment_bounds(laws); });
  report(7, "capacity recursion vs oracle", 300, [&] {
    capacity = validate_capacity(capacity_instances({kSeed, workers, {}}, 50));
    return capacity_oracle(capacity);
  });
  report(8, "thomson dominance", 0, [&] { return Verdict{capacity.at(1).pass, suite_detail(capacity.at(1))}; });
  report(9, "capacity monotone in p", 0, [&] { return Verdict{capacity.at(2).pass, suite_detail(capacity.at(2))}; });
  report(10, "expected capacity bound", 600, [&] { return expectation_bound(workers); });
  report(11, "threshold phenomenology", 1800, [&] { return threshold_phenomenology(workers); });
  report(12, "lyons/capacity ratio stability", 0, [&] { return ratio_stability(workers); });
  report(13, "tv crossing near k*", 0, [] { return tv_crossing(); });
  report(14, "determinism across workers", 0, [] { return determinism(); });

  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
