#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gwising/experiments.hpp"

using namespace gwising;
using nlohmann::json;

namespace {

std::pair<double, double> mean_se_of(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double n = static_cast<double>(xs.size());
  double mean = sum / n, ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace

TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);

  for (int workers : {1, 3}) {
    try {
      parallel_for(100, workers, [](std::size_t i) {
        if (i == 17 || i == 60) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected a throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}

TEST_CASE("worker resolution") {
  CHECK(resolve_workers(3) == 3);
  CHECK_THROWS_AS(resolve_workers(0), ConfigError);
  ::setenv("GWISING_WORKERS", "2", 1);
  CHECK(resolve_workers(std::nullopt) == 2);
  ::setenv("GWISING_WORKERS", "two", 1);
  CHECK_THROWS_AS(resolve_workers(std::nullopt), ConfigError);
  ::unsetenv("GWISING_WORKERS");
  CHECK(resolve_workers(std::nullopt) >= 1);
}

TEST_CASE("csv formatting and atomic writes") {
  Table t;
  t.columns = {"a", "b"};
  t.add_row({cell(0.1), cell(3)});
  CHECK(t.to_csv() == "a,b\n0.10000000000000001,3\n");
  CHECK_THROWS(t.add_row({"x"}));
  CHECK(cell(true) == "1");

  auto dir = std::filesystem::temp_directory_path() / "gwising_atomic_test";
  std::filesystem::remove_all(dir);
  auto path = (dir / "nested" / "out.csv").string();
  write_file_atomic(path, "hello\n");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "hello");
  std::size_t entries = 0;
  for (auto& e : std::filesystem::directory_iterator(dir / "nested")) (void)e, ++entries;
  CHECK(entries == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("wilson interval") {
  auto ci = wilson_interval(50, 100);
  CHECK(ci.lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(ci.hi == doctest::Approx(0.5962).epsilon(1e-3));
  auto zero = wilson_interval(0, 20);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == doctest::Approx(0.1611).epsilon(1e-3));
  auto all = wilson_interval(20, 20);
  CHECK(all.hi == 1.0);
}

TEST_CASE("p schedules") {
  const double beta = std::atanh(0.8), nu = 2.0;
  PSchedule c{PSchedule::Kind::Constant, 0.3, 1.0};
  CHECK(c.value(7, nu, beta) == 0.3);
  PSchedule g{PSchedule::Kind::Geometric, 1.0, 0.5};
  CHECK(g.value(3, nu, beta) == doctest::Approx(0.125));
  PSchedule th{PSchedule::Kind::Threshold, 1.0, 1.0};
  CHECK(th.value(4, nu, beta) == doctest::Approx(std::pow(1.6, -4)));
  PSchedule tt{PSchedule::Kind::ThresholdTimes, 2.0, 0.9};
  CHECK(tt.value(5, nu, beta) == doctest::Approx(2.0 * std::pow(0.9 / 1.6, 5)));
  for (const auto& s : {c, g, th, tt}) {
    auto back = PSchedule::from_json(s.to_json());
    CHECK(back.value(6, nu, beta) == s.value(6, nu, beta));
  }
  CHECK_THROWS_AS(PSchedule::from_json(json{{"kind", "linear"}}), ConfigError);
  CHECK_THROWS_AS(PSchedule::from_json(json{{"kind", "geometric"}}), ConfigError);
  CHECK_THROWS_AS(PSchedule::from_json(json{{"kind", "constant"}, {"c", 0.5}, {"x", 1}}),
                  ConfigError);
}

TEST_CASE("config parsing") {
  json good = {{"schema", 1},
               {"mode", "magnetization"},
               {"pmf", "one_or_three"},
               {"beta", 0.7},
               {"p_schedule", {{"kind", "constant"}, {"c", 0.25}}},
               {"n_grid", {4, 6}},
               {"replicas", 10},
               {"field_mode", "leaves_only"}};
  auto cfg = ExperimentConfig::from_json(good, ScanMode::Magnetization);
  CHECK(cfg.base_pmf.mean() == 2.0);
  CHECK(cfg.p_n(4) == 0.25);
  CHECK(cfg.field_mode == FieldMode::LeavesOnly);
  auto again = ExperimentConfig::from_json(cfg.to_json(), ScanMode::Magnetization);
  CHECK(again.to_json() == cfg.to_json());

  auto bad = [&](const char* key, json value) {
    json j = good;
    j[key] = value;
    return j;
  };
  CHECK_THROWS_AS(ExperimentConfig::from_json(json::object(), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("schema", 2), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("bogus", 1), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(good, ScanMode::Capacity), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("replicas", 0), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("beta", -1), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("n_grid", json::array()), ScanMode::Magnetization),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("pmf", "dirac0"), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad("replicas", "ten"), ScanMode::Magnetization), ConfigError);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json(bad("p_schedule", {{"kind", "constant"}, {"c", 1.5}}),
                                  ScanMode::Magnetization),
      ConfigError);
  // beta = 0 only for magnetization
  json zero = bad("beta", 0.0);
  CHECK_NOTHROW(ExperimentConfig::from_json(zero, ScanMode::Magnetization));
  zero["mode"] = "capacity";
  CHECK_THROWS_AS(ExperimentConfig::from_json(zero, ScanMode::Capacity), ConfigError);
  // a subcritical base law is rejected where k* is needed
  json sub = {{"schema", 1}, {"pmf", "dirac1"}};
  CHECK_THROWS_AS(ExperimentConfig::from_json(sub, ScanMode::Gamma), ConfigError);
  CHECK(named_pmf("dirac3").mean() == 3.0);
}

TEST_CASE("bernoulli index sampling") {
  RandomStream rng(3);
  auto none = sample_bernoulli_indices(0, 100, 0.0, rng);
  CHECK(none.empty());
  auto all = sample_bernoulli_indices(5, 15, 1.0, rng);
  REQUIRE(all.size() == 10);
  CHECK(all.front() == 5);
  CHECK(all.back() == 14);
  std::size_t total = 0;
  for (int rep = 0; rep < 200; ++rep) {
    auto v = sample_bernoulli_indices(0, 1000, 0.1, rng);
    CHECK(std::is_sorted(v.begin(), v.end()));
    if (!v.empty()) CHECK(v.back() < 1000);
    total += v.size();
  }
  CHECK(std::abs(static_cast<double>(total) / 200 - 100.0) < 3.0);
}

TEST_CASE("sparse root ratio matches lyons_field bit for bit") {
  RandomStream rng(11);
  for (int degree : {1, 2, 3}) {
    for (int n : {0, 1, 3, 6}) {
      Tree t = Tree::complete(degree, n);
      for (double p : {0.05, 0.3, 0.9}) {
        for (double beta : {0.4, std::atanh(0.8)}) {
          auto idx = sample_bernoulli_indices(0, t.size(), p, rng);
          auto f = zero_field(t, FieldMode::WholeTree);
          for (auto v : idx) f.h[v] = 1;
          double dense = lyons_field(t, f, beta)[0];
          CHECK(sparse_root_ratio(degree, n, idx, beta) == dense);
        }
      }
    }
  }
  CHECK(sparse_root_ratio(2, 5, {}, 1.0) == 0.0);
}

TEST_CASE("magnetization scan is reproducible across worker counts") {
  auto cfg = ExperimentConfig::defaults(ScanMode::Magnetization);
  cfg.n_grid = {6, 8};
  cfg.replicas = 64;
  auto a = run_magnetization_scan(cfg, 1);
  auto b = run_magnetization_scan(cfg, 3);
  CHECK(a.table.to_csv() == b.table.to_csv());
  CHECK(a.root_ratios == b.root_ratios);

  cfg.base_pmf = OffspringPmf({{1, 0.5}, {3, 0.5}});
  cfg.field_mode = FieldMode::LeavesOnly;
  CHECK(run_magnetization_scan(cfg, 1).table.to_csv() == run_magnetization_scan(cfg, 2).table.to_csv());
}

TEST_CASE("doubling replicas roughly halves the squared standard error") {
  auto cfg = ExperimentConfig::defaults(ScanMode::Magnetization);
  cfg.n_grid = {8};
  cfg.replicas = 2000;
  auto small = mean_se_of(run_magnetization_scan(cfg, 2).root_ratios[0]);
  cfg.replicas = 4000;
  auto large = mean_se_of(run_magnetization_scan(cfg, 2).root_ratios[0]);
  double ratio = large.second * large.second / (small.second * small.second);
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
}

TEST_CASE("beta zero gives zero ratios") {
  auto cfg = ExperimentConfig::defaults(ScanMode::Magnetization);
  cfg.beta = 0.0;
  cfg.schedule = {PSchedule::Kind::Constant, 0.3, 1.0};
  cfg.n_grid = {5};
  cfg.replicas = 20;
  auto scan = run_magnetization_scan(cfg, 1);
  for (double r : scan.root_ratios[0]) CHECK(r == 0.0);
}

TEST_CASE("gamma and capacity scans") {
  auto g = ExperimentConfig::defaults(ScanMode::Gamma);
  g.n_grid = {12, 20};
  auto scan = run_gamma_scan(g);
  CHECK(scan.all_bounds_hold);
  REQUIRE(scan.profiles.size() == 2);
  CHECK(scan.profiles[0].rows.size() == 13);
  // p = 1 keeps everything
  g.schedule = {PSchedule::Kind::Constant, 1.0, 1.0};
  auto full = run_gamma_scan(g);
  for (const auto& row : full.profiles[1].rows) CHECK(row[1] == "0");

  auto c = ExperimentConfig::defaults(ScanMode::Capacity);
  c.n_grid = {6};
  c.replicas = 40;
  auto cap1 = run_capacity_scan(c, 1);
  auto cap2 = run_capacity_scan(c, 4);
  CHECK(cap1.replicas.to_csv() == cap2.replicas.to_csv());
  CHECK(cap1.summary.rows.size() == 1);
  CHECK(cap1.replicas.rows.size() == 40);
}

TEST_CASE("tv curves") {
  // p = 1: mu*_k = mu for every k
  auto c = tv_curve(OffspringPmf::dirac(2), 1.0, 6);
  for (double d : c.to_base) CHECK(d == doctest::Approx(0.0).epsilon(1e-15));
  for (double d : c.to_dirac1) CHECK(d == doctest::Approx(1.0));
  // small p: full branching near the root, a path near the leaves
  auto low = tv_curve(OffspringPmf::dirac(2), std::pow(2.0, -20), 30);
  CHECK(low.to_base.front() < 1e-4);
  CHECK(low.to_dirac1.back() < 1e-4);
  CHECK(std::abs(low.crossing - low.k_star) <= 5);
  for (int k = 0; k < 30; ++k)
    if (k >= low.k_star) CHECK(low.to_dirac1[k] <= low.dirac_bound[k] * (1 + 1e-12));
}

TEST_CASE("validation suites pass and catch an injected fault") {
  ValidationOptions opts;
  opts.workers = 2;
  auto lyons = validate_lyons(opts, 60);
  CHECK(lyons.pass);
  CHECK(lyons.max_error <= 1e-10);
  CHECK(validate_pruning(opts, 60).pass);
  CHECK(validate_pruned_law().pass);
  CHECK(validate_spherical().pass);
  for (const auto& r : validate_capacity(capacity_instances(opts, 6))) CHECK(r.pass);

  opts.link = [](double beta, double r) { return g_beta(beta, r) * (1 + 1e-6); };
  auto broken = validate_lyons(opts, 60);
  CHECK_FALSE(broken.pass);
  CHECK_FALSE(broken.failures.empty());
  auto doc = validation_report_json({broken});
  CHECK(doc["pass"] == false);
  CHECK(doc["suites"][0]["suite"] == "lyons_vs_bruteforce");
}

TEST_CASE("lyons to capacity ratio") {
  CHECK_THROWS(lyons_capacity_ratio(Tree::single_vertex(), 0.5));
  auto ratios = ratio_capacity_corpus(1, 0.8, 12, 2);
  CHECK(ratios.size() == 12 + 10 + 7 + 12);
  for (double r : ratios) {
    CHECK(r > 0.0);
    CHECK(std::isfinite(r));
  }
  CHECK(ratios == ratio_capacity_corpus(1, 0.8, 12, 1));
}

TEST_CASE("prune demo outputs") {
  auto demo = run_prune_demo(OffspringPmf::dirac(2), 8, 0.3, 7);
  CHECK(dump_json(Tree::from_json(json::parse(demo.tree_json)).to_json()) == demo.tree_json);
  CHECK(demo.overlay_dot.rfind("digraph", 0) == 0);
  auto pruned = json::parse(demo.pruned_json);
  if (!pruned.contains("empty"))
    CHECK(dump_json(Tree::from_json(pruned).to_json()) == demo.pruned_json);
  auto dead = run_prune_demo(OffspringPmf::dirac(2), 4, 0.0, 1);
  CHECK(json::parse(dead.pruned_json) == json{{"empty", true}, {"n", 4}});
  CHECK(run_prune_demo(OffspringPmf::dirac(2), 8, 0.3, 7).tree_json == demo.tree_json);
}
