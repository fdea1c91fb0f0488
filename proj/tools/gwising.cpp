// Command-line front end for the scans, the validation suites and the
// pruning demo. Exit codes: 0 ok, 1 a check failed, 2 usage or config error.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwising/experiments.hpp"

namespace {

using namespace gwising;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "gwising_out";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config (schema 1)");
  cmd->add_option("--out", f.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "master seed override");
  cmd->add_option("--workers", f.workers, "worker threads (default: GWISING_WORKERS, then all cores)");
  cmd->add_flag("--quiet", f.quiet, "no progress output");
}

ExperimentConfig load_config(const CommonFlags& flags, ScanMode mode) {
  ExperimentConfig cfg = ExperimentConfig::defaults(mode);
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw ConfigError("cannot read config file '" + flags.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
      j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ConfigError(flags.config_path + ": " + e.what());
    }
    cfg = ExperimentConfig::from_json(j, mode);
  }
  if (flags.seed) cfg.master_seed = *flags.seed;
  cfg.validate();
  return cfg;
}

class Output {
 public:
  Output(const CommonFlags& flags) : dir_(flags.out_dir), quiet_(flags.quiet) {}

  void write(const std::string& name, const std::string& contents) const {
    auto path = (dir_ / name).string();
    write_file_atomic(path, contents);
    if (!quiet_) std::cout << "wrote " << path << "\n";
  }
  void note(const std::string& line) const {
    if (!quiet_) std::cout << line << "\n";
  }

 private:
  fs::path dir_;
  bool quiet_;
};

int gamma_profile(const CommonFlags& flags) {
  auto cfg = load_config(flags, ScanMode::Gamma);
  Output out(flags);
  auto scan = run_gamma_scan(cfg);
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
    out.write("gamma_profile_n" + std::to_string(cfg.n_grid[i]) + ".csv", scan.profiles[i].to_csv());
  out.write("gamma_bounds.csv", scan.bounds.to_csv());
  out.write("config.json", dump_json(cfg.to_json()));
  if (!scan.all_bounds_hold) {
    std::cerr << "gamma-profile: some bound checks failed, see gamma_bounds.csv\n";
    return kCheckFailed;
  }
  return kOk;
}

int magnetization_scan(const CommonFlags& flags) {
  auto cfg = load_config(flags, ScanMode::Magnetization);
  const int workers = resolve_workers(flags.workers);
  Output out(flags);
  out.note("magnetization-scan: " + std::to_string(cfg.n_grid.size()) + " depths x " +
           std::to_string(cfg.replicas) + " replicas on " + std::to_string(workers) + " workers");
  auto scan = run_magnetization_scan(cfg, workers);
  out.write("magnetization.csv", scan.table.to_csv());
  out.write("config.json", dump_json(cfg.to_json()));
  return kOk;
}

int capacity_scan(const CommonFlags& flags) {
  auto cfg = load_config(flags, ScanMode::Capacity);
  const int workers = resolve_workers(flags.workers);
  Output out(flags);
  auto scan = run_capacity_scan(cfg, workers);
  out.write("capacity.csv", scan.replicas.to_csv());
  out.write("capacity_summary.csv", scan.summary.to_csv());
  out.write("config.json", dump_json(cfg.to_json()));
  return kOk;
}

int tv_scan(const CommonFlags& flags) {
  auto cfg = load_config(flags, ScanMode::Tv);
  Output out(flags);
  auto scan = run_tv_scan(cfg);
  out.write("tv.csv", scan.curves.to_csv());
  out.write("tv_crossing.csv", scan.crossings.to_csv());
  out.write("config.json", dump_json(cfg.to_json()));
  bool ok = true;
  for (const auto& c : scan.raw) {
    if (c.k_star >= 10 && std::abs(c.crossing - c.k_star) > 5.0) {
      std::cerr << "tv-scan: n = " << c.n << " crosses at " << c.crossing << ", k* = " << c.k_star
                << "\n";
      ok = false;
    }
    for (int k = 0; k < c.n; ++k)
      if (k >= c.k_star && c.to_dirac1[k] > c.dirac_bound[k] * (1 + 1e-12)) {
        std::cerr << "tv-scan: n = " << c.n << ", k = " << k << " exceeds the Dirac bound\n";
        ok = false;
      }
  }
  return ok ? kOk : kCheckFailed;
}

int validate(const CommonFlags& flags) {
  auto cfg = load_config(flags, ScanMode::Validate);
  ValidationOptions opts;
  opts.seed = cfg.master_seed;
  opts.workers = resolve_workers(flags.workers);
  Output out(flags);
  auto suites = run_validation(opts);
  json report = validation_report_json(suites);
  report["seed"] = opts.seed;
  for (const auto& s : suites) {
    char line[160];
    std::snprintf(line, sizeof line, "%-30s %-4s instances=%zu max_error=%.3g", s.suite.c_str(),
                  s.pass ? "PASS" : "FAIL", s.instances, s.max_error);
    out.note(line);
    for (const auto& f : s.failures) std::cerr << "  " << s.suite << ": " << f << "\n";
  }
  out.write("validation.json", dump_json(report));
  return report["pass"].get<bool>() ? kOk : kCheckFailed;
}

struct DemoFlags {
  std::string pmf = "dirac2";
  int n = 8;
  double p = 0.3;
};

int prune_demo(const CommonFlags& flags, const DemoFlags& demo) {
  const std::uint64_t seed = flags.seed.value_or(1);
  auto files = run_prune_demo(named_pmf(demo.pmf), demo.n, demo.p, seed);
  Output out(flags);
  out.write("tree.json", files.tree_json);
  out.write("field.json", files.field_json);
  out.write("pruned.json", files.pruned_json);
  out.write("overlay.dot", files.overlay_dot);
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Ising magnetization, pruning and capacity on Galton-Watson trees", "gwising"};
  app.require_subcommand(1);
  CommonFlags flags;
  DemoFlags demo;

  struct Entry {
    const char* name;
    const char* help;
    std::function<int()> action;
  };
  std::vector<Entry> entries{
      {"gamma-profile", "survival profile and phase-bound checks", [&] { return gamma_profile(flags); }},
      {"magnetization-scan", "Monte Carlo root magnetization", [&] { return magnetization_scan(flags); }},
      {"capacity-scan", "capacity of sampled pruned trees", [&] { return capacity_scan(flags); }},
      {"tv-scan", "total variation of the pruned offspring laws", [&] { return tv_scan(flags); }},
      {"prune-demo", "sample one tree, field and pruning", [&] { return prune_demo(flags, demo); }},
      {"validate", "exact-oracle validation suites", [&] { return validate(flags); }},
  };
  std::vector<CLI::App*> commands;
  for (auto& e : entries) {
    auto* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd, flags);
    if (std::string(e.name) == "prune-demo") {
      cmd->add_option("--pmf", demo.pmf, "diracD, one_or_two or one_or_three")->capture_default_str();
      cmd->add_option("--n", demo.n, "depth")->capture_default_str();
      cmd->add_option("--p", demo.p, "field density on the leaves")->capture_default_str();
    }
    commands.push_back(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (commands[i]->parsed()) return entries[i].action();
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gwising::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
}
