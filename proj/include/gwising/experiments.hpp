#pragma once

// Deterministic, parallel Monte Carlo scans and the oracle validation suites.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwising/capacity.hpp"
#include "gwising/distributions.hpp"
#include "gwising/field_pruning.hpp"
#include "gwising/ising.hpp"
#include "gwising/pruned_law.hpp"
#include "gwising/random.hpp"

namespace gwising {

// ---------------------------------------------------------------- plumbing

// Thrown for configs that are well-formed JSON but semantically invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs body(i) for i in [0, count) on `workers` threads. Results must be
// written by index; the first failing index (lowest) is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

// --workers, then GWISING_WORKERS, then the hardware thread count.
int resolve_workers(std::optional<int> requested);

/// CSV table with every cell already formatted.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string to_csv() const;
};

std::string cell(double x);
std::string cell(std::int64_t x);
inline std::string cell(int x) { return cell(static_cast<std::int64_t>(x)); }
inline std::string cell(std::uint64_t x) { return cell(static_cast<std::int64_t>(x)); }
inline std::string cell(bool x) { return x ? "1" : "0"; }

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);

// Wilson score interval at 95%.
struct Interval {
  double lo, hi;
};
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials);

// ------------------------------------------------------------------ config

/// p_n as a function of n.
struct PSchedule {
  enum class Kind { Constant, Geometric, Threshold, ThresholdTimes };
  Kind kind = Kind::Constant;
  double c = 1.0;
  double lambda = 1.0;

  // constant: c; geometric: lambda^n; threshold: c (nu tanh b)^{-n};
  // threshold_times: c (nu tanh b)^{-n} lambda^n
  double value(int n, double nu, double beta) const;
  nlohmann::json to_json() const;
  static PSchedule from_json(const nlohmann::json& j);
};

enum class ScanMode { Magnetization, Gamma, Capacity, Tv, Validate };
ScanMode parse_scan_mode(const std::string& name);
std::string scan_mode_name(ScanMode mode);

struct ExperimentConfig {
  static constexpr int kSchema = 1;

  ScanMode mode = ScanMode::Magnetization;
  OffspringPmf base_pmf = OffspringPmf::dirac(2);
  double beta = 1.0986122886681098;  // atanh(0.8)
  PSchedule schedule;
  std::vector<int> n_grid{10};
  int replicas = 500;
  double epsilon = 0.05;
  std::vector<double> epsilon_sweep{0.01, 0.05, 0.2};
  std::uint64_t master_seed = 1;
  FieldMode field_mode = FieldMode::WholeTree;
  double capacity_p = 1.5;  // exponent of the capacity scan
  double q = 2.0;           // moment exponent of the gamma scan
  std::optional<PhaseConstants> phase_constants;

  // Built-in defaults for one subcommand.
  static ExperimentConfig defaults(ScanMode mode);
  // Overlays a JSON document on the defaults of `mode`. Unknown keys, a
  // missing or wrong schema, or a mismatching mode throw ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j, ScanMode mode);
  nlohmann::json to_json() const;
  // Throws ConfigError naming the offending field.
  void validate() const;
  double p_n(int n) const { return schedule.value(n, base_pmf.mean(), beta); }
};

// Accepts a name (diracD, one_or_two, one_or_three) or {"entries": ...}.
OffspringPmf pmf_from_json_or_name(const nlohmann::json& j);
OffspringPmf named_pmf(const std::string& name);

// Stream keys: (experiment, n index, replica).
enum ExperimentId : std::uint64_t {
  kMagnetizationStream = 1,
  kCapacityStream = 2,
  kLyonsSuiteStream = 11,
  kPruningSuiteStream = 12,
  kCapacitySuiteStream = 13,
  kCorpusStream = 14,
  kExpectationStream = 15,
};

// ------------------------------------------------------------ magnetization

// Ascending indices in [begin, end), each present independently with
// probability p.
std::vector<std::uint64_t> sample_bernoulli_indices(std::uint64_t begin, std::uint64_t end,
                                                    double p, RandomStream& rng);

// Root log-likelihood ratio on the complete `degree`-ary tree of depth n
// with ones at `field` (BFS indices, ascending). Only ancestors of field
// vertices are touched; the result equals lyons_field bit for bit.
double sparse_root_ratio(int degree, int n, const std::vector<std::uint64_t>& field,
                         double beta);

// One replica: sample tree and field, return the root ratio.
double sample_root_ratio(const OffspringPmf& pmf, int n, FieldMode mode, double p,
                         double beta, RandomStream& rng);

struct MagnetizationScan {
  Table table;
  std::vector<std::vector<double>> root_ratios;  // [n index][replica]
};
MagnetizationScan run_magnetization_scan(const ExperimentConfig& cfg, int workers);

// -------------------------------------------------------------------- gamma

struct GammaScan {
  std::vector<Table> profiles;  // one per n
  Table bounds;
  bool all_bounds_hold = true;
};
// Constants used by the gamma scan: from the config or a fresh calibration.
PhaseConstants gamma_scan_constants(const ExperimentConfig& cfg);
GammaScan run_gamma_scan(const ExperimentConfig& cfg);

// ----------------------------------------------------------------- capacity

struct CapacityScan {
  Table replicas;
  Table summary;
};
CapacityScan run_capacity_scan(const ExperimentConfig& cfg, int workers);

// ----------------------------------------------------------------------- tv

struct TvCurve {
  int n;
  double p_n;
  double k_star;
  std::vector<double> to_base;    // d_TV(mu*_k, mu)
  std::vector<double> to_dirac1;  // d_TV(mu*_k, delta_1)
  std::vector<double> dirac_bound;  // 2 nu (1 - gamma_{k+1})
  int crossing;  // first k with to_base >= to_dirac1, n if none
};
TvCurve tv_curve(const OffspringPmf& pmf, double p, int n);

struct TvScan {
  Table curves;
  Table crossings;
  std::vector<TvCurve> raw;
};
TvScan run_tv_scan(const ExperimentConfig& cfg);

// --------------------------------------------------------------- validation

struct SuiteReport {
  std::string suite;
  std::size_t instances = 0;
  double max_error = 0.0;
  bool pass = true;
  std::vector<std::string> failures;

  nlohmann::json to_json() const;
};

struct ValidationOptions {
  std::uint64_t seed = 42;
  int workers = 1;
  LinkFunction link;  // replaces g_beta in lyons_field; fault injection only
};

SuiteReport validate_lyons(const ValidationOptions& options, std::size_t instances = 500);
SuiteReport validate_pruning(const ValidationOptions& options, std::size_t instances = 500);
SuiteReport validate_pruned_law();
SuiteReport validate_spherical();

/// One (tree, p) instance of the capacity oracle comparison.
struct CapacityInstance {
  std::size_t tree_index;
  double p;
  double recursion;
  double oracle;
  bool oracle_converged;
  double uniform_resistance;  // Thomson estimate of the uniform flow
};
std::vector<CapacityInstance> capacity_instances(const ValidationOptions& options,
                                                 std::size_t trees = 50);
// recursion vs oracle, Thomson dominance and monotonicity in p.
std::vector<SuiteReport> validate_capacity(const std::vector<CapacityInstance>& instances);

std::vector<SuiteReport> run_validation(const ValidationOptions& options);
nlohmann::json validation_report_json(const std::vector<SuiteReport>& suites);

// --------------------------------------------------------------- prune demo

// File contents for one sampled tree, its LeavesOnly field and its pruning.
struct PruneDemo {
  std::string tree_json;    // Tree::to_json, reloads byte-identically
  std::string field_json;
  std::string pruned_json;  // {"empty": true, "n": n} when the root dies
  std::string overlay_dot;
};
PruneDemo run_prune_demo(const OffspringPmf& pmf, int n, double p, std::uint64_t seed);

// Canonical text form of a JSON document: two-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);

// ------------------------------------------------------- ratio vs capacity corpus

// r_root / capa_{3/2} with resistances tanh(b)^{-|u|}, plus boundary.
double lyons_capacity_ratio(const Tree& tree, double beta);

// Ratios over a fixed family of shapes plus `random_count` sampled trees.
std::vector<double> ratio_capacity_corpus(std::uint64_t seed, double beta,
                                          std::size_t random_count, int workers);

}  // namespace gwising
