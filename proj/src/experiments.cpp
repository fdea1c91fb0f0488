#include "gwising/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <unistd.h>

#include "gwising/numeric.hpp"

namespace gwising {

using nlohmann::json;

// ---------------------------------------------------------------- plumbing

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  const std::size_t threads = std::min<std::size_t>(std::max(workers, 1), count);
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::size_t failed_at = count;
  std::exception_ptr failure;
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        while (!stop.load(std::memory_order_relaxed)) {
          std::size_t i = next.fetch_add(1);
          if (i >= count) return;
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(mu);
            // indices are handed out in order, so every smaller index runs
            // to completion and the lowest failure is reproducible
            if (i < failed_at) {
              failed_at = i;
              failure = std::current_exception();
            }
            stop = true;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

int resolve_workers(std::optional<int> requested) {
  if (requested) {
    if (*requested < 1) throw ConfigError("--workers must be at least 1");
    return *requested;
  }
  if (const char* env = std::getenv("GWISING_WORKERS"); env && *env) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1 || v > 4096)
      throw ConfigError("GWISING_WORKERS must be a positive integer, got '" + std::string(env) + "'");
    return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw std::logic_error("row width does not match header");
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  emit(columns);
  for (const auto& r : rows) emit(r);
  return out;
}

std::string cell(double x) { return format_real(x); }
std::string cell(std::int64_t x) { return std::to_string(x); }

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (phat + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

struct MeanSe {
  double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return out;
}

// nearest-rank quantile of sorted data
double quantile(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) return 0.0;
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::string short_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

// ------------------------------------------------------------------ config

double PSchedule::value(int n, double nu, double beta) const {
  switch (kind) {
    case Kind::Constant:
      return c;
    case Kind::Geometric:
      return std::exp(n * std::log(lambda));
    case Kind::Threshold:
      return c * std::exp(-n * std::log(nu * std::tanh(beta)));
    case Kind::ThresholdTimes:
      return c * std::exp(n * (std::log(lambda) - std::log(nu * std::tanh(beta))));
  }
  throw std::logic_error("unknown schedule kind");
}

json PSchedule::to_json() const {
  switch (kind) {
    case Kind::Constant:
      return {{"kind", "constant"}, {"c", c}};
    case Kind::Geometric:
      return {{"kind", "geometric"}, {"lambda", lambda}};
    case Kind::Threshold:
      return {{"kind", "threshold"}, {"c", c}};
    case Kind::ThresholdTimes:
      return {{"kind", "threshold_times"}, {"c", c}, {"lambda", lambda}};
  }
  throw std::logic_error("unknown schedule kind");
}

PSchedule PSchedule::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config field 'p_schedule': expected an object");
  if (!j.contains("kind")) throw ConfigError("config field 'p_schedule.kind': missing");
  PSchedule s;
  const std::string kind = j.at("kind").get<std::string>();
  std::set<std::string> allowed{"kind"};
  if (kind == "constant") {
    s.kind = Kind::Constant;
    allowed.insert("c");
  } else if (kind == "geometric") {
    s.kind = Kind::Geometric;
    allowed.insert("lambda");
  } else if (kind == "threshold") {
    s.kind = Kind::Threshold;
    allowed.insert("c");
  } else if (kind == "threshold_times") {
    s.kind = Kind::ThresholdTimes;
    allowed.insert({"c", "lambda"});
  } else {
    throw ConfigError("config field 'p_schedule.kind': unknown schedule '" + kind + "'");
  }
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError("config field 'p_schedule." + key + "': unknown key");
  for (const auto& key : allowed) {
    if (key == "kind") continue;
    if (!j.contains(key)) throw ConfigError("config field 'p_schedule." + key + "': missing");
    if (!j.at(key).is_number()) throw ConfigError("config field 'p_schedule." + key + "': expected a number");
  }
  if (j.contains("c")) s.c = j.at("c").get<double>();
  if (j.contains("lambda")) s.lambda = j.at("lambda").get<double>();
  if (!(s.c > 0.0)) throw ConfigError("config field 'p_schedule.c': must be positive");
  if (!(s.lambda > 0.0)) throw ConfigError("config field 'p_schedule.lambda': must be positive");
  return s;
}

ScanMode parse_scan_mode(const std::string& name) {
  if (name == "magnetization") return ScanMode::Magnetization;
  if (name == "gamma") return ScanMode::Gamma;
  if (name == "capacity") return ScanMode::Capacity;
  if (name == "tv") return ScanMode::Tv;
  if (name == "validate") return ScanMode::Validate;
  throw ConfigError("config field 'mode': unknown mode '" + name + "'");
}

std::string scan_mode_name(ScanMode mode) {
  switch (mode) {
    case ScanMode::Magnetization: return "magnetization";
    case ScanMode::Gamma: return "gamma";
    case ScanMode::Capacity: return "capacity";
    case ScanMode::Tv: return "tv";
    case ScanMode::Validate: return "validate";
  }
  throw std::logic_error("unknown mode");
}

OffspringPmf named_pmf(const std::string& name) {
  if (name == "one_or_two") return OffspringPmf({{1, 0.5}, {2, 0.5}});
  if (name == "one_or_three") return OffspringPmf({{1, 0.5}, {3, 0.5}});
  if (name.rfind("dirac", 0) == 0 && name.size() > 5) {
    const std::string digits = name.substr(5);
    if (digits.find_first_not_of("0123456789") == std::string::npos && digits.size() <= 4) {
      int d = std::stoi(digits);
      if (d >= 1) return OffspringPmf::dirac(d);
    }
  }
  throw ConfigError("unknown pmf name '" + name +
                    "' (expected diracD, one_or_two or one_or_three)");
}

OffspringPmf pmf_from_json_or_name(const json& j) {
  if (j.is_string()) return named_pmf(j.get<std::string>());
  try {
    return OffspringPmf::from_json(j);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config field 'pmf': ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::defaults(ScanMode mode) {
  ExperimentConfig c;
  c.mode = mode;
  switch (mode) {
    case ScanMode::Magnetization:
      c.schedule = {PSchedule::Kind::Threshold, 1.0, 1.0};
      c.n_grid = {10, 14, 18};
      c.replicas = 500;
      break;
    case ScanMode::Gamma:
      c.schedule = {PSchedule::Kind::Geometric, 1.0, std::sqrt(0.5)};
      c.n_grid = {20};
      c.replicas = 1;
      break;
    case ScanMode::Capacity:
      c.beta = 0.8;
      c.schedule = {PSchedule::Kind::Geometric, 1.0, std::sqrt(0.5)};
      c.n_grid = {8, 12, 16};
      c.replicas = 1000;
      break;
    case ScanMode::Tv:
      c.schedule = {PSchedule::Kind::Geometric, 1.0, std::sqrt(0.5)};
      c.n_grid = {30, 40, 60};
      c.replicas = 1;
      break;
    case ScanMode::Validate:
      c.master_seed = 42;
      c.replicas = 1;
      break;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, ScanMode mode) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "schema",      "mode",     "pmf",          "beta",        "p_schedule",
      "n_grid",      "replicas", "epsilon",      "epsilon_sweep", "master_seed",
      "field_mode",  "capacity_p", "q",          "phase_constants"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("config field '" + key + "': unknown key");
  if (!j.contains("schema")) throw ConfigError("config field 'schema': missing");
  if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != kSchema)
    throw ConfigError("config field 'schema': expected " + std::to_string(kSchema));

  ExperimentConfig c = defaults(mode);
  std::string field;
  try {
    field = "mode";
    if (j.contains("mode") && parse_scan_mode(j.at("mode").get<std::string>()) != mode)
      throw ConfigError("config field 'mode': '" + j.at("mode").get<std::string>() +
                        "' does not match subcommand mode '" + scan_mode_name(mode) + "'");
    field = "pmf";
    if (j.contains("pmf")) c.base_pmf = pmf_from_json_or_name(j.at("pmf"));
    field = "beta";
    if (j.contains("beta")) c.beta = j.at("beta").get<double>();
    field = "p_schedule";
    if (j.contains("p_schedule")) c.schedule = PSchedule::from_json(j.at("p_schedule"));
    field = "n_grid";
    if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<int>>();
    field = "replicas";
    if (j.contains("replicas")) c.replicas = j.at("replicas").get<int>();
    field = "epsilon";
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    field = "epsilon_sweep";
    if (j.contains("epsilon_sweep")) c.epsilon_sweep = j.at("epsilon_sweep").get<std::vector<double>>();
    field = "master_seed";
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    field = "field_mode";
    if (j.contains("field_mode")) c.field_mode = parse_field_mode(j.at("field_mode").get<std::string>());
    field = "capacity_p";
    if (j.contains("capacity_p")) c.capacity_p = j.at("capacity_p").get<double>();
    field = "q";
    if (j.contains("q")) c.q = j.at("q").get<double>();
    field = "phase_constants";
    if (j.contains("phase_constants")) {
      const json& pc = j.at("phase_constants");
      static const std::set<std::string> keys{"c_generating", "c_mu", "c4", "c5",
                                              "c6",           "c7",   "c8", "v_bound"};
      for (const auto& [key, _] : pc.items())
        if (!keys.count(key)) throw ConfigError("config field 'phase_constants." + key + "': unknown key");
      for (const auto& key : keys)
        if (!pc.contains(key)) throw ConfigError("config field 'phase_constants." + key + "': missing");
      c.phase_constants = PhaseConstants{pc.at("c_generating"), pc.at("c_mu"), pc.at("c4"),
                                         pc.at("c5"), pc.at("c6"), pc.at("c7"), pc.at("c8"),
                                         pc.at("v_bound")};
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + field + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config field '" + field + "': " + e.what());
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j{{"schema", kSchema},
         {"mode", scan_mode_name(mode)},
         {"pmf", base_pmf.to_json()},
         {"beta", beta},
         {"p_schedule", schedule.to_json()},
         {"n_grid", n_grid},
         {"replicas", replicas},
         {"epsilon", epsilon},
         {"epsilon_sweep", epsilon_sweep},
         {"master_seed", master_seed},
         {"field_mode", std::string(field_mode_name(field_mode))},
         {"capacity_p", capacity_p},
         {"q", q}};
  if (phase_constants) {
    const auto& c = *phase_constants;
    j["phase_constants"] = {{"c_generating", c.c_generating}, {"c_mu", c.c_mu}, {"c4", c.c4},
                            {"c5", c.c5}, {"c6", c.c6}, {"c7", c.c7}, {"c8", c.c8},
                            {"v_bound", c.v_bound}};
  }
  return j;
}

void ExperimentConfig::validate() const {
  if (replicas < 1) throw ConfigError("config field 'replicas': must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("config field 'epsilon': must lie in (0, 1)");
  for (double e : epsilon_sweep)
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("config field 'epsilon_sweep': values must lie in (0, 1)");
  // beta = 0 is admitted only as a sanity row of the magnetization scan
  if (!(beta > 0.0 || (beta == 0.0 && mode == ScanMode::Magnetization)) || std::isinf(beta))
    throw ConfigError("config field 'beta': must be positive");
  if (!(capacity_p > 1.0) || std::isinf(capacity_p))
    throw ConfigError("config field 'capacity_p': must exceed 1");
  if (!(q > 1.0 && q <= 2.0)) throw ConfigError("config field 'q': must lie in (1, 2]");
  if (base_pmf.prob(0) > 0.0) throw ConfigError("config field 'pmf': must have no mass at 0");
  if ((mode == ScanMode::Gamma || mode == ScanMode::Tv || mode == ScanMode::Capacity) &&
      !(base_pmf.mean() > 1.0))
    throw ConfigError("config field 'pmf': mean must exceed 1 for this scan");
  if (mode == ScanMode::Validate) return;
  if (n_grid.empty()) throw ConfigError("config field 'n_grid': must not be empty");
  for (int n : n_grid) {
    if (n < 1 || n > 100000) throw ConfigError("config field 'n_grid': depths must lie in [1, 100000]");
    double p = p_n(n);
    if (!(p > 0.0 && p <= 1.0))
      throw ConfigError("config field 'p_schedule': p_n = " + format_real(p) + " at n = " +
                        std::to_string(n) + " is outside (0, 1]");
  }
}

// ------------------------------------------------------------ magnetization

std::vector<std::uint64_t> sample_bernoulli_indices(std::uint64_t begin, std::uint64_t end,
                                                    double p, RandomStream& rng) {
  std::vector<std::uint64_t> out;
  if (!(p > 0.0) || begin >= end) return out;
  std::uint64_t pos = begin;
  while (true) {
    std::uint64_t gap = rng.geometric_gap(p);
    if (gap >= end - pos) break;
    pos += gap;
    out.push_back(pos);
    if (++pos >= end) break;
  }
  return out;
}

namespace {

// First BFS index of each depth 0..n+1 in the complete degree-ary tree.
std::vector<std::uint64_t> level_starts(int degree, int n) {
  std::vector<std::uint64_t> starts{0};
  std::uint64_t width = 1;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      if (width > (std::uint64_t{1} << 62) / static_cast<std::uint64_t>(degree))
        throw std::length_error("complete tree too large for 64-bit indices");
      width *= static_cast<std::uint64_t>(degree);
    }
    if (starts.back() > (std::uint64_t{1} << 62) - width)
      throw std::length_error("complete tree too large for 64-bit indices");
    starts.push_back(starts.back() + width);
  }
  return starts;
}

}  // namespace

double sparse_root_ratio(int degree, int n, const std::vector<std::uint64_t>& field,
                         double beta) {
  if (degree < 1 || n < 0) throw std::invalid_argument("bad complete tree shape");
  const auto starts = level_starts(degree, n);
  using Entry = std::pair<std::uint64_t, double>;
  // per depth, field vertices in descending order
  std::vector<std::vector<Entry>> levels(static_cast<std::size_t>(n) + 1);
  {
    int k = 0;
    for (std::uint64_t v : field) {
      if (v >= starts.back()) throw std::out_of_range("field index outside the tree");
      while (v >= starts[static_cast<std::size_t>(k) + 1]) ++k;
      levels[k].push_back({v, 2.0 * beta});
    }
    for (auto& l : levels) std::reverse(l.begin(), l.end());
  }
  // Same arithmetic as lyons_field: each parent starts from its field term
  // and adds child contributions in descending child order.
  std::vector<Entry> merged;
  for (int k = n; k >= 1; --k) {
    const auto& below = levels[k];
    const auto& own = levels[k - 1];
    merged.clear();
    std::size_t f = 0;
    for (const auto& [v, r] : below) {
      if (r == 0.0) continue;
      const std::uint64_t parent = (v - 1) / static_cast<std::uint64_t>(degree);
      if (merged.empty() || merged.back().first != parent) {
        while (f < own.size() && own[f].first > parent) merged.push_back(own[f++]);
        double init = 0.0;
        if (f < own.size() && own[f].first == parent) init = own[f++].second;
        merged.push_back({parent, init});
      }
      merged.back().second += g_beta(beta, r);
    }
    while (f < own.size()) merged.push_back(own[f++]);
    levels[k - 1].swap(merged);
    std::vector<Entry>().swap(levels[k]);
  }
  return levels[0].empty() ? 0.0 : levels[0].front().second;
}

double sample_root_ratio(const OffspringPmf& pmf, int n, FieldMode mode, double p,
                         double beta, RandomStream& rng) {
  if (pmf.entries().size() == 1 && mode != FieldMode::PlusBoundary) {
    // deterministic tree: only the field is random
    const int d = pmf.entries()[0].degree;
    const auto starts = level_starts(d, n);
    const std::uint64_t begin = mode == FieldMode::WholeTree ? 0 : starts[static_cast<std::size_t>(n)];
    return sparse_root_ratio(d, n, sample_bernoulli_indices(begin, starts.back(), p, rng), beta);
  }
  Tree t = sample_gw(pmf, n, rng);
  return lyons_field(t, sample_field(t, mode, p, rng), beta)[0];
}

MagnetizationScan run_magnetization_scan(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  std::vector<double> eps = cfg.epsilon_sweep;
  eps.push_back(cfg.epsilon);
  std::sort(eps.begin(), eps.end());
  eps.erase(std::unique(eps.begin(), eps.end()), eps.end());

  MagnetizationScan out;
  out.table.columns = {"n", "p_n", "replicas", "mean_r", "se_r", "mean_m", "se_m", "bound_mean_r"};
  for (double e : eps) {
    out.table.columns.push_back("p_m_gt_" + short_real(e));
    out.table.columns.push_back("wilson_lo_" + short_real(e));
    out.table.columns.push_back("wilson_hi_" + short_real(e));
  }
  const double nu = cfg.base_pmf.mean();
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    const int n = cfg.n_grid[i];
    const double p = cfg.p_n(n);
    std::vector<double> r(static_cast<std::size_t>(cfg.replicas));
    parallel_for(r.size(), workers, [&](std::size_t rep) {
      auto rng = RandomStream::derive(cfg.master_seed, {kMagnetizationStream, i, rep});
      r[rep] = sample_root_ratio(cfg.base_pmf, n, cfg.field_mode, p, cfg.beta, rng);
    });
    std::vector<double> m(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) m[k] = magnetization(r[k]);
    auto sr = mean_se(r), sm = mean_se(m);
    std::vector<std::string> row{cell(n),       cell(p),       cell(cfg.replicas), cell(sr.mean),
                                 cell(sr.se),   cell(sm.mean), cell(sm.se),
                                 cell(cfg.beta > 0 ? upper_bound_mean_r(cfg.beta, nu, p, n) : 0.0)};
    for (double e : eps) {
      std::uint64_t hits = 0;
      for (double x : m) hits += x > e;
      auto ci = wilson_interval(hits, m.size());
      row.push_back(cell(static_cast<double>(hits) / static_cast<double>(m.size())));
      row.push_back(cell(ci.lo));
      row.push_back(cell(ci.hi));
    }
    out.table.add_row(std::move(row));
    out.root_ratios.push_back(std::move(r));
  }
  return out;
}

// -------------------------------------------------------------------- gamma

PhaseConstants gamma_scan_constants(const ExperimentConfig& cfg) {
  if (cfg.phase_constants) return *cfg.phase_constants;
  return calibrate_phase_constants(cfg.base_pmf, cfg.q, std::ldexp(1.0, -15), 30,
                                   kCalibrationMargin);
}

GammaScan run_gamma_scan(const ExperimentConfig& cfg) {
  cfg.validate();
  const PhaseConstants constants = gamma_scan_constants(cfg);
  GammaScan out;
  out.bounds.columns = {"n",           "p_n",          "k_star",          "k_bar_star_1",
                        "upper_all",   "lower_window", "gamma_decay",     "tail",
                        "growth_identity", "nu_star_range", "sigma_bounded", "v_bounded",
                        "mean_envelope", "variance_envelope", "growth_envelope", "max_v"};
  for (int n : cfg.n_grid) {
    const double p = cfg.p_n(n);
    PrunedLaw law(GammaProfile(cfg.base_pmf, p, n));
    PrunedMoments mom(law, cfg.q);
    const GammaProfile& g = law.profile();
    Table t;
    t.columns = {"k", "gamma_k", "one_minus_gamma_k", "nu_star_k", "sigma_q_star_k", "M_star_0k",
                 "k_star"};
    for (int k = 0; k <= n; ++k) {
      // generation n has no offspring law
      t.add_row({cell(k), cell(g.gamma(k)), cell(g.one_minus_gamma(k)),
                 k < n ? cell(mom.nu_star(k)) : "", k < n ? cell(mom.sigma_q_star(k)) : "",
                 cell(mom.growth(0, k)), cell(g.k_star())});
    }
    out.profiles.push_back(std::move(t));
    auto phase = check_phase_bounds(g, constants, cfg.q);
    auto moments = check_moment_bounds(law, mom, constants);
    out.all_bounds_hold = out.all_bounds_hold && phase.all() && moments.all();
    out.bounds.add_row({cell(n), cell(p), cell(g.k_star()), cell(phase.k_bar_star_1),
                        cell(phase.upper_all), cell(phase.lower_window), cell(phase.gamma_decay),
                        cell(phase.tail), cell(moments.growth_identity),
                        cell(moments.nu_star_range), cell(moments.sigma_bounded),
                        cell(moments.v_bounded), cell(moments.mean_envelope),
                        cell(moments.variance_envelope), cell(moments.growth_envelope),
                        cell(moments.max_v)});
  }
  return out;
}

// ----------------------------------------------------------------- capacity

CapacityScan run_capacity_scan(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  CapacityScan out;
  out.replicas.columns = {"n", "p_n", "replica", "capacity_p", "alpha_n", "ratio"};
  out.summary.columns = {"n",         "p_n",       "replicas",  "mean_capacity", "se_capacity",
                         "alpha_n",   "mean_ratio", "q05_ratio", "q50_ratio",    "q95_ratio",
                         "upper_bound"};
  const double nu = cfg.base_pmf.mean();
  const double r_base = std::tanh(cfg.beta);
  const auto res = ResistanceProfile::geometric(r_base);
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    const int n = cfg.n_grid[i];
    const double p = cfg.p_n(n);
    PrunedLaw law(GammaProfile(cfg.base_pmf, p, n));
    const double alpha = alpha_n(cfg.beta, nu, p, n, cfg.capacity_p);
    std::vector<double> caps(static_cast<std::size_t>(cfg.replicas));
    parallel_for(caps.size(), workers, [&](std::size_t rep) {
      auto rng = RandomStream::derive(cfg.master_seed, {kCapacityStream, i, rep});
      auto t = sample_pruned_direct(law, rng);
      // the empty pruned tree has capacity 0, like its magnetization
      caps[rep] = t ? capacity_recursion(*t, res, cfg.capacity_p).capacity : 0.0;
    });
    std::vector<double> ratios(caps.size());
    for (std::size_t rep = 0; rep < caps.size(); ++rep) {
      ratios[rep] = caps[rep] / alpha;
      out.replicas.add_row({cell(n), cell(p), cell(static_cast<std::int64_t>(rep)), cell(caps[rep]),
                            cell(alpha), cell(ratios[rep])});
    }
    PrunedMoments mom(law, cfg.q);
    std::vector<double> growth;
    for (int k = 1; k <= n; ++k) growth.push_back(mom.growth(0, k));
    // E capa <= P(nonempty) * bound for the nonempty process
    double upper = law.profile().one_minus_gamma(0) *
                   expected_capacity_upper(growth, r_base, cfg.capacity_p);
    auto sc = mean_se(caps), sr = mean_se(ratios);
    std::sort(ratios.begin(), ratios.end());
    out.summary.add_row({cell(n), cell(p), cell(cfg.replicas), cell(sc.mean), cell(sc.se),
                         cell(alpha), cell(sr.mean), cell(quantile(ratios, 0.05)),
                         cell(quantile(ratios, 0.5)), cell(quantile(ratios, 0.95)), cell(upper)});
  }
  return out;
}

// ----------------------------------------------------------------------- tv

TvCurve tv_curve(const OffspringPmf& pmf, double p, int n) {
  PrunedLaw law(GammaProfile(pmf, p, n));
  const auto& g = law.profile();
  const OffspringPmf one = OffspringPmf::dirac(1);
  TvCurve c{n, p, g.k_star(), {}, {}, {}, n};
  for (int k = 0; k < n; ++k) {
    c.to_base.push_back(tv_distance(law.mu_star(k), pmf));
    c.to_dirac1.push_back(tv_distance(law.mu_star(k), one));
    c.dirac_bound.push_back(2.0 * g.nu() * g.one_minus_gamma(k + 1));
    if (c.crossing == n && c.to_base.back() >= c.to_dirac1.back()) c.crossing = k;
  }
  return c;
}

TvScan run_tv_scan(const ExperimentConfig& cfg) {
  cfg.validate();
  TvScan out;
  out.curves.columns = {"n", "p_n", "k", "k_star", "tv_to_base", "tv_to_dirac1", "dirac_bound",
                        "bound_holds"};
  out.crossings.columns = {"n", "p_n", "k_star", "crossing", "offset", "within_5"};
  for (int n : cfg.n_grid) {
    auto c = tv_curve(cfg.base_pmf, cfg.p_n(n), n);
    for (int k = 0; k < n; ++k) {
      bool holds = k < c.k_star || c.to_dirac1[k] <= c.dirac_bound[k] * (1 + 1e-12);
      out.curves.add_row({cell(n), cell(c.p_n), cell(k), cell(c.k_star), cell(c.to_base[k]),
                          cell(c.to_dirac1[k]), cell(c.dirac_bound[k]), cell(holds)});
    }
    double offset = c.crossing - c.k_star;
    out.crossings.add_row({cell(n), cell(c.p_n), cell(c.k_star), cell(c.crossing), cell(offset),
                           cell(std::abs(offset) <= 5.0)});
    out.raw.push_back(std::move(c));
  }
  return out;
}

// --------------------------------------------------------------- validation

json SuiteReport::to_json() const {
  return {{"suite", suite},
          {"instances", instances},
          {"max_error", max_error},
          {"pass", pass},
          {"failures", failures}};
}

namespace {

constexpr std::size_t kMaxListedFailures = 20;

SuiteReport new_report(std::string name, std::size_t instances) {
  SuiteReport r;
  r.suite = std::move(name);
  r.instances = instances;
  return r;
}

void note_failure(SuiteReport& report, const std::string& what) {
  report.pass = false;
  if (report.failures.size() < kMaxListedFailures) report.failures.push_back(what);
}

using ShapeKey = std::vector<std::uint32_t>;

// Exact law of the pruned tree by enumerating every (tree, leaf field) pair.
std::map<ShapeKey, double> enumerated_pruned_law(const OffspringPmf& pmf, double p, int n) {
  std::map<ShapeKey, double> law;
  for (const auto& [tree, tree_prob] : enumerate_trees(pmf, n)) {
    auto leaves = tree.boundary();
    if (leaves.size() > 30) throw std::length_error("too many leaves to enumerate fields");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << leaves.size()); ++mask) {
      auto f = zero_field(tree, FieldMode::LeavesOnly);
      double prob = tree_prob;
      for (Vertex i = 0; i < leaves.size(); ++i) {
        bool on = (mask >> i) & 1;
        f.h[leaves.begin + i] = on;
        prob *= on ? p : 1 - p;
      }
      auto pruned = prune(tree, f);
      law[pruned ? pruned->tree.child_counts() : ShapeKey{}] += prob;
    }
  }
  return law;
}

}  // namespace

SuiteReport validate_lyons(const ValidationOptions& options, std::size_t instances) {
  SuiteReport report = new_report("lyons_vs_bruteforce", instances);
  const FieldMode modes[] = {FieldMode::WholeTree, FieldMode::LeavesOnly, FieldMode::PlusBoundary};
  const double betas[] = {0.3, 0.7, 1.2};
  struct Outcome {
    double field_error, plus_error;
  };
  std::vector<Outcome> outcomes(instances);
  parallel_for(instances, options.workers, [&](std::size_t i) {
    auto rng = RandomStream::derive(options.seed, {kLyonsSuiteStream, 0, i});
    Tree t = random_small_tree(rng, 4, 3, 14);
    const double beta = betas[i % 3];
    auto f = sample_field(t, modes[(i / 3) % 3], 0.4, rng);
    double r = lyons_field(t, f, beta, options.link)[0];
    auto exact = gibbs_bruteforce(t, f, beta);
    Outcome o{std::abs(r - exact.log_ratio), 0.0};
    if (std::isnan(o.field_error)) o.field_error = std::numeric_limits<double>::infinity();
    auto plus = lyons_plus(t, beta)[0];
    auto exact_plus = gibbs_bruteforce_plus(t, beta);
    if (plus.is_infinite() != std::isinf(exact_plus.log_ratio))
      o.plus_error = std::numeric_limits<double>::infinity();
    else if (!plus.is_infinite())
      o.plus_error = std::abs(plus.value() - exact_plus.log_ratio);
    outcomes[i] = o;
  });
  for (std::size_t i = 0; i < instances; ++i) {
    double e = std::max(outcomes[i].field_error, outcomes[i].plus_error);
    report.max_error = std::max(report.max_error, e);
    if (!(e <= 1e-10))
      note_failure(report, "instance " + std::to_string(i) + ": |r - r_exact| = " + format_real(e));
  }
  return report;
}

SuiteReport validate_pruning(const ValidationOptions& options, std::size_t instances) {
  SuiteReport report = new_report("pruning_equivalence", instances);
  const OffspringPmf law({{1, 0.3}, {2, 0.4}, {3, 0.3}});
  struct Outcome {
    double error = 0.0;
    bool dead_nonzero = false;
  };
  std::vector<Outcome> outcomes(instances);
  parallel_for(instances, options.workers, [&](std::size_t i) {
    auto rng = RandomStream::derive(options.seed, {kPruningSuiteStream, 0, i});
    Tree t = sample_gw(law, 1 + static_cast<int>(i % 8), rng);
    const double beta = 0.2 + 0.1 * static_cast<double>(i % 10);
    const double p = 0.05 + 0.1 * static_cast<double>(i % 9);
    auto f = sample_field(t, FieldMode::LeavesOnly, p, rng);
    auto r = lyons_field(t, f, beta);
    auto pruned = prune(t, f);
    Outcome o;
    if (!pruned) {
      for (double x : r) o.dead_nonzero = o.dead_nonzero || x != 0.0;
    } else {
      auto rp = lyons_field(pruned->tree, plus_boundary_field(pruned->tree), beta);
      for (Vertex v = 0; v < t.size(); ++v) {
        Vertex w = pruned->old_to_new[v];
        if (w == kNoParent)
          o.dead_nonzero = o.dead_nonzero || r[v] != 0.0;
        else
          o.error = std::max(o.error, std::abs(r[v] - rp[w]));
      }
    }
    outcomes[i] = o;
  });
  for (std::size_t i = 0; i < instances; ++i) {
    report.max_error = std::max(report.max_error, outcomes[i].error);
    if (!(outcomes[i].error <= 1e-12))
      note_failure(report, "instance " + std::to_string(i) + ": ratio differs by " +
                               format_real(outcomes[i].error));
    if (outcomes[i].dead_nonzero)
      note_failure(report, "instance " + std::to_string(i) + ": nonzero ratio on a pruned vertex");
  }
  return report;
}

SuiteReport validate_pruned_law() {
  SuiteReport report = new_report("pruned_law_exact", 0);
  for (const auto& pmf : {OffspringPmf::dirac(2), OffspringPmf({{1, 0.5}, {2, 0.5}})}) {
    for (double p : {0.3, 0.5, 0.8}) {
      for (int n : {1, 2}) {
        ++report.instances;
        PrunedLaw law(GammaProfile(pmf, p, n));
        double total = 0.0;
        for (const auto& [key, prob] : enumerated_pruned_law(pmf, p, n)) {
          std::optional<Tree> shape;
          if (!key.empty()) shape = Tree::from_child_counts(key, n);
          double formula = pruned_tree_probability(shape, law);
          total += formula;
          double e = std::abs(formula - prob);
          report.max_error = std::max(report.max_error, e);
          if (!(e <= 1e-12))
            note_failure(report, "p = " + format_real(p) + ", n = " + std::to_string(n) +
                                     ": shape probability off by " + format_real(e));
        }
        double e = std::abs(total - 1.0);
        report.max_error = std::max(report.max_error, e);
        if (!(e <= 1e-12))
          note_failure(report, "p = " + format_real(p) + ", n = " + std::to_string(n) +
                                   ": probabilities sum to " + format_real(total));
      }
    }
  }
  return report;
}

SuiteReport validate_spherical() {
  SuiteReport report = new_report("spherical_closed_form", 0);
  for (int degree : {1, 2, 3}) {
    for (int depth = 1; depth <= 8; ++depth) {
      Tree t = Tree::complete(degree, depth);
      std::vector<std::uint64_t> sizes;
      for (int k = 1; k <= depth; ++k) sizes.push_back(t.generation(k).size());
      for (double base : {0.5, 1.0, 1.0 / std::tanh(0.8)}) {
        auto res = ResistanceProfile::geometric(base);
        std::vector<double> by_depth;
        for (int k = 1; k <= depth; ++k) by_depth.push_back(res.at_depth(k));
        for (double p : {1.5, 2.0, 3.0}) {
          ++report.instances;
          double closed = capacity_spherical(sizes, by_depth, p);
          double rec = capacity_recursion(t, res, p).capacity;
          double e = std::abs(closed - rec) / closed;
          report.max_error = std::max(report.max_error, e);
          if (!(e <= 1e-10))
            note_failure(report, "degree " + std::to_string(degree) + ", depth " +
                                     std::to_string(depth) + ", p " + format_real(p) +
                                     ": relative error " + format_real(e));
        }
      }
    }
  }
  return report;
}

std::vector<CapacityInstance> capacity_instances(const ValidationOptions& options,
                                                 std::size_t trees) {
  const double exponents[] = {1.5, 2.0, 3.0};
  std::vector<CapacityInstance> out(trees * 3);
  parallel_for(trees, options.workers, [&](std::size_t i) {
    auto rng = RandomStream::derive(options.seed, {kCapacitySuiteStream, 0, i});
    Tree t = random_small_tree(rng, 5, 3, 200);
    while (t.depth() == 0) t = random_small_tree(rng, 5, 3, 200);
    std::vector<double> by_depth;
    for (int k = 1; k <= t.depth(); ++k) by_depth.push_back(0.5 + 1.5 * rng.uniform());
    auto res = ResistanceProfile::per_generation(std::move(by_depth));
    auto flow = uniform_flow(t);
    for (std::size_t j = 0; j < 3; ++j) {
      const double p = exponents[j];
      auto brute = capacity_bruteforce(t, res, p);
      out[3 * i + j] = {i, p, capacity_recursion(t, res, p).capacity, brute.capacity,
                        brute.converged, flow_energy(t, flow, res, p)};
    }
  });
  return out;
}

std::vector<SuiteReport> validate_capacity(const std::vector<CapacityInstance>& instances) {
  SuiteReport oracle = new_report("capacity_recursion_vs_oracle", instances.size());
  SuiteReport thomson = new_report("thomson_dominance", instances.size());
  SuiteReport monotone = new_report("capacity_monotone_in_p", 0);
  for (const auto& c : instances) {
    const std::string where = "tree " + std::to_string(c.tree_index) + ", p " + format_real(c.p);
    double gap = std::abs(c.recursion - c.oracle) / c.recursion;
    oracle.max_error = std::max(oracle.max_error, gap);
    if (!(gap <= 1e-6)) note_failure(oracle, where + ": relative gap " + format_real(gap));
    if (!c.oracle_converged) note_failure(oracle, where + ": oracle hit the iteration cap");
    double violation = std::max(0.0, 1.0 / c.recursion - c.uniform_resistance);
    thomson.max_error = std::max(thomson.max_error, violation);
    if (!(violation <= 1e-10)) note_failure(thomson, where + ": uniform flow below exact resistance by " + format_real(violation));
  }
  // instances come in (1.5, 2, 3) triples per tree
  for (std::size_t i = 0; i + 2 < instances.size(); i += 3) {
    ++monotone.instances;
    double worst = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double hi = instances[i + j].recursion, lo = instances[i + j + 1].recursion;
      // equal capacities may differ in the last bit
      worst = std::max(worst, (lo - hi) / hi);
    }
    monotone.max_error = std::max(monotone.max_error, std::max(0.0, worst));
    if (worst > 1e-12)
      note_failure(monotone, "tree " + std::to_string(instances[i].tree_index) +
                                 ": capacity increases with p by " + format_real(worst));
  }
  return {oracle, thomson, monotone};
}

std::vector<SuiteReport> run_validation(const ValidationOptions& options) {
  std::vector<SuiteReport> out{validate_lyons(options), validate_pruning(options),
                               validate_pruned_law(), validate_spherical()};
  for (auto& r : validate_capacity(capacity_instances(options))) out.push_back(std::move(r));
  return out;
}

json validation_report_json(const std::vector<SuiteReport>& suites) {
  json list = json::array();
  bool pass = true;
  for (const auto& s : suites) {
    list.push_back(s.to_json());
    pass = pass && s.pass;
  }
  return {{"pass", pass}, {"suites", list}};
}

// --------------------------------------------------------------- prune demo

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

PruneDemo run_prune_demo(const OffspringPmf& pmf, int n, double p, std::uint64_t seed) {
  if (n < 0) throw ConfigError("--n must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("--p must lie in [0, 1]");
  if (pmf.prob(0) > 0.0) throw ConfigError("--pmf must have no mass at 0");
  RandomStream rng(seed);
  Tree t = sample_gw(pmf, n, rng);
  auto f = sample_field(t, FieldMode::LeavesOnly, p, rng);
  PruneDemo out;
  out.tree_json = dump_json(t.to_json());
  json ones = json::array();
  for (Vertex v = 0; v < t.size(); ++v)
    if (f[v]) ones.push_back(v);
  out.field_json = dump_json({{"mode", std::string(field_mode_name(f.mode))}, {"p", p}, {"ones", ones}});
  auto pruned = prune(t, f);
  out.pruned_json = dump_json(pruned ? pruned->tree.to_json() : json{{"empty", true}, {"n", n}});
  out.overlay_dot = overlay_dot(t, f);
  return out;
}

// ------------------------------------------------------- ratio vs capacity corpus

double lyons_capacity_ratio(const Tree& tree, double beta) {
  if (tree.depth() == 0) throw std::invalid_argument("ratio needs a tree with at least one edge");
  double r = lyons_plus(tree, beta)[0].value();
  double capa = capacity_recursion(tree, ResistanceProfile::geometric(std::tanh(beta)), 1.5).capacity;
  return r / capa;
}

std::vector<double> ratio_capacity_corpus(std::uint64_t seed, double beta,
                                          std::size_t random_count, int workers) {
  std::vector<double> out;
  for (int n = 1; n <= 12; ++n) out.push_back(lyons_capacity_ratio(Tree::path(n), beta));
  for (int n = 1; n <= 10; ++n) out.push_back(lyons_capacity_ratio(Tree::complete(2, n), beta));
  for (int n = 1; n <= 7; ++n) out.push_back(lyons_capacity_ratio(Tree::complete(3, n), beta));
  const OffspringPmf one_or_three({{1, 0.5}, {3, 0.5}});
  const PrunedLaw pruned_law(GammaProfile(OffspringPmf::dirac(2), 0.3, 8));
  std::vector<double> random(random_count);
  parallel_for(random_count, workers, [&](std::size_t i) {
    auto rng = RandomStream::derive(seed, {kCorpusStream, 0, i});
    std::optional<Tree> t;
    switch (i % 3) {
      case 0:
        do t = random_small_tree(rng, 8, 3, 3000);
        while (t->depth() == 0);
        break;
      case 1:
        t = sample_gw(one_or_three, 1 + static_cast<int>(i % 10), rng);
        break;
      default:
        do t = sample_pruned_direct(pruned_law, rng);
        while (!t);
        break;
    }
    random[i] = lyons_capacity_ratio(*t, beta);
  });
  out.insert(out.end(), random.begin(), random.end());
  return out;
}

}  // namespace gwising
