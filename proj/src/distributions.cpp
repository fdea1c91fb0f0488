#include "gwising/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "gwising/numeric.hpp"

namespace gwising {

namespace {

constexpr double kMixtureTolerance = 1e-12;

// log(1 - (1 - t)^d) for t in (0, 1], with t given by its logarithm.
double log_one_minus_pow_complement(int d, double log_t) {
  if (d == 0) return -std::numeric_limits<double>::infinity();
  double t = std::exp(log_t);
  if (t >= 1.0) return 0.0;
  if (t < 1e-300) return std::log(static_cast<double>(d)) + log_t;
  return std::log(-std::expm1(d * std::log1p(-t)));
}

}  // namespace

void validate_q(double q) {
  if (!(q > 1.0 && q <= 2.0))
    throw std::invalid_argument("q must lie in (1, 2], got " +
                                std::to_string(q));
}

double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

OffspringPmf::OffspringPmf(std::vector<PmfEntry> entries, bool no_zero)
    : no_zero_(no_zero) {
  if (entries.empty()) throw std::invalid_argument("pmf has no entries");
  double total = 0.0;
  int prev = -1;
  for (const auto& e : entries) {
    if (e.degree < 0) throw std::invalid_argument("negative degree in pmf");
    if (e.degree <= prev)
      throw std::invalid_argument("pmf degrees must be strictly increasing");
    if (!(e.prob >= 0.0) || e.prob > 1.0 || !std::isfinite(e.prob))
      throw std::invalid_argument("pmf mass outside [0, 1]");
    prev = e.degree;
    total += e.prob;
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance)
    throw std::invalid_argument("pmf masses sum to " + format_real(total) +
                                ", not 1");
  // zero masses carry no information; dropping them keeps min_degree and
  // sampling simple
  for (auto& e : entries)
    if (e.prob > 0.0) entries_.push_back(e);
  if (no_zero_ && !entries_.empty() && entries_.front().degree == 0)
    throw std::invalid_argument("pmf flagged no_zero has mass at 0");
  cumulative_.reserve(entries_.size());
  double acc = 0.0;
  for (const auto& e : entries_) {
    acc += e.prob;
    cumulative_.push_back(acc);
  }
}

OffspringPmf OffspringPmf::dirac(int degree) {
  return OffspringPmf({{degree, 1.0}}, degree > 0);
}

OffspringPmf OffspringPmf::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    throw std::invalid_argument("pmf JSON needs an \"entries\" array");
  for (const auto& [key, _] : j.items())
    if (key != "entries" && key != "no_zero")
      throw std::invalid_argument("unknown key in pmf JSON: " + key);
  std::vector<PmfEntry> entries;
  for (const auto& item : j["entries"]) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number_integer() ||
        !item[1].is_number())
      throw std::invalid_argument("pmf entry must be [degree, prob]");
    entries.push_back({item[0].get<int>(), item[1].get<double>()});
  }
  bool no_zero = j.value("no_zero", false);
  return OffspringPmf(std::move(entries), no_zero);
}

nlohmann::json OffspringPmf::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries_) arr.push_back({e.degree, e.prob});
  return nlohmann::json{{"entries", arr}};
}

double OffspringPmf::prob(int degree) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), degree,
      [](const PmfEntry& e, int d) { return e.degree < d; });
  return (it != entries_.end() && it->degree == degree) ? it->prob : 0.0;
}

int OffspringPmf::min_degree() const { return entries_.front().degree; }
int OffspringPmf::max_degree() const { return entries_.back().degree; }

bool OffspringPmf::satisfies_no_extinction() const {
  return prob(0) == 0.0 && prob(1) < 1.0;
}

double OffspringPmf::mean() const {
  double m = 0.0;
  for (const auto& e : entries_) m += e.degree * e.prob;
  return m;
}

double OffspringPmf::q_moment(double q) const {
  validate_q(q);
  double m = 0.0;
  for (const auto& e : entries_) m += std::pow(e.degree, q) * e.prob;
  return m;
}

double OffspringPmf::q_variance(double q) const {
  double v = q_moment(q) - std::pow(mean(), q);
  return std::max(v, 0.0);
}

double OffspringPmf::generating_function(double s) const {
  if (!(s >= 0.0 && s <= 1.0))
    throw std::invalid_argument("generating function argument outside [0, 1]");
  double g = 0.0;
  for (const auto& e : entries_) g += e.prob * std::pow(s, e.degree);
  return g;
}

double OffspringPmf::survival_transform(double t) const {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("survival transform argument outside [0, 1]");
  if (t == 1.0) return 1.0 - prob(0);
  double l = std::log1p(-t);
  double f = 0.0;
  for (const auto& e : entries_) f += e.prob * -std::expm1(e.degree * l);
  return f;
}

double OffspringPmf::log_survival_transform(double log_t) const {
  std::vector<double> terms;
  terms.reserve(entries_.size());
  for (const auto& e : entries_)
    terms.push_back(std::log(e.prob) +
                    log_one_minus_pow_complement(e.degree, log_t));
  return log_sum_exp(terms);
}

int OffspringPmf::sample(RandomStream& rng) const {
  if (entries_.size() == 1) return entries_.front().degree;
  double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return entries_[static_cast<std::size_t>(it - cumulative_.begin())].degree;
}

TruncatedPmf truncate_law(const std::function<double(int)>& mass,
                          int min_degree, int cutoff) {
  if (min_degree < 0 || cutoff < min_degree)
    throw std::invalid_argument("bad truncation range");
  std::vector<PmfEntry> entries;
  double kept = 0.0;
  for (int d = min_degree; d <= cutoff; ++d) {
    double m = mass(d);
    entries.push_back({d, m});
    kept += m;
  }
  if (!(kept > 0.0)) throw std::invalid_argument("truncation keeps no mass");
  for (auto& e : entries) e.prob /= kept;
  bool no_zero = min_degree > 0;
  return {OffspringPmf(std::move(entries), no_zero), std::max(0.0, 1.0 - kept)};
}

TruncatedPmf truncated_geometric(double success, int cutoff) {
  if (!(success > 0.0 && success <= 1.0))
    throw std::invalid_argument("geometric success probability outside (0, 1]");
  return truncate_law(
      [success](int k) { return std::pow(1.0 - success, k - 1) * success; }, 1,
      cutoff);
}

OffspringPmf zero_truncated_binomial(int n, double p) {
  if (n < 1) throw std::invalid_argument("zero-truncated binomial needs n >= 1");
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("zero-truncated binomial needs p in (0, 1]");
  if (p == 1.0) return OffspringPmf::dirac(n);
  double log_p = std::log(p);
  double log_q = std::log1p(-p);
  double log_norm = log_one_minus_pow_complement(n, log_p);
  std::vector<PmfEntry> entries;
  double total = 0.0;
  for (int k = 1; k <= n; ++k) {
    double m = std::exp(log_binomial(n, k) + k * log_p + (n - k) * log_q -
                        log_norm);
    entries.push_back({k, m});
    total += m;
  }
  for (auto& e : entries) e.prob /= total;
  return OffspringPmf(std::move(entries), true);
}

OffspringPmf ztb_mixture(const OffspringPmf& pmf, double p) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("ztb_mixture needs p in (0, 1]");
  if (pmf.prob(0) > 0.0)
    throw std::invalid_argument("ztb_mixture needs a pmf without mass at 0");
  const int max_d = pmf.max_degree();
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_survive = pmf.log_survival_transform(log_p);

  // (a) sum over the number l of discarded children
  std::vector<double> direct(static_cast<std::size_t>(max_d) + 1, 0.0);
  for (int d = 1; d <= max_d; ++d) {
    double acc = 0.0;
    for (const auto& e : pmf.entries()) {
      int l = e.degree - d;
      if (l < 0) continue;
      double lt = l == 0 ? 0.0 : l * log_q;
      acc += std::exp(std::log(e.prob) + log_binomial(e.degree, l) + lt +
                      d * log_p - log_survive);
    }
    direct[static_cast<std::size_t>(d)] = acc;
  }

  // (b) mixture of zero-truncated binomials weighted by survival of X
  std::vector<double> mixed(direct.size(), 0.0);
  for (const auto& e : pmf.entries()) {
    double w = std::exp(std::log(e.prob) +
                        log_one_minus_pow_complement(e.degree, log_p) -
                        log_survive);
    auto z = zero_truncated_binomial(e.degree, p);
    for (const auto& ze : z.entries())
      mixed[static_cast<std::size_t>(ze.degree)] += w * ze.prob;
  }

  double total = 0.0;
  for (std::size_t d = 1; d < direct.size(); ++d) {
    if (std::abs(direct[d] - mixed[d]) > kMixtureTolerance)
      throw std::logic_error("ztb_mixture routes disagree at degree " +
                             std::to_string(d) + ": " +
                             format_real(direct[d]) + " vs " +
                             format_real(mixed[d]));
    total += direct[d];
  }
  std::vector<PmfEntry> entries;
  for (std::size_t d = 1; d < direct.size(); ++d)
    entries.push_back({static_cast<int>(d), direct[d] / total});
  return OffspringPmf(std::move(entries), true);
}

double tv_distance(const OffspringPmf& a, const OffspringPmf& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  double l1 = 0.0;
  while (i < ea.size() || j < eb.size()) {
    if (j == eb.size() || (i < ea.size() && ea[i].degree < eb[j].degree)) {
      l1 += ea[i++].prob;
    } else if (i == ea.size() || eb[j].degree < ea[i].degree) {
      l1 += eb[j++].prob;
    } else {
      l1 += std::abs(ea[i++].prob - eb[j++].prob);
    }
  }
  return std::min(1.0, 0.5 * l1);
}

}  // namespace gwising
