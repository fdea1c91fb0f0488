#include "gwising/pruned_law.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "gwising/numeric.hpp"

namespace gwising {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log G(exp(log_s)) without underflow.
double log_generating(const OffspringPmf& pmf, double log_s) {
  LogSumExp acc;
  for (const auto& e : pmf.entries()) {
    if (e.degree == 0) {
      acc.add(std::log(e.prob));
    } else if (log_s != kNegInf) {
      acc.add(std::log(e.prob) + e.degree * log_s);
    }
  }
  return acc.value();
}

}  // namespace

GammaProfile::GammaProfile(OffspringPmf base, double p, int n)
    : base_(std::move(base)), p_(p), n_(n) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("pruning needs p in (0, 1]");
  if (n < 0) throw std::invalid_argument("negative depth");
  if (base_.prob(0) > 0.0)
    throw std::invalid_argument("base law must have no mass at 0");
  nu_ = base_.mean();
  if (nu_ == 1.0)
    k_star_ = p == 1.0 ? n : kNegInf;
  else
    k_star_ = n + std::log(p) / std::log(nu_);

  const auto size = static_cast<std::size_t>(n) + 1;
  bar_.resize(size);
  log_bar_.resize(size);
  log_one_minus_bar_.resize(size);
  bar_[0] = 1.0 - p;
  log_bar_[0] = p == 1.0 ? kNegInf : std::log1p(-p);
  log_one_minus_bar_[0] = std::log(p);
  for (std::size_t j = 1; j < size; ++j) {
    bar_[j] = base_.generating_function(bar_[j - 1]);
    log_bar_[j] = log_generating(base_, log_bar_[j - 1]);
    log_one_minus_bar_[j] = base_.log_survival_transform(log_one_minus_bar_[j - 1]);
  }
}

PrunedLaw::PrunedLaw(GammaProfile profile)
    : profile_(std::move(profile)), tilde_mu0_(OffspringPmf({{0, 1.0}})) {
  const int n = profile_.n();
  laws_.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    laws_.push_back(ztb_mixture(profile_.base(), profile_.one_minus_gamma(k + 1)));
  if (n == 0) return;
  std::vector<PmfEntry> entries{{0, profile_.gamma(0)}};
  // complement of the stored atom, so the masses sum to 1 even where the plain
  // and log-propagated profiles differ in the last digits
  const double alive = 1.0 - profile_.gamma(0);
  for (const auto& e : laws_[0].entries()) entries.push_back({e.degree, alive * e.prob});
  tilde_mu0_ = OffspringPmf(std::move(entries));
}

PrunedMoments::PrunedMoments(const PrunedLaw& law, double q) : q_(q) {
  validate_q(q);
  const GammaProfile& g = law.profile();
  const int n = g.n();
  const double log_nu = std::log(g.nu());
  nu_star_.resize(static_cast<std::size_t>(n));
  sigma_.resize(static_cast<std::size_t>(n));
  log_m0_.assign(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k < n; ++k) {
    nu_star_[k] = std::exp(log_nu + g.log_one_minus_gamma(k + 1) - g.log_one_minus_gamma(k));
    double from_law = law.mu_star(k).mean();
    if (std::abs(nu_star_[k] - from_law) > 1e-12 * from_law)
      throw std::logic_error("pruned mean formula disagrees with the law at k = " +
                             std::to_string(k) + ": " + format_real(nu_star_[k]) +
                             " vs " + format_real(from_law));
    sigma_[k] = law.mu_star(k).q_variance(q);
    log_m0_[k + 1] = log_m0_[k] + std::log(nu_star_[k]);
  }
  v_.assign(static_cast<std::size_t>(n) + 1, 1.0);
  for (int k = 0; k < n; ++k)
    for (int i = k; i < n; ++i)
      v_[k] += sigma_[i] * std::exp(-(q - 1.0) * (log_m0_[i] - log_m0_[k]));
}

std::optional<Tree> sample_pruned_direct(const PrunedLaw& law, RandomStream& rng,
                                         std::uint64_t population_cap) {
  // the empty tree has probability gamma_0; otherwise the root degree follows
  // mu_star(0), which is tilde_mu0 conditioned on being positive
  if (rng.uniform() < law.profile().gamma(0)) return std::nullopt;
  return sample_inhomogeneous_bp(law.generation_laws(), rng, population_cap);
}

double pruned_tree_probability(const std::optional<Tree>& shape, const PrunedLaw& law) {
  const GammaProfile& g = law.profile();
  if (!shape) return g.gamma(0);
  if (shape->depth() != g.n())
    throw std::invalid_argument("shape depth differs from the law's depth");
  double log_prob = g.log_one_minus_gamma(0);
  for (int k = 0; k < g.n(); ++k) {
    const OffspringPmf& mu = law.mu_star(k);
    for (Vertex v : shape->generation(k).vertices()) {
      double m = mu.prob(static_cast<int>(shape->child_count(v)));
      if (m == 0.0) return 0.0;
      log_prob += std::log(m);
    }
  }
  return std::exp(log_prob);
}

double fit_generating_constant(const OffspringPmf& pmf, double q) {
  const double mq = pmf.q_moment(q);
  auto ratio = [&](double u) {
    // G(1-u) - 1 + nu u with nu = sum d p_d, summed termwise to limit cancellation
    double excess = 0.0;
    for (const auto& e : pmf.entries())
      excess += e.prob * (std::expm1(e.degree * std::log1p(-u)) + e.degree * u);
    return excess / (mq * std::pow(u, q));
  };
  double best = 0.0;
  for (int i = 1; i <= 10000; ++i) best = std::max(best, ratio(i / 10000.0));
  for (int i = 0; i <= 400; ++i) best = std::max(best, ratio(std::pow(10.0, -4.0 * i / 400.0)));
  if (q == 2.0) {
    double second = 0.0;
    for (const auto& e : pmf.entries()) second += e.prob * e.degree * (e.degree - 1.0);
    best = std::max(best, 0.5 * second / mq);
  }
  return best;
}

int k_bar_star_1(const GammaProfile& profile, double c_mu, double q) {
  double sum = 0.0;
  for (int k = 0; k <= profile.n(); ++k) {
    sum += c_mu * std::exp((q - 1.0) * profile.log_one_minus_gamma_bar(k));
    if (sum > 0.5) return k;
  }
  return profile.n();
}

PhaseConstants calibrate_phase_constants(const OffspringPmf& pmf, double q,
                                         double p, int n, double margin) {
  PrunedLaw law(GammaProfile(pmf, p, n));
  PrunedMoments mom(law, q);
  const GammaProfile& g = law.profile();
  const double nu = g.nu();
  const double ks = g.k_star();

  PhaseConstants c{};
  c.c_generating = fit_generating_constant(pmf, q) * margin;
  c.c_mu = c.c_generating * pmf.q_moment(q) / nu;

  double rate = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= n && k < ks; ++k)
    rate = std::min(rate, -g.log_gamma(k) / (ks - k));
  c.c4 = rate / margin;

  double c5 = 0.0, c6 = 0.0;
  for (int k = 0; k < n; ++k) {
    if (k <= ks) {
      c5 = std::max(c5, (nu - mom.nu_star(k)) * std::exp(c.c4 * (ks - k)));
    } else {
      c5 = std::max(c5, (mom.nu_star(k) - 1.0) * std::pow(nu, k - ks));
    }
    if (k >= ks)
      c6 = std::max(c6, mom.sigma_q_star(k) * std::pow(nu, (q - 1.0) * (k - ks)));
  }
  c.c5 = c5 * margin;
  c.c6 = c6 * margin;

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0, vmax = 0.0;
  for (int k = 0; k <= n; ++k) {
    double scaled = std::exp(mom.log_growth(0, k) - std::min<double>(k, ks) * std::log(nu));
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
    vmax = std::max(vmax, mom.v(k));
  }
  c.c7 = lo / margin;
  c.c8 = hi * margin;
  c.v_bound = vmax * margin;
  return c;
}

PhaseBoundReport check_phase_bounds(const GammaProfile& g,
                                    const PhaseConstants& constants, double q) {
  // comparisons are made on logarithms with a relative slack of 1e-12
  constexpr double kSlack = 1e-12;
  auto leq = [](double a, double b) { return a <= b + kSlack * std::max(1.0, std::abs(b)); };
  PhaseBoundReport r;
  const double log_nu = std::log(g.nu()), log_p = std::log(g.p());
  const double ks = g.k_star();
  r.k_bar_star_1 = k_bar_star_1(g, constants.c_mu, q);
  for (int j = 0; j <= g.n(); ++j) {
    double lhs = g.log_one_minus_gamma_bar(j);
    if (!leq(lhs, j * log_nu + log_p)) r.upper_all = false;
    if (j <= r.k_bar_star_1 && !leq(std::log(0.5) + j * log_nu + log_p, lhs))
      r.lower_window = false;
  }
  for (int k = 0; k <= g.n(); ++k) {
    if (k <= ks && !leq(g.log_gamma(k), -constants.c4 * (std::floor(ks) - k)))
      r.gamma_decay = false;
    if (k >= ks && !leq(g.log_one_minus_gamma(k), -(k - ks) * log_nu)) r.tail = false;
  }
  return r;
}

MomentBoundReport check_moment_bounds(const PrunedLaw& law, const PrunedMoments& m,
                                      const PhaseConstants& c) {
  const GammaProfile& g = law.profile();
  const int n = g.n();
  const double nu = g.nu(), log_nu = std::log(nu), ks = g.k_star();
  const double mq = g.base().q_moment(m.q());
  constexpr double kRel = 1e-12;
  MomentBoundReport r;
  for (int k = 0; k <= n; ++k) {
    double exact = std::exp(k * log_nu + g.log_one_minus_gamma(k) - g.log_one_minus_gamma(0));
    if (std::abs(m.growth(0, k) - exact) > kRel * exact) r.growth_identity = false;
    r.max_v = std::max(r.max_v, m.v(k));
    if (m.v(k) > c.v_bound) r.v_bounded = false;
    double scaled = std::exp(m.log_growth(0, k) - std::min<double>(k, ks) * log_nu);
    if (scaled < c.c7 * (1 - kRel) || scaled > c.c8 * (1 + kRel)) r.growth_envelope = false;
    if (k == n) break;
    double nk = m.nu_star(k);
    if (nk < 1.0 * (1 - kRel) || nk > nu * (1 + kRel)) r.nu_star_range = false;
    if (m.sigma_q_star(k) > mq * (1 + kRel)) r.sigma_bounded = false;
    // floor(k*) on the side where it loosens the bound
    if (k <= ks && nu - nk > c.c5 * std::exp(-c.c4 * (std::floor(ks) - k)) * (1 + kRel))
      r.mean_envelope = false;
    if (k > ks && nk - 1.0 > c.c5 * std::pow(nu, -std::floor(k - ks)) * (1 + kRel))
      r.mean_envelope = false;
    if (k >= ks &&
        m.sigma_q_star(k) > c.c6 * std::pow(nu, -(m.q() - 1.0) * std::floor(k - ks)) * (1 + kRel))
      r.variance_envelope = false;
  }
  return r;
}

}  // namespace gwising
