#pragma once

// Law of the pruned Galton-Watson tree under i.i.d. Bernoulli(p) leaf bits.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "gwising/distributions.hpp"
#include "gwising/random.hpp"
#include "gwising/tree.hpp"

namespace gwising {

/// Pruning probabilities gamma_k = P(a depth-k vertex is pruned) for a tree of
/// depth n, stored from the leaves up as gamma_bar_j = gamma_{n-j}.
///
/// gamma_bar_0 = 1 - p and gamma_bar_j = G(gamma_bar_{j-1}); the stored values
/// satisfy this recursion exactly. 1 - gamma_bar_j and log gamma_bar_j are
/// propagated separately (through F(t) = 1 - G(1 - t) and log G) so they keep
/// full relative precision where the plain values round to 1 or 0.
class GammaProfile {
 public:
  GammaProfile(OffspringPmf base, double p, int n);

  const OffspringPmf& base() const { return base_; }
  double p() const { return p_; }
  int n() const { return n_; }
  double nu() const { return nu_; }
  // log_nu(p nu^n) = n + log p / log nu; kept real.
  double k_star() const { return k_star_; }

  double gamma_bar(int j) const { return bar_[j]; }
  double one_minus_gamma_bar(int j) const { return std::exp(log_one_minus_bar_[j]); }
  double log_one_minus_gamma_bar(int j) const { return log_one_minus_bar_[j]; }
  double log_gamma_bar(int j) const { return log_bar_[j]; }

  double gamma(int k) const { return bar_[n_ - k]; }
  double one_minus_gamma(int k) const { return one_minus_gamma_bar(n_ - k); }
  double log_one_minus_gamma(int k) const { return log_one_minus_bar_[n_ - k]; }
  double log_gamma(int k) const { return log_bar_[n_ - k]; }

 private:
  OffspringPmf base_;
  double p_;
  int n_;
  double nu_;
  double k_star_;
  std::vector<double> bar_;
  std::vector<double> log_bar_;
  std::vector<double> log_one_minus_bar_;
};

/// Offspring laws of the pruned tree: mu_star(k) for k < n is the law of
/// Bin(X, 1 - gamma_{k+1}) conditioned on being positive, X ~ base.
class PrunedLaw {
 public:
  explicit PrunedLaw(GammaProfile profile);

  const GammaProfile& profile() const { return profile_; }
  int n() const { return profile_.n(); }

  const OffspringPmf& mu_star(int k) const { return laws_.at(static_cast<std::size_t>(k)); }
  // mu_star(0) with an atom gamma_0 at 0 for the empty tree.
  const OffspringPmf& tilde_mu0() const { return tilde_mu0_; }
  // [mu_star(0), ..., mu_star(n-1)]: the law of the pruned tree given that
  // it is nonempty.
  std::span<const OffspringPmf> generation_laws() const { return laws_; }

 private:
  GammaProfile profile_;
  std::vector<OffspringPmf> laws_;
  OffspringPmf tilde_mu0_;
};

/// Means, q-variances and growth products of the pruned laws.
class PrunedMoments {
 public:
  PrunedMoments(const PrunedLaw& law, double q);

  double q() const { return q_; }
  int n() const { return static_cast<int>(nu_star_.size()); }
  double nu_star(int k) const { return nu_star_[k]; }
  double sigma_q_star(int k) const { return sigma_[k]; }
  // M_{i,j} = prod_{k=i}^{j-1} nu_star(k), 0 <= i <= j <= n.
  double growth(int i, int j) const { return std::exp(log_m0_[j] - log_m0_[i]); }
  double log_growth(int i, int j) const { return log_m0_[j] - log_m0_[i]; }
  // v_{k,n} = 1 + sum_{i=k}^{n-1} sigma_q_star(i) M_{k,i}^{-(q-1)}
  double v(int k) const { return v_[k]; }

 private:
  double q_;
  std::vector<double> nu_star_;
  std::vector<double> sigma_;
  std::vector<double> log_m0_;
  std::vector<double> v_;
};

// The pruned tree sampled directly from its branching structure.
std::optional<Tree> sample_pruned_direct(const PrunedLaw& law, RandomStream& rng,
                                         std::uint64_t population_cap = kDefaultPopulationCap);

// P(pruned tree = shape), with nullopt standing for the empty tree. Shapes
// with a line ending before depth n have probability 0.
double pruned_tree_probability(const std::optional<Tree>& shape, const PrunedLaw& law);

// Smallest c with G(s) <= 1 + nu (s - 1) + c m_q (1 - s)^q on [0, 1].
double fit_generating_constant(const OffspringPmf& pmf, double q);

// min{k : sum_{i<=k} C_mu (1 - gamma_bar_i)^{q-1} > 1/2}, or n if none.
int k_bar_star_1(const GammaProfile& profile, double c_mu, double q);

/// Constants of the phase-transition bounds for one base law and q.
struct PhaseConstants {
  double c_generating;  // c in G(s) <= 1 + nu(s-1) + c m_q (1-s)^q
  double c_mu;          // c m_q / nu
  double c4;            // gamma_k <= exp(-c4 (k* - k)) for k <= k*
  double c5;            // nu - nu*_k and nu*_k - 1 envelopes
  double c6;            // sigma*_{q,k} <= c6 nu^{-(q-1)(k-k*)} for k >= k*
  double c7;            // c7 nu^{min(k,k*)} <= M*_{0,k}
  double c8;            // M*_{0,k} <= c8 nu^{min(k,k*)}
  double v_bound;       // v*_{k,n} <= v_bound
};

// Fits every constant on one profile and applies the safety margin: rates
// and lower constants are divided by `margin`, upper constants multiplied.
PhaseConstants calibrate_phase_constants(const OffspringPmf& pmf, double q,
                                         double p, int n, double margin);

inline constexpr double kCalibrationMargin = 1.25;

/// Outcome of checking the phase-transition inequalities on one profile.
struct PhaseBoundReport {
  int k_bar_star_1 = 0;
  bool upper_all = true;     // 1 - gamma_bar_j <= nu^j p for every j
  bool lower_window = true;  // (1/2) nu^j p <= 1 - gamma_bar_j for j <= k_bar_star_1
  bool gamma_decay = true;   // gamma_k <= exp(-c4 (floor(k*) - k)) for k <= k*
  bool tail = true;          // 1 - gamma_k <= nu^{-(k - k*)} for k >= k*
  bool all() const { return upper_all && lower_window && gamma_decay && tail; }
};

PhaseBoundReport check_phase_bounds(const GammaProfile& profile,
                                    const PhaseConstants& constants, double q);

/// Moment and growth inequalities of the pruned laws on one profile.
struct MomentBoundReport {
  bool growth_identity = true;  // M*_{0,k} = nu^k (1 - gamma_k) / (1 - gamma_0) to 1e-12
  bool nu_star_range = true;    // 1 <= nu*_k <= nu
  bool sigma_bounded = true;    // sigma*_{q,k} <= m_q
  bool v_bounded = true;        // v*_{k,n} <= v_bound
  bool mean_envelope = true;    // c5 envelopes on either side of k*
  bool variance_envelope = true;  // c6 envelope past k*
  bool growth_envelope = true;  // c7 nu^{k^k*} <= M*_{0,k} <= c8 nu^{k^k*}
  double max_v = 0.0;
  bool all() const {
    return growth_identity && nu_star_range && sigma_bounded && v_bounded &&
           mean_envelope && variance_envelope && growth_envelope;
  }
};

MomentBoundReport check_moment_bounds(const PrunedLaw& law, const PrunedMoments& moments,
                                      const PhaseConstants& constants);

}  // namespace gwising
