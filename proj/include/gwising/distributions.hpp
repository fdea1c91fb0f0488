#pragma once

// Finite-support offspring laws on the nonnegative integers.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gwising/random.hpp"

namespace gwising {

struct PmfEntry {
  int degree;
  double prob;

  friend bool operator==(const PmfEntry&, const PmfEntry&) = default;
};

/// Probability mass function with finite support on {0, 1, 2, ...}.
///
/// Immutable after construction. Entries are kept in strictly increasing
/// degree order; the masses must sum to one within 1e-12. The cumulative
/// table used by sample() is built once at construction.
class OffspringPmf {
 public:
  static constexpr double kNormalizationTolerance = 1e-12;

  explicit OffspringPmf(std::vector<PmfEntry> entries, bool no_zero = false);

  static OffspringPmf dirac(int degree);
  static OffspringPmf from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::span<const PmfEntry> entries() const { return entries_; }
  bool no_zero() const { return no_zero_; }

  // Mass at d; zero off the support.
  double prob(int degree) const;
  int min_degree() const;  // smallest degree with positive mass (d0)
  int max_degree() const;  // largest degree with positive mass

  // mu(0) = 0 and mu(1) < 1.
  bool satisfies_no_extinction() const;

  double mean() const;
  // E[X^q] for q in (1, 2].
  double q_moment(double q) const;
  // E[X^q] - E[X]^q for q in (1, 2]; nonnegative by the power-mean inequality.
  double q_variance(double q) const;

  // G(s) = E[s^X] for s in [0, 1].
  double generating_function(double s) const;
  // F(t) = 1 - G(1 - t), evaluated without cancellation for small t.
  double survival_transform(double t) const;
  // log F(t) given log t; valid down to t far below the smallest double.
  double log_survival_transform(double log_t) const;

  int sample(RandomStream& rng) const;

  friend bool operator==(const OffspringPmf& a, const OffspringPmf& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<PmfEntry> entries_;
  std::vector<double> cumulative_;
  bool no_zero_ = false;
};

/// A parametric law cut at a finite degree and renormalized.
struct TruncatedPmf {
  OffspringPmf pmf;
  double tail_mass;  // mass beyond the cutoff that was discarded
};

// Truncates `mass` on [min_degree, cutoff]. `mass` must be a probability mass
// function on the integers >= min_degree.
TruncatedPmf truncate_law(const std::function<double(int)>& mass, int min_degree,
                          int cutoff);

// Geometric law on {1, 2, ...}: P(k) = (1 - a)^(k-1) a, truncated at cutoff.
TruncatedPmf truncated_geometric(double success, int cutoff);

/// Law of Bin(n, p) conditioned to be positive.
OffspringPmf zero_truncated_binomial(int n, double p);

/// Law of Bin(X, p) conditioned to be positive, with X ~ pmf.
///
/// The masses are computed twice: from the explicit double sum over the
/// number of discarded children, and as the survival-weighted mixture of
/// zero_truncated_binomial(d, p). The two must agree pointwise to 1e-12,
/// otherwise std::logic_error is thrown. The result is renormalized.
OffspringPmf ztb_mixture(const OffspringPmf& pmf, double p);

/// Total variation distance (half the L1 distance).
double tv_distance(const OffspringPmf& a, const OffspringPmf& b);

// log of the binomial coefficient C(n, k).
double log_binomial(int n, int k);

void validate_q(double q);

}  // namespace gwising
