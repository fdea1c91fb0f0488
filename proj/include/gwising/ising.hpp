#pragma once

// Root log-likelihood ratio of the ferromagnetic Ising model on a tree.

#include <functional>
#include <limits>
#include <vector>

#include "gwising/field_pruning.hpp"
#include "gwising/tree.hpp"

namespace gwising {

/// Nonnegative extended real: a finite value or +infinity, the latter tagged
/// explicitly so that g(+inf) = 2 beta is exact.
class LogLikelihoodRatio {
 public:
  constexpr LogLikelihoodRatio() = default;
  constexpr explicit LogLikelihoodRatio(double v) : value_(v) {}
  static constexpr LogLikelihoodRatio infinity() {
    LogLikelihoodRatio r;
    r.infinite_ = true;
    r.value_ = std::numeric_limits<double>::infinity();
    return r;
  }

  constexpr bool is_infinite() const { return infinite_; }
  // +inf as a double when infinite.
  constexpr double value() const { return value_; }

  friend constexpr bool operator==(LogLikelihoodRatio, LogLikelihoodRatio) = default;

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

// g(x) = log((e^{2b} e^x + 1) / (e^{2b} + e^x)) for finite x >= 0.
double g_beta(double beta, double x);
double g_beta(double beta, LogLikelihoodRatio x);

// Replacement link used by the validation harness to check that a broken
// recursion is caught; the default is g_beta.
using LinkFunction = std::function<double(double beta, double x)>;

// Leaves at depth n get +inf; r(u) = sum over children of g(r(v)).
std::vector<LogLikelihoodRatio> lyons_plus(const Tree& tree, double beta);

// r(u) = 2 beta h(u) + sum over children of g(r(v)).
std::vector<double> lyons_field(const Tree& tree, const FieldAssignment& field,
                                double beta, const LinkFunction& link = {});

// tanh(r / 2); 1 for +inf.
double magnetization(LogLikelihoodRatio r);
double magnetization(double r);

struct GibbsRoot {
  double magnetization;
  double log_ratio;  // log Z(root=+1) - log Z(root=-1); may be +inf
};

inline constexpr std::size_t kGibbsVertexLimit = 24;

// Exhaustive enumeration of spin configurations with energy
// beta (sum_edges s_u s_v + sum_v h_v s_v). Throws std::length_error above
// kGibbsVertexLimit vertices.
GibbsRoot gibbs_bruteforce(const Tree& tree, const FieldAssignment& field,
                           double beta);
// Same with depth-n spins fixed to +1 and no field; compares to lyons_plus.
GibbsRoot gibbs_bruteforce_plus(const Tree& tree, double beta);

// Upper bound for E[r(root)] on a Galton-Watson tree of mean nu with
// Bernoulli(p) fields on every vertex. At criticality (|nu tanh b - 1| <
// 1e-12) returns max(2 b p, x) with x the fixed point of x = 2 b p + nu g(x).
double upper_bound_mean_r(double beta, double nu, double p, int n);
// The critical fixed point itself, by bisection to 1e-12.
double critical_fixed_point(double beta, double nu, double p);

}  // namespace gwising
