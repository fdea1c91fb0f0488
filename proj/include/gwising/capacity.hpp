#pragma once

// Nonlinear p-capacity of trees whose edges carry resistances.
//
// With s = 1/(p-1) and q = p/(p-1), the p-resistance of a weighted tree is
// (inf over unit flows of sum_{u != root} R_u^s theta(u)^q)^{p-1} and the
// capacity is its reciprocal. Leaves are the sinks.

#include <optional>
#include <span>
#include <vector>

#include "gwising/tree.hpp"

namespace gwising {

/// Resistance R_u of the edge above u, a function of |u| only. R_root = 1.
class ResistanceProfile {
 public:
  // R_u = base^{-|u|}
  static ResistanceProfile geometric(double base);
  // by_depth[k - 1] is the resistance at depth k >= 1
  static ResistanceProfile per_generation(std::vector<double> by_depth);

  bool is_geometric() const { return by_depth_.empty(); }
  double base() const { return base_; }
  double at_depth(int k) const;
  double log_at_depth(int k) const;

 private:
  ResistanceProfile() = default;
  double base_ = 1.0;
  std::vector<double> by_depth_;
};

/// Per-vertex flow; theta[root] is the strength.
struct Flow {
  std::vector<double> theta;

  double strength() const { return theta.empty() ? 0.0 : theta[0]; }
  // max over internal vertices of |theta(u) - sum of children|
  double conservation_residual(const Tree& tree) const;
};

struct CapacityResult {
  double capacity = 0.0;
  double p = 0.0;
  // phi(u) = R_u capa(t(u)); +inf at leaves
  std::vector<double> phi;
  std::optional<Flow> witness_flow;
  bool converged = true;
  long iterations = 0;
};

// Conjugate exponents of p > 1.
double capacity_s(double p);
double capacity_q(double p);

// Leaf-to-root recursion phi(u) = sum_v (R_u/R_v) phi(v)/(1+phi(v)^s)^{1/s}.
// A lone root has capacity 1.
CapacityResult capacity_recursion(const Tree& tree, const ResistanceProfile& res, double p);

// (sum_k (R_k/|t_k|)^s)^{-1/s} for a spherically symmetric tree with
// generation sizes |t_1|..|t_n| and resistances R_1..R_n.
double capacity_spherical(std::span<const std::uint64_t> generation_sizes,
                          std::span<const double> resistances, double p);

// theta(u) = (leaves below u) / (all leaves)
Flow uniform_flow(const Tree& tree);

// Thomson resistance estimate (sum_{u != root} R_u^s theta(u)^q)^{p-1} of a
// unit flow; never below the exact resistance.
double flow_energy(const Tree& tree, const Flow& flow, const ResistanceProfile& res, double p);

struct BruteforceOptions {
  long max_iterations = 100'000;
  int stall_window = 50;
  double stall_tolerance = 1e-12;
};

inline constexpr std::size_t kBruteforceVertexLimit = 200;

// Direct minimisation of the flow energy by projected gradient over the
// splitting fractions at each vertex.
CapacityResult capacity_bruteforce(const Tree& tree, const ResistanceProfile& res, double p,
                                   const BruteforceOptions& options = {});

// (sum_{k=1}^n (R^k M_{0,k})^{-s})^{-1/s}; growth[k - 1] = M_{0,k}.
double expected_capacity_upper(std::span<const double> growth, double r, double p);

// p_n (nu tanh b)^n away from criticality, min(n^{-1/(q-1)}, p_n) at it.
double alpha_n(double beta, double nu, double p_n, int n, double p);

// sum_{k=1}^n R^{-ks} nu^{-s min(k, k*)}
double k_n(double r, double nu, double k_star, int n, double p);

}  // namespace gwising
