#include "gwising/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gwising/numeric.hpp"

namespace gwising {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_exponent(double p) {
  if (!(p > 1.0) || std::isinf(p)) throw std::invalid_argument("capacity needs p > 1");
}

void check_unit_flow(const Tree& tree, const Flow& flow) {
  if (flow.theta.size() != tree.size())
    throw std::invalid_argument("flow size does not match tree");
  if (std::abs(flow.strength() - 1.0) > 1e-9)
    throw std::invalid_argument("flow is not a unit flow");
  for (double t : flow.theta)
    if (!(t >= 0.0)) throw std::invalid_argument("negative flow value");
}

// Euclidean projection onto the probability simplex (sort-based).
void project_to_simplex(std::span<double> x, std::vector<double>& scratch) {
  scratch.assign(x.begin(), x.end());
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double cumulative = 0.0, shift = 0.0;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    cumulative += scratch[i];
    double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (scratch[i] - candidate > 0.0) shift = candidate;
  }
  for (double& v : x) v = std::max(0.0, v - shift);
}

}  // namespace

ResistanceProfile ResistanceProfile::geometric(double base) {
  if (!(base > 0.0) || std::isinf(base))
    throw std::invalid_argument("resistance base must be positive and finite");
  ResistanceProfile r;
  r.base_ = base;
  return r;
}

ResistanceProfile ResistanceProfile::per_generation(std::vector<double> by_depth) {
  if (by_depth.empty()) throw std::invalid_argument("empty resistance profile");
  for (double v : by_depth)
    if (!(v > 0.0) || std::isinf(v))
      throw std::invalid_argument("resistances must be positive and finite");
  ResistanceProfile r;
  r.by_depth_ = std::move(by_depth);
  return r;
}

double ResistanceProfile::at_depth(int k) const { return std::exp(log_at_depth(k)); }

double ResistanceProfile::log_at_depth(int k) const {
  if (k < 0) throw std::out_of_range("negative depth");
  if (k == 0) return 0.0;
  if (is_geometric()) return -k * std::log(base_);
  if (static_cast<std::size_t>(k) > by_depth_.size())
    throw std::out_of_range("resistance profile shorter than tree depth " + std::to_string(k));
  return std::log(by_depth_[static_cast<std::size_t>(k) - 1]);
}

double Flow::conservation_residual(const Tree& tree) const {
  double worst = 0.0;
  for (Vertex u = 0; u < tree.size(); ++u) {
    if (tree.is_leaf(u)) continue;
    double out = 0.0;
    for (Vertex v : tree.children(u).vertices()) out += theta[v];
    worst = std::max(worst, std::abs(theta[u] - out));
  }
  return worst;
}

double capacity_s(double p) {
  check_exponent(p);
  return 1.0 / (p - 1.0);
}

double capacity_q(double p) {
  check_exponent(p);
  return p / (p - 1.0);
}

CapacityResult capacity_recursion(const Tree& tree, const ResistanceProfile& res, double p) {
  const double s = capacity_s(p);
  CapacityResult out;
  out.p = p;
  if (tree.size() == 1) {
    out.capacity = 1.0;
    out.phi = {1.0};
    return out;
  }
  std::vector<double> log_phi(tree.size(), kInf);
  std::vector<double> log_r(static_cast<std::size_t>(tree.depth()) + 1);
  for (int k = 0; k <= tree.depth(); ++k) log_r[k] = res.log_at_depth(k);

  LogSumExp acc;
  for (Vertex u = static_cast<Vertex>(tree.size()); u-- > 0;) {
    if (tree.is_leaf(u)) continue;
    const int k = tree.depth_of(u);
    acc = LogSumExp();
    for (Vertex v : tree.children(u).vertices()) {
      // x / (1 + x^s)^{1/s}, which tends to 1 at a leaf
      double damped = std::isinf(log_phi[v]) ? 0.0
                                             : log_phi[v] - softplus(s * log_phi[v]) / s;
      acc.add(log_r[k] - log_r[k + 1] + damped);
    }
    log_phi[u] = acc.value();
    if (res.is_geometric() && res.base() < 1.0) {
      // each term is at most R
      double cap = std::log(res.base() * tree.child_count(u));
      if (log_phi[u] > cap + 1e-12 * std::max(1.0, std::abs(cap)))
        throw std::logic_error("capacity recursion exceeded R d(u) at vertex " +
                               std::to_string(u));
    }
  }
  out.phi.resize(tree.size());
  for (Vertex u = 0; u < tree.size(); ++u) out.phi[u] = std::exp(log_phi[u]);
  out.capacity = out.phi[0];
  return out;
}

double capacity_spherical(std::span<const std::uint64_t> sizes,
                          std::span<const double> resistances, double p) {
  const double s = capacity_s(p);
  if (sizes.empty()) return 1.0;
  if (resistances.size() != sizes.size())
    throw std::invalid_argument("need one resistance per generation");
  std::uint64_t previous = 1;
  LogSumExp acc;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0 || sizes[k] % previous != 0)
      throw std::invalid_argument("generation sizes are not spherically symmetric");
    if (!(resistances[k] > 0.0)) throw std::invalid_argument("resistances must be positive");
    previous = sizes[k];
    acc.add(s * (std::log(resistances[k]) - std::log(static_cast<double>(sizes[k]))));
  }
  return std::exp(-acc.value() / s);
}

Flow uniform_flow(const Tree& tree) {
  auto leaves = leaves_under_all(tree);
  Flow f;
  f.theta.resize(tree.size());
  const double total = static_cast<double>(leaves[0]);
  for (Vertex u = 0; u < tree.size(); ++u) f.theta[u] = leaves[u] / total;
  return f;
}

double flow_energy(const Tree& tree, const Flow& flow, const ResistanceProfile& res, double p) {
  const double s = capacity_s(p), q = capacity_q(p);
  check_unit_flow(tree, flow);
  if (tree.size() == 1) return 1.0;  // same convention as a lone root's capacity
  LogSumExp acc;
  for (Vertex u = 1; u < tree.size(); ++u) {
    if (flow.theta[u] == 0.0) continue;
    acc.add(s * res.log_at_depth(tree.depth_of(u)) + q * std::log(flow.theta[u]));
  }
  return std::exp((p - 1.0) * acc.value());
}

CapacityResult capacity_bruteforce(const Tree& tree, const ResistanceProfile& res, double p,
                                   const BruteforceOptions& options) {
  const double s = capacity_s(p), q = capacity_q(p);
  if (tree.size() > kBruteforceVertexLimit)
    throw std::invalid_argument("brute-force capacity limited to " +
                                std::to_string(kBruteforceVertexLimit) + " vertices");
  CapacityResult out;
  out.p = p;
  if (tree.size() == 1) {
    out.capacity = 1.0;
    out.phi = {1.0};
    return out;
  }
  const Vertex n = static_cast<Vertex>(tree.size());
  std::vector<double> weight(n, 0.0);
  for (Vertex u = 1; u < n; ++u) weight[u] = std::exp(s * res.log_at_depth(tree.depth_of(u)));

  // split[v] is the fraction of the parent's flow sent to v
  std::vector<double> split(n, 1.0);
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v : tree.children(u).vertices()) split[v] = 1.0 / tree.child_count(u);

  // unit_energy[v] = energy of the subtree at v per unit of theta(v)^q
  std::vector<double> unit_energy(n);
  auto evaluate = [&](const std::vector<double>& x) {
    for (Vertex u = n; u-- > 0;) {
      double e = weight[u];
      for (Vertex v : tree.children(u).vertices()) e += std::pow(x[v], q) * unit_energy[v];
      unit_energy[u] = e;
    }
    return unit_energy[0];
  };
  std::vector<double> theta_q(n);  // theta(u)^q
  auto fill_theta_q = [&](const std::vector<double>& x) {
    theta_q[0] = 1.0;
    for (Vertex v = 1; v < n; ++v) theta_q[v] = theta_q[tree.parent(v)] * std::pow(x[v], q);
  };

  double energy = evaluate(split);
  std::vector<double> grad(n, 0.0), trial(n), scratch;
  double step = 1.0;
  int quiet = 0;
  long it = 0;
  for (; it < options.max_iterations && quiet < options.stall_window; ++it) {
    fill_theta_q(split);
    // block gradient scaled by theta(u)^q so every vertex moves at the same pace
    for (Vertex v = 1; v < n; ++v)
      grad[v] = q * std::pow(split[v], q - 1.0) * unit_energy[v];
    double next = energy;
    while (true) {
      trial = split;
      double decrease = 0.0;
      for (Vertex u = 0; u < n; ++u) {
        auto kids = tree.children(u);
        if (kids.size() < 2) continue;
        for (Vertex v : kids.vertices()) trial[v] = split[v] - step * grad[v];
        project_to_simplex(std::span<double>(trial.data() + kids.begin, kids.size()), scratch);
        for (Vertex v : kids.vertices())
          decrease += theta_q[u] * grad[v] * (split[v] - trial[v]);
      }
      std::vector<double> saved = unit_energy;
      next = evaluate(trial);
      if (decrease <= 0.0) {
        // already stationary up to rounding
        unit_energy = saved;
        next = energy;
        break;
      }
      if (next <= energy - 1e-4 * decrease) {
        split.swap(trial);
        step *= 2.0;
        break;
      }
      unit_energy = saved;
      step *= 0.5;
      if (step < 1e-300) {
        next = energy;
        break;
      }
    }
    quiet = std::abs(energy - next) <= options.stall_tolerance * energy ? quiet + 1 : 0;
    energy = next;
  }
  out.iterations = it;
  out.converged = quiet >= options.stall_window;

  Flow witness;
  witness.theta.assign(n, 1.0);
  for (Vertex v = 1; v < n; ++v) witness.theta[v] = witness.theta[tree.parent(v)] * split[v];
  out.capacity = std::pow(energy, -(p - 1.0));
  // phi(u) = R_u capa(t(u)), with the subtree flow renormalised at u
  evaluate(split);
  out.phi.assign(n, kInf);
  for (Vertex u = 0; u < n; ++u) {
    if (tree.is_leaf(u)) continue;
    double sub = unit_energy[u] - weight[u];
    out.phi[u] = std::exp(res.log_at_depth(tree.depth_of(u))) * std::pow(sub, -(p - 1.0));
  }
  out.phi[0] = out.capacity;
  out.witness_flow = std::move(witness);
  return out;
}

double expected_capacity_upper(std::span<const double> growth, double r, double p) {
  const double s = capacity_s(p);
  if (!(r > 0.0)) throw std::invalid_argument("resistance base must be positive");
  if (growth.empty()) throw std::invalid_argument("need at least one generation");
  LogSumExp acc;
  for (std::size_t i = 0; i < growth.size(); ++i) {
    if (!(growth[i] > 0.0)) throw std::invalid_argument("growth must be positive");
    double k = static_cast<double>(i + 1);
    acc.add(-s * (k * std::log(r) + std::log(growth[i])));
  }
  return std::exp(-acc.value() / s);
}

double alpha_n(double beta, double nu, double p_n, int n, double p) {
  const double q = capacity_q(p);
  if (!(beta > 0.0 && nu > 0.0 && p_n > 0.0) || n < 1)
    throw std::invalid_argument("alpha_n needs positive parameters");
  const double growth = nu * std::tanh(beta);
  if (std::abs(growth - 1.0) < 1e-12)
    return std::min(std::pow(static_cast<double>(n), -1.0 / (q - 1.0)), p_n);
  return std::exp(std::log(p_n) + n * std::log(growth));
}

double k_n(double r, double nu, double k_star, int n, double p) {
  const double s = capacity_s(p);
  double sum = 0.0;
  for (int k = 1; k <= n; ++k)
    sum += std::exp(-s * (k * std::log(r) + std::min<double>(k, k_star) * std::log(nu)));
  return sum;
}

}  // namespace gwising
