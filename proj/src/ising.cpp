#include "gwising/ising.hpp"

#include <cmath>
#include <stdexcept>

#include "gwising/numeric.hpp"

namespace gwising {

double g_beta(double beta, double x) {
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 2.0 * beta;
  // (e^{2b} e^x + 1) / (e^{2b} + e^x) = (1 + P) / (1 - P) with
  // P = tanh(b) tanh(x / 2)
  double prod = std::tanh(beta) * std::tanh(0.5 * x);
  if (prod < 0.5) return std::log1p(prod) - std::log1p(-prod);
  // 1 - P = a + b - ab with a = 1 - tanh(b), b = 1 - tanh(x / 2)
  double a = 2.0 / (1.0 + std::exp(2.0 * beta));
  double b = 2.0 / (1.0 + std::exp(x));
  double gap = a + b - a * b;
  if (gap < 1e-300)
    return log_add_exp(2.0 * beta + x, 0.0) - log_add_exp(2.0 * beta, x);
  return std::log1p(prod) - std::log(gap);
}

double g_beta(double beta, LogLikelihoodRatio x) {
  return x.is_infinite() ? 2.0 * beta : g_beta(beta, x.value());
}

std::vector<LogLikelihoodRatio> lyons_plus(const Tree& tree, double beta) {
  std::vector<LogLikelihoodRatio> r(tree.size());
  std::vector<double> acc(tree.size(), 0.0);
  const VertexRange boundary = tree.boundary();
  for (Vertex v = static_cast<Vertex>(tree.size()); v-- > 0;) {
    if (v >= boundary.begin && v < boundary.end) {
      r[v] = LogLikelihoodRatio::infinity();
    } else {
      r[v] = LogLikelihoodRatio(acc[v]);
    }
    if (v > 0) acc[tree.parent(v)] += g_beta(beta, r[v]);
  }
  return r;
}

std::vector<double> lyons_field(const Tree& tree, const FieldAssignment& field,
                                double beta, const LinkFunction& link) {
  if (field.size() != tree.size())
    throw std::invalid_argument("field size does not match tree");
  std::vector<double> r(tree.size());
  for (Vertex v = 0; v < tree.size(); ++v) r[v] = field[v] ? 2.0 * beta : 0.0;
  // deepest vertices come last, so one reverse sweep finishes every child
  // before its parent
  for (Vertex v = static_cast<Vertex>(tree.size()); v-- > 1;) {
    if (r[v] == 0.0) continue;
    r[tree.parent(v)] += link ? link(beta, r[v]) : g_beta(beta, r[v]);
  }
  return r;
}

double magnetization(LogLikelihoodRatio r) {
  return r.is_infinite() ? 1.0 : std::tanh(0.5 * r.value());
}

double magnetization(double r) {
  return std::isinf(r) ? 1.0 : std::tanh(0.5 * r);
}

namespace {

// Sum of exp(energy) over configurations, split by root spin. Spins with
// fixed_plus set are held at +1.
GibbsRoot enumerate_spins(const Tree& tree, const std::vector<std::uint8_t>& h,
                          const std::vector<std::uint8_t>& fixed_plus,
                          double beta) {
  const std::size_t n = tree.size();
  if (n > kGibbsVertexLimit)
    throw std::length_error("brute-force enumeration limited to " +
                            std::to_string(kGibbsVertexLimit) + " vertices");
  std::vector<Vertex> free_vertices;
  for (Vertex v = 1; v < n; ++v)
    if (!fixed_plus[v]) free_vertices.push_back(v);
  const std::uint64_t configs = std::uint64_t{1} << free_vertices.size();

  LogSumExp log_z[2];
  std::vector<int> spin(n);
  for (int root = 0; root < 2; ++root) {
    if (fixed_plus[0] && root == 0) continue;
    for (std::uint64_t mask = 0; mask < configs; ++mask) {
      spin[0] = root ? 1 : -1;
      for (Vertex v = 1; v < n; ++v) spin[v] = 1;
      for (std::size_t i = 0; i < free_vertices.size(); ++i)
        spin[free_vertices[i]] = (mask >> i) & 1 ? 1 : -1;
      double energy = 0.0;
      for (Vertex v = 0; v < n; ++v) {
        if (v > 0) energy += spin[tree.parent(v)] * spin[v];
        if (h[v]) energy += spin[v];
      }
      log_z[root].add(beta * energy);
    }
  }
  double lp = log_z[1].value(), lm = log_z[0].value();
  double r = lp - lm;
  if (std::isinf(lm)) return {1.0, std::numeric_limits<double>::infinity()};
  return {std::tanh(0.5 * r), r};
}

}  // namespace

GibbsRoot gibbs_bruteforce(const Tree& tree, const FieldAssignment& field,
                           double beta) {
  if (field.size() != tree.size())
    throw std::invalid_argument("field size does not match tree");
  return enumerate_spins(tree, field.h,
                         std::vector<std::uint8_t>(tree.size(), 0), beta);
}

GibbsRoot gibbs_bruteforce_plus(const Tree& tree, double beta) {
  std::vector<std::uint8_t> fixed(tree.size(), 0);
  for (Vertex v : tree.boundary().vertices()) fixed[v] = 1;
  return enumerate_spins(tree, std::vector<std::uint8_t>(tree.size(), 0), fixed,
                         beta);
}

double critical_fixed_point(double beta, double nu, double p) {
  const double drift = 2.0 * beta * p;
  auto h = [&](double x) { return drift + nu * g_beta(beta, x) - x; };
  double lo = 0.0, hi = 1.0 + drift;
  while (h(hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    double mid = 0.5 * (lo + hi);
    if (h(mid) >= 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double upper_bound_mean_r(double beta, double nu, double p, int n) {
  if (p == 0.0) return 0.0;
  const double growth = nu * std::tanh(beta);
  if (std::abs(growth - 1.0) < 1e-12)
    return std::max(2.0 * beta * p, critical_fixed_point(beta, nu, p));
  double sum = 0.0, term = 1.0;
  for (int k = 0; k <= n; ++k) {
    sum += term;
    term *= growth;
  }
  return 2.0 * beta * p * sum;
}

}  // namespace gwising
