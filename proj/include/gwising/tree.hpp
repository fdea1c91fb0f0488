#pragma once

// Rooted trees stored as breadth-first arenas.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ranges>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gwising/distributions.hpp"
#include "gwising/random.hpp"

namespace gwising {

using Vertex = std::uint32_t;
inline constexpr Vertex kNoParent = std::numeric_limits<Vertex>::max();
inline constexpr std::uint64_t kDefaultPopulationCap = 100'000'000;

// Thrown when a sampler would exceed its vertex budget.
class PopulationCapExceeded : public std::runtime_error {
 public:
  PopulationCapExceeded(std::uint64_t cap, std::uint64_t reached, int generation);
  std::uint64_t reached() const { return reached_; }
  int generation() const { return generation_; }

 private:
  std::uint64_t reached_;
  int generation_;
};

struct VertexRange {
  Vertex begin;
  Vertex end;
  Vertex size() const { return end - begin; }
  bool empty() const { return begin == end; }
  auto vertices() const { return std::views::iota(begin, end); }
};

/// Rooted ordered tree in breadth-first order.
///
/// Vertex 0 is the root. Children of v occupy the contiguous index range
/// [child_offset(v), child_offset(v+1)), and every generation is a contiguous
/// slice. depth() is the nominal depth n; leaves of a Galton-Watson tree all
/// sit at depth n, but lines may end early in inhomogeneous processes.
class Tree {
 public:
  // Builds from out-degrees listed in breadth-first order.
  static Tree from_child_counts(std::span<const std::uint32_t> counts, int depth);
  // parents[0] must be -1; parents must be nondecreasing with parents[i] < i.
  static Tree from_parents(std::span<const std::int64_t> parents, int depth);
  static Tree single_vertex(int depth = 0);
  static Tree path(int length);
  static Tree complete(int arity, int depth);

  static Tree from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::size_t size() const { return parent_.size(); }
  int depth() const { return depth_; }

  Vertex parent(Vertex v) const { return parent_[v]; }
  VertexRange children(Vertex v) const { return {offsets_[v], offsets_[v + 1]}; }
  std::uint32_t child_count(Vertex v) const { return offsets_[v + 1] - offsets_[v]; }
  bool is_leaf(Vertex v) const { return child_count(v) == 0; }

  // Vertices at depth k; empty for k outside [0, depth()].
  VertexRange generation(int k) const;
  int depth_of(Vertex v) const;
  // Vertices at depth depth().
  VertexRange boundary() const { return generation(depth_); }
  // The highest generation that is nonempty.
  int height() const;

  // Out-degrees in breadth-first order; this sequence identifies the tree.
  std::vector<std::uint32_t> child_counts() const;

  friend bool operator==(const Tree& a, const Tree& b) {
    return a.depth_ == b.depth_ && a.offsets_ == b.offsets_;
  }

 private:
  Tree() = default;
  void index_generations();

  int depth_ = 0;
  std::vector<Vertex> parent_;
  std::vector<Vertex> offsets_;      // size() + 1 entries
  std::vector<Vertex> generations_;  // depth_ + 2 entries
};

// Homogeneous Galton-Watson tree of depth n. The law must have no mass at 0.
Tree sample_gw(const OffspringPmf& pmf, int depth, RandomStream& rng,
               std::uint64_t population_cap = kDefaultPopulationCap);

// Branching process where pmfs[k] governs vertices at depth k. Depth is
// pmfs.size().
Tree sample_inhomogeneous_bp(std::span<const OffspringPmf> pmfs,
                             RandomStream& rng,
                             std::uint64_t population_cap = kDefaultPopulationCap);

// Random tree for oracle checks: depth uniform in [0, max_depth], degrees
// uniform in [1, max_degree], redrawn until it has at most max_vertices.
Tree random_small_tree(RandomStream& rng, int max_depth, int max_degree,
                       std::size_t max_vertices);

// Descendants of v, re-rooted at v, with depth() - depth_of(v) as depth.
Tree subtree(const Tree& tree, Vertex v);

// Descendants of v in generation tree.depth(), as an index range.
VertexRange boundary_descendants(const Tree& tree, Vertex v);
std::uint64_t leaves_under(const Tree& tree, Vertex v);
// leaves_under for every vertex in one bottom-up sweep.
std::vector<std::uint64_t> leaves_under_all(const Tree& tree);

struct WeightedTree {
  Tree tree;
  double probability;
};

inline constexpr std::size_t kEnumerationLimit = 1'000'000;

// Every depth-n tree whose out-degrees lie in the support of pmf, with its
// Galton-Watson probability. Throws std::length_error past `limit` trees.
std::vector<WeightedTree> enumerate_trees(const OffspringPmf& pmf, int depth,
                                          std::size_t limit = kEnumerationLimit);
// Same with a law per generation; depth is pmfs.size().
std::vector<WeightedTree> enumerate_trees(std::span<const OffspringPmf> pmfs,
                                          std::size_t limit = kEnumerationLimit);

// Graphviz text; `vertex_attrs` may add attributes like "color=red".
std::string to_dot(const Tree& tree,
                   const std::function<std::string(Vertex)>& vertex_attrs = {},
                   const std::function<std::string(Vertex)>& edge_attrs = {});

}  // namespace gwising
