#include "gwising/tree.hpp"

#include <algorithm>
#include <sstream>

namespace gwising {

PopulationCapExceeded::PopulationCapExceeded(std::uint64_t cap,
                                             std::uint64_t reached,
                                             int generation)
    : std::runtime_error("population cap of " + std::to_string(cap) +
                         " vertices exceeded: reached " +
                         std::to_string(reached) + " vertices in generation " +
                         std::to_string(generation)),
      reached_(reached),
      generation_(generation) {}

Tree Tree::from_child_counts(std::span<const std::uint32_t> counts, int depth) {
  if (counts.empty()) throw std::invalid_argument("tree needs a root");
  if (depth < 0) throw std::invalid_argument("negative tree depth");
  if (counts.size() >= kNoParent)
    throw std::length_error("tree too large for 32-bit vertex ids");
  Tree t;
  t.depth_ = depth;
  t.offsets_.resize(counts.size() + 1);
  std::uint64_t next = 1;
  for (std::size_t v = 0; v < counts.size(); ++v) {
    t.offsets_[v] = static_cast<Vertex>(next);
    next += counts[v];
    if (next > counts.size())
      throw std::invalid_argument("child counts describe more vertices than given");
  }
  if (next != counts.size())
    throw std::invalid_argument("child counts describe fewer vertices than given");
  t.offsets_[counts.size()] = static_cast<Vertex>(next);
  t.parent_.assign(counts.size(), kNoParent);
  for (Vertex v = 0; v < counts.size(); ++v)
    for (Vertex c : t.children(v).vertices()) t.parent_[c] = v;
  t.index_generations();
  return t;
}

Tree Tree::from_parents(std::span<const std::int64_t> parents, int depth) {
  if (parents.empty() || parents[0] != -1)
    throw std::invalid_argument("parent array must start with -1 for the root");
  std::vector<std::uint32_t> counts(parents.size(), 0);
  for (std::size_t i = 1; i < parents.size(); ++i) {
    auto p = parents[i];
    if (p < 0 || static_cast<std::size_t>(p) >= i)
      throw std::invalid_argument("parent index must precede its child");
    if (p < parents[i - 1])
      throw std::invalid_argument("parent array is not in breadth-first order");
    ++counts[static_cast<std::size_t>(p)];
  }
  return from_child_counts(counts, depth);
}

Tree Tree::single_vertex(int depth) {
  std::uint32_t zero = 0;
  return from_child_counts(std::span(&zero, 1), depth);
}

Tree Tree::path(int length) {
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(length) + 1, 1);
  counts.back() = 0;
  return from_child_counts(counts, length);
}

Tree Tree::complete(int arity, int depth) {
  std::vector<std::uint32_t> counts;
  std::uint64_t width = 1;
  for (int k = 0; k <= depth; ++k) {
    counts.insert(counts.end(), width, k < depth ? arity : 0);
    width *= static_cast<std::uint64_t>(arity);
  }
  return from_child_counts(counts, depth);
}

void Tree::index_generations() {
  // children of generation k start right after it, so generation k + 1 ends
  // where the children of its own first vertex begin
  generations_.assign(static_cast<std::size_t>(depth_) + 2, 0);
  generations_[1] = 1;
  for (int k = 1; k <= depth_; ++k) generations_[k + 1] = offsets_[generations_[k]];
  if (generations_.back() != size())
    throw std::invalid_argument("tree has vertices deeper than its depth");
}

VertexRange Tree::generation(int k) const {
  if (k < 0 || k > depth_) return {0, 0};
  return {generations_[k], generations_[k + 1]};
}

int Tree::depth_of(Vertex v) const {
  auto it = std::upper_bound(generations_.begin(), generations_.end(), v);
  return static_cast<int>(it - generations_.begin()) - 1;
}

int Tree::height() const {
  int h = 0;
  for (int k = 0; k <= depth_; ++k)
    if (!generation(k).empty()) h = k;
  return h;
}

std::vector<std::uint32_t> Tree::child_counts() const {
  std::vector<std::uint32_t> counts(size());
  for (Vertex v = 0; v < size(); ++v) counts[v] = child_count(v);
  return counts;
}

Tree Tree::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("parent"))
    throw std::invalid_argument("tree JSON needs \"n\" and \"parent\"");
  for (const auto& [key, _] : j.items())
    if (key != "n" && key != "parent")
      throw std::invalid_argument("unknown key in tree JSON: " + key);
  auto parents = j["parent"].get<std::vector<std::int64_t>>();
  return from_parents(parents, j["n"].get<int>());
}

nlohmann::json Tree::to_json() const {
  std::vector<std::int64_t> parents(size());
  for (Vertex v = 0; v < size(); ++v)
    parents[v] = v == 0 ? -1 : static_cast<std::int64_t>(parent_[v]);
  return nlohmann::json{{"n", depth_}, {"parent", parents}};
}

namespace {

// Shared generation-by-generation sampler.
template <class LawAt>
Tree sample_by_generation(int depth, LawAt law_at, RandomStream& rng,
                          std::uint64_t cap) {
  if (depth < 0) throw std::invalid_argument("negative tree depth");
  std::vector<std::uint32_t> counts;
  counts.push_back(0);
  std::uint64_t lo = 0, hi = 1;
  for (int k = 0; k < depth && lo < hi; ++k) {
    const OffspringPmf& pmf = law_at(k);
    std::uint64_t total = counts.size();
    for (std::uint64_t v = lo; v < hi; ++v) {
      auto d = static_cast<std::uint32_t>(pmf.sample(rng));
      counts[v] = d;
      total += d;
      if (total > cap) throw PopulationCapExceeded(cap, total, k + 1);
    }
    lo = hi;
    hi = total;
    counts.resize(total, 0);
  }
  return Tree::from_child_counts(counts, depth);
}

}  // namespace

Tree sample_gw(const OffspringPmf& pmf, int depth, RandomStream& rng,
               std::uint64_t population_cap) {
  if (!pmf.satisfies_no_extinction())
    throw std::invalid_argument(
        "offspring law must have no mass at 0 and mass at 1 below 1");
  return sample_by_generation(
      depth, [&](int) -> const OffspringPmf& { return pmf; }, rng,
      population_cap);
}

Tree sample_inhomogeneous_bp(std::span<const OffspringPmf> pmfs,
                             RandomStream& rng, std::uint64_t population_cap) {
  return sample_by_generation(
      static_cast<int>(pmfs.size()),
      [&](int k) -> const OffspringPmf& { return pmfs[k]; }, rng,
      population_cap);
}

Tree random_small_tree(RandomStream& rng, int max_depth, int max_degree,
                       std::size_t max_vertices) {
  if (max_depth < 0 || max_degree < 1 || max_vertices < 1)
    throw std::invalid_argument("bad random tree bounds");
  while (true) {
    int depth = static_cast<int>(rng.next_u64() % (max_depth + 1));
    std::vector<std::uint32_t> counts{0};
    std::size_t lo = 0, hi = 1;
    bool fits = true;
    for (int k = 0; k < depth && fits; ++k) {
      for (std::size_t v = lo; v < hi; ++v) {
        counts[v] = 1 + static_cast<std::uint32_t>(rng.next_u64() % max_degree);
        counts.resize(counts.size() + counts[v], 0);
      }
      lo = hi;
      hi = counts.size();
      fits = counts.size() <= max_vertices;
    }
    if (fits) return Tree::from_child_counts(counts, depth);
  }
}

Tree subtree(const Tree& tree, Vertex v) {
  if (v >= tree.size()) throw std::out_of_range("vertex not in tree");
  int new_depth = tree.depth() - tree.depth_of(v);
  std::vector<std::uint32_t> counts;
  Vertex lo = v, hi = v + 1;
  while (lo < hi) {
    for (Vertex u = lo; u < hi; ++u) counts.push_back(tree.child_count(u));
    Vertex next_lo = tree.children(lo).begin;
    Vertex next_hi = tree.children(hi - 1).end;
    lo = next_lo;
    hi = next_hi;
  }
  return Tree::from_child_counts(counts, new_depth);
}

VertexRange boundary_descendants(const Tree& tree, Vertex v) {
  Vertex lo = v, hi = v + 1;
  for (int k = tree.depth_of(v); k < tree.depth() && lo < hi; ++k) {
    Vertex next_lo = tree.children(lo).begin;
    Vertex next_hi = tree.children(hi - 1).end;
    lo = next_lo;
    hi = next_hi;
  }
  if (lo >= hi) return {0, 0};
  return {lo, hi};
}

std::uint64_t leaves_under(const Tree& tree, Vertex v) {
  return boundary_descendants(tree, v).size();
}

std::vector<std::uint64_t> leaves_under_all(const Tree& tree) {
  std::vector<std::uint64_t> count(tree.size(), 0);
  for (Vertex v : tree.boundary().vertices()) count[v] = 1;
  for (Vertex v = static_cast<Vertex>(tree.size()); v-- > 1;)
    count[tree.parent(v)] += count[v];
  return count;
}

namespace {

struct Enumerator {
  std::span<const OffspringPmf> pmfs;
  std::size_t limit;
  std::vector<WeightedTree> out;
  std::vector<std::uint32_t> counts;

  // Assign out-degrees to vertices [pos, end) of generation k, then recurse.
  void fill(int k, std::size_t pos, std::size_t end, double prob) {
    int depth = static_cast<int>(pmfs.size());
    if (pos == end) {
      std::size_t next_size = counts.size() - end;
      if (k + 1 == depth) {
        // the last generation's placeholders are already zero
        if (out.size() >= limit)
          throw std::length_error("tree enumeration exceeds " +
                                  std::to_string(limit) + " trees");
        out.push_back({Tree::from_child_counts(counts, depth), prob});
        return;
      }
      fill(k + 1, end, end + next_size, prob);
      return;
    }
    for (const auto& e : pmfs[k].entries()) {
      counts[pos] = static_cast<std::uint32_t>(e.degree);
      counts.insert(counts.end(), e.degree, 0);
      fill(k, pos + 1, end, prob * e.prob);
      counts.resize(counts.size() - e.degree);
    }
  }
};

}  // namespace

std::vector<WeightedTree> enumerate_trees(std::span<const OffspringPmf> pmfs,
                                          std::size_t limit) {
  Enumerator e{pmfs, limit, {}, {0}};
  if (pmfs.empty()) {
    e.out.push_back({Tree::single_vertex(0), 1.0});
    return std::move(e.out);
  }
  e.fill(0, 0, 1, 1.0);
  return std::move(e.out);
}

std::vector<WeightedTree> enumerate_trees(const OffspringPmf& pmf, int depth,
                                          std::size_t limit) {
  std::vector<OffspringPmf> pmfs(static_cast<std::size_t>(depth), pmf);
  return enumerate_trees(std::span<const OffspringPmf>(pmfs), limit);
}

std::string to_dot(const Tree& tree,
                   const std::function<std::string(Vertex)>& vertex_attrs,
                   const std::function<std::string(Vertex)>& edge_attrs) {
  std::ostringstream os;
  os << "digraph tree {\n  node [shape=point, width=0.12];\n";
  for (Vertex v = 0; v < tree.size(); ++v) {
    os << "  " << v;
    if (vertex_attrs) {
      auto a = vertex_attrs(v);
      if (!a.empty()) os << " [" << a << "]";
    }
    os << ";\n";
  }
  for (Vertex v = 1; v < tree.size(); ++v) {
    os << "  " << tree.parent(v) << " -> " << v;
    if (edge_attrs) {
      auto a = edge_attrs(v);
      if (!a.empty()) os << " [" << a << "]";
    }
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace gwising
