#include "gwising/field_pruning.hpp"

#include <stdexcept>

namespace gwising {

FieldMode parse_field_mode(std::string_view name) {
  if (name == "whole_tree" || name == "WholeTree") return FieldMode::WholeTree;
  if (name == "leaves_only" || name == "LeavesOnly") return FieldMode::LeavesOnly;
  if (name == "plus_boundary" || name == "PlusBoundary")
    return FieldMode::PlusBoundary;
  throw std::invalid_argument("unknown field mode: " + std::string(name));
}

std::string_view field_mode_name(FieldMode mode) {
  switch (mode) {
    case FieldMode::WholeTree: return "whole_tree";
    case FieldMode::LeavesOnly: return "leaves_only";
    case FieldMode::PlusBoundary: return "plus_boundary";
  }
  return "?";
}

FieldAssignment zero_field(const Tree& tree, FieldMode mode) {
  return {mode, std::vector<std::uint8_t>(tree.size(), 0)};
}

FieldAssignment plus_boundary_field(const Tree& tree) {
  auto f = zero_field(tree, FieldMode::PlusBoundary);
  for (Vertex v : tree.boundary().vertices()) f.h[v] = 1;
  return f;
}

FieldAssignment sample_field(const Tree& tree, FieldMode mode, double p,
                             RandomStream& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("field probability outside [0, 1]");
  if (mode == FieldMode::PlusBoundary) return plus_boundary_field(tree);
  auto f = zero_field(tree, mode);
  VertexRange range = mode == FieldMode::WholeTree
                          ? VertexRange{0, static_cast<Vertex>(tree.size())}
                          : tree.boundary();
  if (p == 0.0 || range.empty()) return f;
  std::uint64_t v = range.begin;
  while (true) {
    v += rng.geometric_gap(p);
    if (v >= range.end) break;
    f.h[v] = 1;
    ++v;
  }
  return f;
}

std::vector<std::uint8_t> survival(const Tree& tree, const FieldAssignment& field) {
  if (field.size() != tree.size())
    throw std::invalid_argument("field size does not match tree");
  std::vector<std::uint8_t> y(tree.size(), 0);
  for (Vertex v : tree.boundary().vertices()) y[v] = field.h[v];
  for (Vertex v = static_cast<Vertex>(tree.size()); v-- > 1;)
    if (y[v]) y[tree.parent(v)] = 1;
  return y;
}

std::optional<PrunedTree> prune(const Tree& tree, const FieldAssignment& field) {
  if (field.mode == FieldMode::WholeTree)
    throw std::invalid_argument("pruning needs a boundary-only field");
  auto y = survival(tree, field);
  if (!y[0]) return std::nullopt;
  PrunedTree out{Tree::single_vertex(), {}, {}};
  out.old_to_new.assign(tree.size(), kNoParent);
  std::vector<std::uint32_t> counts;
  // filtering a breadth-first order keeps it breadth-first
  for (Vertex v = 0; v < tree.size(); ++v) {
    if (!y[v]) continue;
    out.old_to_new[v] = static_cast<Vertex>(out.new_to_old.size());
    out.new_to_old.push_back(v);
    std::uint32_t kept = 0;
    for (Vertex c : tree.children(v).vertices()) kept += y[c];
    counts.push_back(kept);
  }
  out.tree = Tree::from_child_counts(counts, tree.depth());
  return out;
}

std::string overlay_dot(const Tree& tree, const FieldAssignment& field) {
  auto y = survival(tree, field);
  return to_dot(
      tree,
      [&](Vertex v) -> std::string {
        std::string a = y[v] ? "color=black" : "color=grey70";
        if (field[v]) a += ", shape=circle, width=0.25";
        return a;
      },
      [&](Vertex v) -> std::string {
        return y[v] ? "color=black, penwidth=2" : "color=grey70, style=dashed";
      });
}

}  // namespace gwising
