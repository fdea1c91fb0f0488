#pragma once

// Bernoulli external fields and the pruning map they induce.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gwising/random.hpp"
#include "gwising/tree.hpp"

namespace gwising {

enum class FieldMode {
  WholeTree,     // i.i.d. bits on every vertex
  LeavesOnly,    // i.i.d. bits on depth-n vertices, zero elsewhere
  PlusBoundary,  // ones exactly on depth-n vertices
};

FieldMode parse_field_mode(std::string_view name);
std::string_view field_mode_name(FieldMode mode);

struct FieldAssignment {
  FieldMode mode = FieldMode::LeavesOnly;
  std::vector<std::uint8_t> h;  // one bit per vertex

  bool operator[](Vertex v) const { return h[v] != 0; }
  std::size_t size() const { return h.size(); }
};

FieldAssignment zero_field(const Tree& tree, FieldMode mode);
FieldAssignment plus_boundary_field(const Tree& tree);
// Bits are placed by geometric gaps, so the cost is proportional to the
// number of ones rather than the number of vertices.
FieldAssignment sample_field(const Tree& tree, FieldMode mode, double p,
                             RandomStream& rng);

// Y(u) = 1 iff some depth-n descendant of u carries a one. Bits on vertices
// above depth n are ignored.
std::vector<std::uint8_t> survival(const Tree& tree, const FieldAssignment& field);

struct PrunedTree {
  Tree tree;
  std::vector<Vertex> old_to_new;  // kNoParent for pruned-away vertices
  std::vector<Vertex> new_to_old;
};

// The subtree spanned by surviving vertices, or nothing when the root dies.
// The field must be LeavesOnly or PlusBoundary.
std::optional<PrunedTree> prune(const Tree& tree, const FieldAssignment& field);

// DOT rendering: leaves with a one are circled, surviving edges are solid
// and pruned branches dashed grey.
std::string overlay_dot(const Tree& tree, const FieldAssignment& field);

}  // namespace gwising
