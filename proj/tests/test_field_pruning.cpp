#include <doctest.h>

#include <cmath>

#include "gwising/field_pruning.hpp"

using namespace gwising;

namespace {

// Y(u) by scanning the boundary descendants directly.
std::vector<std::uint8_t> survival_by_scan(const Tree& t, const FieldAssignment& f) {
  std::vector<std::uint8_t> y(t.size(), 0);
  for (Vertex u = 0; u < t.size(); ++u)
    for (Vertex v : boundary_descendants(t, u).vertices())
      if (f[v]) y[u] = 1;
  return y;
}

}  // namespace

TEST_CASE("field sampling") {
  RandomStream rng(1);
  auto t = Tree::complete(2, 4);
  auto zero = sample_field(t, FieldMode::WholeTree, 0.0, rng);
  for (auto b : zero.h) CHECK(b == 0);
  auto ones = sample_field(t, FieldMode::LeavesOnly, 1.0, rng);
  for (Vertex v = 0; v < t.size(); ++v) CHECK(ones[v] == (t.depth_of(v) == 4));
  auto all = sample_field(t, FieldMode::WholeTree, 1.0, rng);
  for (auto b : all.h) CHECK(b == 1);
  auto plus = sample_field(t, FieldMode::PlusBoundary, 0.1, rng);
  CHECK(plus.h == ones.h);

  // per-leaf rate on a 128-leaf tree
  auto big = Tree::complete(2, 7);
  std::vector<int> hits(big.size(), 0);
  const int reps = 100'000;
  for (int r = 0; r < reps; ++r) {
    auto f = sample_field(big, FieldMode::LeavesOnly, 0.3, rng);
    for (Vertex v = 0; v < big.size(); ++v) hits[v] += f[v];
  }
  double se = std::sqrt(0.3 * 0.7 / reps);
  int outside = 0;
  for (Vertex v = 0; v < big.size(); ++v) {
    if (big.depth_of(v) < 7) {
      CHECK(hits[v] == 0);
    } else if (std::abs(hits[v] / double(reps) - 0.3) > 3 * se) {
      ++outside;
    }
  }
  // about 0.3% of 128 leaves may fall outside by chance
  CHECK(outside <= 3);
}

TEST_CASE("survival and pruning on small examples") {
  auto t = Tree::complete(2, 2);
  auto f = zero_field(t, FieldMode::LeavesOnly);
  for (auto y : survival(t, f)) CHECK(y == 0);
  CHECK_FALSE(prune(t, f).has_value());

  f.h[3] = 1;  // first leaf of the left subtree
  auto y = survival(t, f);
  CHECK(y == std::vector<std::uint8_t>{1, 1, 0, 1, 0, 0, 0});
  auto pruned = prune(t, f);
  REQUIRE(pruned.has_value());
  CHECK(pruned->tree == Tree::path(2));
  CHECK(pruned->new_to_old == std::vector<Vertex>{0, 1, 3});
  CHECK(pruned->old_to_new[2] == kNoParent);

  auto plus = prune(t, plus_boundary_field(t));
  REQUIRE(plus.has_value());
  CHECK(plus->tree == t);
  for (Vertex v = 0; v < t.size(); ++v) CHECK(plus->old_to_new[v] == v);

  CHECK_THROWS_AS(prune(t, zero_field(t, FieldMode::WholeTree)), std::invalid_argument);
}

TEST_CASE("pruning properties on random instances") {
  RandomStream rng(21);
  OffspringPmf law({{1, 0.3}, {2, 0.5}, {3, 0.2}});
  for (int rep = 0; rep < 200; ++rep) {
    auto t = sample_gw(law, 1 + rep % 6, rng);
    auto f = sample_field(t, FieldMode::LeavesOnly, 0.2, rng);
    auto y = survival(t, f);
    CHECK(y == survival_by_scan(t, f));
    for (Vertex v = 1; v < t.size(); ++v)
      if (y[v]) CHECK(y[t.parent(v)]);

    auto pruned = prune(t, f);
    CHECK(pruned.has_value() == (y[0] != 0));
    if (!pruned) continue;
    const Tree& s = pruned->tree;
    for (Vertex v = 0; v < s.size(); ++v) {
      if (s.depth_of(v) < s.depth()) CHECK(s.child_count(v) >= 1);
      else CHECK(s.is_leaf(v));
    }
    // idempotent
    auto again = prune(s, plus_boundary_field(s));
    REQUIRE(again.has_value());
    CHECK(again->tree == s);
    // monotone in the field
    auto more = f;
    more.h[t.boundary().begin + rep % t.boundary().size()] = 1;
    auto bigger = prune(t, more);
    REQUIRE(bigger.has_value());
    for (Vertex v = 0; v < t.size(); ++v)
      if (pruned->old_to_new[v] != kNoParent) CHECK(bigger->old_to_new[v] != kNoParent);
  }
}

TEST_CASE("overlay DOT marks field bits and dead branches") {
  auto t = Tree::complete(2, 1);
  auto f = zero_field(t, FieldMode::LeavesOnly);
  f.h[1] = 1;
  auto dot = overlay_dot(t, f);
  CHECK(dot.find("1 [color=black, shape=circle") != std::string::npos);
  CHECK(dot.find("0 -> 2 [color=grey70, style=dashed]") != std::string::npos);
}
