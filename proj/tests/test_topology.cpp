#include <doctest.h>

#include "netflow/fixtures.hpp"
#include "netflow/topology.hpp"

#include <functional>
#include <set>

using namespace netflow;

namespace {

// Brute force: subsets of b-3 pairwise non-crossing diagonals of a b-gon.
long brute_trees(int b) {
  if (b == 2) return 1;
  std::vector<std::pair<int, int>> diags;
  for (int p = 0; p < b; ++p)
    for (int q = p + 2; q < b; ++q)
      if (!(p == 0 && q == b - 1)) diags.emplace_back(p, q);
  long count = 0;
  const int n = static_cast<int>(diags.size());
  for (long mask = 0; mask < (1L << n); ++mask) {
    if (__builtin_popcountl(static_cast<unsigned long>(mask)) != b - 3) continue;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i)
      for (int j = i + 1; j < n && ok; ++j)
        if ((mask >> i & 1) && (mask >> j & 1)) {
          const auto [a, c] = diags[static_cast<std::size_t>(i)];
          const auto [x, y] = diags[static_cast<std::size_t>(j)];
          if ((a < x && x < c && c < y) || (x < a && a < y && y < c)) ok = false;
        }
    count += ok;
  }
  return count;
}

bool cyclic_interval(const std::vector<int>& block, int k) {
  std::set<int> s(block.begin(), block.end());
  int starts = 0;
  for (int x : block)
    if (!s.count((x + k - 1) % k)) ++starts;
  return starts == 1 || static_cast<int>(block.size()) == k;
}

// Brute force over all set partitions (restricted growth strings).
long brute_resolutions(int k, bool disconnected) {
  long total = 0;
  std::vector<int> rgs(static_cast<std::size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int i, int maxb) {
    if (i == k) {
      std::vector<std::vector<int>> blocks(static_cast<std::size_t>(maxb + 1));
      for (int j = 0; j < k; ++j) blocks[static_cast<std::size_t>(rgs[static_cast<std::size_t>(j)])].push_back(j);
      if (!disconnected && blocks.size() > 1) return;
      long prod = 1;
      for (const auto& b : blocks) {
        if (b.size() < 2 || !cyclic_interval(b, k)) return;
        prod *= brute_trees(static_cast<int>(b.size()));
      }
      total += prod;
      return;
    }
    for (int b = 0; b <= maxb + 1; ++b) {
      rgs[static_cast<std::size_t>(i)] = b;
      rec(i + 1, std::max(maxb, b));
    }
  };
  rgs[0] = 0;
  rec(1, 0);
  return total;
}

}  // namespace

TEST_CASE("resolution counts match brute force") {
  for (int k = 3; k <= 6; ++k) {
    CHECK(static_cast<long>(enumerate_resolutions(k, false).size()) == brute_resolutions(k, false));
    CHECK(static_cast<long>(enumerate_resolutions(k, true).size()) == brute_resolutions(k, true));
  }
  CHECK(enumerate_resolutions(3, false).size() == 1);
  CHECK(enumerate_resolutions(4, false).size() == 2);
  CHECK(enumerate_resolutions(6, false).size() == 14);
}

TEST_CASE("cross descriptors") {
  const auto conn = enumerate_resolutions(4, false);
  std::set<std::string> names;
  for (const auto& t : conn) names.insert(t.to_string());
  CHECK(names == std::set<std::string>{"12|34", "23|41"});
  const auto all = enumerate_resolutions(4, true);
  std::set<std::string> extra;
  for (const auto& t : all)
    if (!t.connected()) extra.insert(t.to_string());
  CHECK(extra == std::set<std::string>{"{12}{34}", "{23}{41}"});
  CHECK(enumerate_resolutions(3, false)[0].to_string() == "123");
}

TEST_CASE("descriptor text round trips") {
  for (int k = 3; k <= 7; ++k)
    for (const auto& t : enumerate_resolutions(k, true)) {
      const auto back = TopologyDescriptor::parse(t.to_string(), k);
      CHECK(back.to_string() == t.to_string());
      CHECK(back == t);
    }
  CHECK(TopologyDescriptor::parse("34|12", 4).to_string() == "12|34");
  CHECK(TopologyDescriptor::parse("41|23", 4).to_string() == "23|41");
  CHECK(TopologyDescriptor::parse("{34}{12}", 4).to_string() == "{12}{34}");
  CHECK(TopologyDescriptor::parse("{1234:12|34}{56}", 6).to_string() == "{1234:12|34}{56}");
  CHECK_THROWS_AS(TopologyDescriptor::parse("13|24", 4), ParseError);
  CHECK_THROWS_AS(TopologyDescriptor::parse("12|345", 5), ParseError);
  CHECK_THROWS_AS(TopologyDescriptor::parse("12|345;23|451", 5), ParseError);
  CHECK_THROWS_AS(TopologyDescriptor::parse("{13}{24}", 4), ParseError);
  CHECK_THROWS_AS(enumerate_resolutions(2, false), UnsupportedValence);
}

TEST_CASE("skeleton shape") {
  for (int k = 3; k <= 6; ++k)
    for (const auto& t : enumerate_resolutions(k, true)) {
      const auto sk = skeleton(t);
      int junctions = 0, edges = 0;
      for (const auto& b : t.blocks) {
        junctions += b.interior_vertices();
        edges += b.edges();
      }
      CHECK(sk.junctions == junctions);
      CHECK(static_cast<int>(sk.arcs.size()) == edges);
      // Every junction has degree three.
      std::vector<int> deg(static_cast<std::size_t>(sk.junctions), 0);
      for (const auto& a : sk.arcs) {
        if (a.kind == SkeletonArc::Kind::External) ++deg[static_cast<std::size_t>(a.a)];
        if (a.kind == SkeletonArc::Kind::Internal) {
          ++deg[static_cast<std::size_t>(a.a)];
          ++deg[static_cast<std::size_t>(a.b)];
        }
      }
      for (int d : deg) CHECK(d == 3);
      for (int l : sk.leaf_arc) CHECK(l >= 0);
    }
}

TEST_CASE("predicted counts") {
  const auto cross = cross_network(5);
  const auto topo = TopologyDescriptor::parse("12|34", 4);
  const auto pc = predicted_counts(cross, {{0, topo}});
  CHECK(pc.curves == 5);
  CHECK(pc.per_vertex[0].interior_vertices == 2);
  CHECK(pc.per_vertex[0].edges == 5);

  std::vector<RayArm> arms;
  for (int i = 0; i < 5; ++i) arms.push_back({2 * kPi * i / 5, 1.0, 0.0});
  const auto star5 = star_network(Vec2::Zero(), arms, 5);
  const auto pc5 = predicted_counts(star5, {{0, enumerate_resolutions(5, false)[0]}});
  CHECK(pc5.per_vertex[0].interior_vertices == 3);
  CHECK(pc5.per_vertex[0].edges == 7);
  CHECK(pc5.per_vertex[0].interior_edges == 2);

  const auto triod = triod_network(0.0, 2.0, 4.0, 5);
  const auto pc3 = predicted_counts(triod, {{0, enumerate_resolutions(3, false)[0]}});
  CHECK(pc3.per_vertex[0].interior_vertices == 1);
  CHECK(pc3.per_vertex[0].edges == 3);
  CHECK(pc3.per_vertex[0].interior_edges == 0);
  CHECK(pc3.curves == 3);
}

TEST_CASE("predicted counts agree with assembled resolution graphs") {
  for (int k = 3; k <= 6; ++k) {
    std::vector<RayArm> arms;
    for (int i = 0; i < k; ++i) arms.push_back({2 * kPi * i / k + 0.1, 1.0, 0.0});
    const auto net = star_network(Vec2::Zero(), arms, 5);
    for (const auto& t : enumerate_resolutions(k, true)) {
      const auto g = assemble_resolution_graph(net, {{0, t}});
      const auto pc = predicted_counts(net, {{0, t}});
      CHECK(static_cast<int>(g.chains.size()) == pc.curves);
      int junctions = 0;
      for (const auto& n : g.nodes) junctions += n.kind == ResolutionNode::Kind::Junction;
      CHECK(junctions == pc.per_vertex[0].interior_vertices);
      if (t.connected()) CHECK(pc.curves == static_cast<int>(net.curves.size()) + k - 3);
      // Every node keeps its degree: exterior 1, junction 3.
      std::vector<int> deg(g.nodes.size(), 0);
      for (const auto& ch : g.chains) {
        CHECK_FALSE(ch.closed);
        ++deg[static_cast<std::size_t>(ch.start_node)];
        ++deg[static_cast<std::size_t>(ch.end_node)];
      }
      for (std::size_t n = 0; n < g.nodes.size(); ++n)
        CHECK(deg[n] == (g.nodes[n].kind == ResolutionNode::Kind::Junction ? 3 : 1));
    }
  }
}
