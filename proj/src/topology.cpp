#include "netflow/topology.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace netflow {

namespace {

using Diagonals = std::vector<std::pair<int, int>>;

// All triangulations of the corner range [i, j] with base side (i, j).
std::vector<Diagonals> triangulations(int i, int j) {
  if (j - i < 2) return {Diagonals{}};
  std::vector<Diagonals> out;
  for (int m = i + 1; m < j; ++m) {
    const auto left = triangulations(i, m);
    const auto right = triangulations(m, j);
    for (const auto& l : left)
      for (const auto& r : right) {
        Diagonals d = l;
        d.insert(d.end(), r.begin(), r.end());
        if (m - i >= 2) d.emplace_back(i, m);
        if (j - m >= 2) d.emplace_back(m, j);
        std::sort(d.begin(), d.end());
        out.push_back(std::move(d));
      }
  }
  return out;
}

bool crossing(const std::pair<int, int>& a, const std::pair<int, int>& b) {
  return (a.first < b.first && b.first < a.second && a.second < b.second) ||
         (b.first < a.first && a.first < b.second && b.second < a.second);
}

char leaf_char(int leaf) {
  if (leaf < 0 || leaf > 8) throw RangeError("descriptor text supports at most 9 leaves");
  return static_cast<char>('1' + leaf);
}

std::vector<int> parse_leaves(const std::string& s, int k) {
  std::vector<int> out;
  for (char ch : s) {
    if (ch < '1' || ch > '9') throw ParseError("bad leaf character '" + std::string(1, ch) + "'");
    const int leaf = ch - '1';
    if (leaf >= k) throw ParseError("leaf " + std::string(1, ch) + " exceeds valence");
    out.push_back(leaf);
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur += ch;
    }
  }
  parts.push_back(cur);
  return parts;
}

// Block leaves must be a run of consecutive fan indices mod k.
void check_run(const std::vector<int>& leaves, int k) {
  for (std::size_t i = 1; i < leaves.size(); ++i)
    if (leaves[i] != (leaves[i - 1] + 1) % k) throw ParseError("block leaves are not cyclically contiguous");
}

std::pair<int, int> parse_split(const std::string& text, const BlockTree& block, int k) {
  const auto sides = split(text, '|');
  if (sides.size() != 2) throw ParseError("split '" + text + "' needs exactly one '|'");
  const auto a = parse_leaves(sides[0], k);
  const auto b = parse_leaves(sides[1], k);
  const int n = block.size();
  if (static_cast<int>(a.size() + b.size()) != n) throw ParseError("split '" + text + "' does not cover its block");
  std::vector<int> local;
  for (int leaf : a) {
    auto it = std::find(block.leaves.begin(), block.leaves.end(), leaf);
    if (it == block.leaves.end()) throw ParseError("split '" + text + "' names a leaf outside its block");
    local.push_back(static_cast<int>(it - block.leaves.begin()));
  }
  for (int leaf : b)
    if (std::find(block.leaves.begin(), block.leaves.end(), leaf) == block.leaves.end() ||
        std::find(a.begin(), a.end(), leaf) != a.end())
      throw ParseError("split '" + text + "' is not a partition of its block");
  if (local.size() < 2 || static_cast<int>(local.size()) > n - 2)
    throw ParseError("split '" + text + "' leaves a side with fewer than two leaves");
  for (std::size_t i = 1; i < local.size(); ++i)
    if (local[i] != (local[i - 1] + 1) % n) throw ParseError("split side '" + sides[0] + "' is not contiguous");
  const int p = local.front();
  const int q = (p + static_cast<int>(local.size())) % n;
  return {std::min(p, q), std::max(p, q)};
}

std::string leaves_text(const std::vector<int>& leaves) {
  std::string s;
  for (int l : leaves) s += leaf_char(l);
  return s;
}

std::string block_splits_text(const BlockTree& block) {
  std::string s;
  for (std::size_t i = 0; i < block.diagonals.size(); ++i) {
    const auto side = block.diagonal_side(block.diagonals[i]);
    std::vector<int> a, b;
    for (int j = 0; j < block.size(); ++j) {
      const bool in_a = std::find(side.begin(), side.end(), j) != side.end();
      (in_a ? a : b).push_back(j);
    }
    // b in cyclic order starting right after a.
    std::rotate(b.begin(), std::find_if(b.begin(), b.end(), [&](int j) { return j > side.back(); }), b.end());
    if (i) s += ';';
    for (int j : a) s += leaf_char(block.leaves[static_cast<std::size_t>(j)]);
    s += '|';
    for (int j : b) s += leaf_char(block.leaves[static_cast<std::size_t>(j)]);
  }
  return s;
}

void validate_block(const BlockTree& block) {
  const int n = block.size();
  if (n < 2) throw ParseError("block needs at least two leaves");
  if (static_cast<int>(block.diagonals.size()) != std::max(0, n - 3))
    throw ParseError("block with " + std::to_string(n) + " leaves needs " + std::to_string(std::max(0, n - 3)) +
                     " splits");
  std::set<std::pair<int, int>> seen;
  for (const auto& d : block.diagonals) {
    if (d.second - d.first < 2 || (d.first == 0 && d.second == n - 1)) throw ParseError("split is a polygon side");
    if (!seen.insert(d).second) throw ParseError("repeated split");
  }
  for (std::size_t i = 0; i < block.diagonals.size(); ++i)
    for (std::size_t j = i + 1; j < block.diagonals.size(); ++j)
      if (crossing(block.diagonals[i], block.diagonals[j])) throw ParseError("splits are not compatible");
}

}  // namespace

std::vector<std::array<int, 3>> BlockTree::triangles() const {
  const int n = size();
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) edges.insert({std::min(i, (i + 1) % n), std::max(i, (i + 1) % n)});
  for (const auto& d : diagonals) edges.insert(d);
  std::vector<std::array<int, 3>> out;
  if (n < 3) return out;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c)
        if (edges.count({a, b}) && edges.count({b, c}) && edges.count({a, c})) out.push_back({a, b, c});
  return out;
}

std::vector<int> BlockTree::diagonal_side(const std::pair<int, int>& d) const {
  std::vector<int> side;
  for (int j = d.first; j < d.second; ++j) side.push_back(j);
  return side;
}

std::string TopologyDescriptor::to_string() const {
  if (blocks.size() == 1) {
    const auto& b = blocks.front();
    return b.diagonals.empty() ? leaves_text(b.leaves) : block_splits_text(b);
  }
  std::string s;
  for (const auto& b : blocks) {
    s += '{' + leaves_text(b.leaves);
    if (!b.diagonals.empty()) s += ':' + block_splits_text(b);
    s += '}';
  }
  return s;
}

TopologyDescriptor TopologyDescriptor::parse(const std::string& text, int k) {
  if (k < 3) throw UnsupportedValence("resolutions need valence at least 3");
  if (k > 9) throw RangeError("descriptor text supports at most 9 leaves");
  TopologyDescriptor topo;
  topo.k = k;
  std::string t;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;

  if (t.empty() || t.front() != '{') {
    BlockTree b;
    for (int i = 0; i < k; ++i) b.leaves.push_back(i);
    if (t.find('|') == std::string::npos) {
      if (!t.empty() && parse_leaves(t, k) != b.leaves) throw ParseError("connected descriptor must list all leaves");
    } else {
      for (const auto& part : split(t, ';')) b.diagonals.push_back(parse_split(part, b, k));
    }
    std::sort(b.diagonals.begin(), b.diagonals.end());
    validate_block(b);
    topo.blocks.push_back(std::move(b));
    return topo;
  }

  std::vector<int> covered(static_cast<std::size_t>(k), 0);
  std::size_t pos = 0;
  while (pos < t.size()) {
    if (t[pos] != '{') throw ParseError("expected '{' in descriptor");
    const auto close = t.find('}', pos);
    if (close == std::string::npos) throw ParseError("unterminated block");
    const std::string body = t.substr(pos + 1, close - pos - 1);
    pos = close + 1;
    BlockTree b;
    const auto colon = body.find(':');
    b.leaves = parse_leaves(body.substr(0, colon), k);
    check_run(b.leaves, k);
    for (int l : b.leaves)
      if (covered[static_cast<std::size_t>(l)]++) throw ParseError("leaf appears in two blocks");
    if (colon != std::string::npos)
      for (const auto& part : split(body.substr(colon + 1), ';')) b.diagonals.push_back(parse_split(part, b, k));
    std::sort(b.diagonals.begin(), b.diagonals.end());
    validate_block(b);
    topo.blocks.push_back(std::move(b));
  }
  if (std::count(covered.begin(), covered.end(), 0)) throw ParseError("blocks do not cover every leaf");
  std::sort(topo.blocks.begin(), topo.blocks.end(),
            [](const BlockTree& a, const BlockTree& b) { return a.leaves.front() < b.leaves.front(); });
  return topo;
}

std::vector<TopologyDescriptor> enumerate_resolutions(int k, bool allow_disconnected) {
  if (k < 3) throw UnsupportedValence("resolutions need valence at least 3, got " + std::to_string(k));
  std::vector<TopologyDescriptor> out;
  {
    BlockTree base;
    for (int i = 0; i < k; ++i) base.leaves.push_back(i);
    for (auto& d : triangulations(0, k - 1)) {
      TopologyDescriptor topo;
      topo.k = k;
      BlockTree b = base;
      b.diagonals = std::move(d);
      topo.blocks.push_back(std::move(b));
      out.push_back(std::move(topo));
    }
  }
  if (!allow_disconnected) return out;

  // Cut c separates leaf c-1 from leaf c; at least two cuts, gaps >= 2.
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    std::vector<int> cuts;
    for (int c = 0; c < k; ++c)
      if (mask & (1u << c)) cuts.push_back(c);
    if (cuts.size() < 2) continue;
    bool ok = true;
    std::vector<BlockTree> blocks;
    for (std::size_t i = 0; i < cuts.size() && ok; ++i) {
      const int from = cuts[i];
      const int to = i + 1 < cuts.size() ? cuts[i + 1] : cuts[0] + k;
      if (to - from < 2) ok = false;
      BlockTree b;
      for (int l = from; l < to; ++l) b.leaves.push_back(l % k);
      blocks.push_back(std::move(b));
    }
    if (!ok) continue;
    std::vector<std::vector<Diagonals>> choices;
    for (const auto& b : blocks) choices.push_back(b.size() >= 3 ? triangulations(0, b.size() - 1)
                                                                 : std::vector<Diagonals>{Diagonals{}});
    std::vector<std::size_t> idx(blocks.size(), 0);
    while (true) {
      TopologyDescriptor topo;
      topo.k = k;
      topo.blocks = blocks;
      for (std::size_t i = 0; i < blocks.size(); ++i) topo.blocks[i].diagonals = choices[i][idx[i]];
      out.push_back(std::move(topo));
      std::size_t i = 0;
      while (i < idx.size() && ++idx[i] == choices[i].size()) idx[i++] = 0;
      if (i == idx.size()) break;
    }
  }
  return out;
}

std::vector<TopologyDescriptor> enumerate_resolutions(const Fan& fan, bool allow_disconnected) {
  return enumerate_resolutions(fan.valence(), allow_disconnected);
}

Skeleton skeleton(const TopologyDescriptor& topo) {
  Skeleton sk;
  sk.k = topo.k;
  sk.leaf_arc.assign(static_cast<std::size_t>(topo.k), -1);
  for (std::size_t bi = 0; bi < topo.blocks.size(); ++bi) {
    const auto& block = topo.blocks[bi];
    const int blk = static_cast<int>(bi);
    if (block.size() == 2) {
      sk.leaf_arc[static_cast<std::size_t>(block.leaves[0])] = static_cast<int>(sk.arcs.size());
      sk.leaf_arc[static_cast<std::size_t>(block.leaves[1])] = static_cast<int>(sk.arcs.size());
      sk.arcs.push_back({SkeletonArc::Kind::Geodesic, block.leaves[0], block.leaves[1], blk});
      continue;
    }
    const auto tris = block.triangles();
    const int base = sk.junctions;
    const int n = block.size();
    auto has_edge = [](const std::array<int, 3>& t, int a, int b) {
      auto in = [&](int x) { return t[0] == x || t[1] == x || t[2] == x; };
      return in(a) && in(b);
    };
    for (int leaf = 0; leaf < n; ++leaf) {
      const int a = leaf, b = (leaf + 1) % n;
      for (std::size_t ti = 0; ti < tris.size(); ++ti)
        if (has_edge(tris[ti], a, b)) {
          sk.leaf_arc[static_cast<std::size_t>(block.leaves[static_cast<std::size_t>(leaf)])] =
              static_cast<int>(sk.arcs.size());
          sk.arcs.push_back({SkeletonArc::Kind::External, base + static_cast<int>(ti),
                             block.leaves[static_cast<std::size_t>(leaf)], blk});
          break;
        }
    }
    for (const auto& d : block.diagonals) {
      std::vector<int> sides;
      for (std::size_t ti = 0; ti < tris.size(); ++ti)
        if (has_edge(tris[ti], d.first, d.second)) sides.push_back(base + static_cast<int>(ti));
      sk.arcs.push_back({SkeletonArc::Kind::Internal, sides.at(0), sides.at(1), blk});
    }
    for (std::size_t ti = 0; ti < tris.size(); ++ti) sk.junction_block.push_back(blk);
    sk.junctions += static_cast<int>(tris.size());
  }
  return sk;
}

PredictedCounts predicted_counts(const Network& net, const TopologyChoices& choices) {
  PredictedCounts pc;
  pc.curves = static_cast<int>(net.curves.size());
  for (const auto& [v, topo] : choices) {
    VertexCounts vc;
    vc.vertex = v;
    vc.valence = topo.k;
    if (topo.connected()) {
      vc.interior_vertices = topo.k - 2;
      vc.edges = 2 * topo.k - 3;
      vc.interior_edges = topo.k - 3;
      pc.curves += topo.k - 3;
    } else {
      for (const auto& b : topo.blocks) {
        vc.interior_vertices += b.interior_vertices();
        vc.edges += b.edges();
        vc.interior_edges += b.interior_edges();
        pc.curves += b.edges() - b.size();
      }
    }
    pc.per_vertex.push_back(vc);
  }
  return pc;
}

ResolutionGraph assemble_resolution_graph(const Network& net, const TopologyChoices& choices) {
  ResolutionGraph g;
  std::map<int, int> original_node;
  for (std::size_t v = 0; v < net.vertices.size(); ++v)
    if (!choices.count(static_cast<int>(v))) {
      original_node[static_cast<int>(v)] = static_cast<int>(g.nodes.size());
      g.nodes.push_back({ResolutionNode::Kind::Original, static_cast<int>(v), -1});
    }

  // Terminal: node id >= 0, or joint encoded as -(joint id) - 1.
  struct Piece {
    PieceRef ref;
    int term[2];
  };
  std::vector<Piece> pieces;
  std::map<std::pair<int, int>, int> joint_id;  // (vertex, leaf) -> joint
  auto joint = [&](int v, int leaf) {
    auto [it, fresh] = joint_id.emplace(std::make_pair(v, leaf), static_cast<int>(joint_id.size()));
    (void)fresh;
    return -it->second - 1;
  };

  std::map<int, Fan> fans;
  for (auto& f : extract_fans(net)) fans[f.vertex] = std::move(f);
  std::map<int, std::map<int, int>> junction_node;

  for (const auto& [v, topo] : choices) {
    const auto fit = fans.find(v);
    if (fit == fans.end()) throw InvalidNetwork("topology choice names non-interior vertex " + std::to_string(v));
    if (fit->second.valence() != topo.k) throw PreconditionError("topology valence differs from vertex valence");
    Skeleton sk = skeleton(topo);
    for (int j = 0; j < sk.junctions; ++j) {
      junction_node[v][j] = static_cast<int>(g.nodes.size());
      g.nodes.push_back({ResolutionNode::Kind::Junction, v, j});
    }
    for (std::size_t a = 0; a < sk.arcs.size(); ++a) {
      const auto& arc = sk.arcs[a];
      Piece p{{PieceRef::Kind::SolitonArc, v, static_cast<int>(a), false}, {0, 0}};
      switch (arc.kind) {
        case SkeletonArc::Kind::External:
          p.term[0] = junction_node[v][arc.a];
          p.term[1] = joint(v, arc.b);
          break;
        case SkeletonArc::Kind::Internal:
          p.term[0] = junction_node[v][arc.a];
          p.term[1] = junction_node[v][arc.b];
          break;
        case SkeletonArc::Kind::Geodesic:
          p.term[0] = joint(v, arc.a);
          p.term[1] = joint(v, arc.b);
          break;
      }
      pieces.push_back(p);
    }
    g.skeletons.emplace(v, std::move(sk));
  }

  std::map<std::pair<int, int>, int> end_leaf;  // (curve, end) -> leaf at a resolved vertex
  for (const auto& [v, f] : fans)
    if (choices.count(v))
      for (std::size_t l = 0; l < f.ends.size(); ++l)
        end_leaf[{f.ends[l].curve, f.ends[l].end == End::End}] = static_cast<int>(l);

  std::vector<int> vertex_of_end(2 * net.curves.size(), -1);
  for (std::size_t v = 0; v < net.vertices.size(); ++v)
    for (const auto& e : net.vertices[v].incident)
      vertex_of_end[static_cast<std::size_t>(2 * e.curve + (e.end == End::End))] = static_cast<int>(v);

  for (std::size_t c = 0; c < net.curves.size(); ++c) {
    Piece p{{PieceRef::Kind::Curve, -1, static_cast<int>(c), false}, {0, 0}};
    if (net.curves[c].closed()) {
      Chain ch;
      ch.pieces.push_back(p.ref);
      ch.closed = true;
      g.chains.push_back(ch);
      continue;
    }
    for (int side = 0; side < 2; ++side) {
      const int v = vertex_of_end[2 * c + static_cast<std::size_t>(side)];
      if (v < 0) throw InvalidNetwork("curve end without vertex");
      if (choices.count(v))
        p.term[side] = joint(v, end_leaf.at({static_cast<int>(c), side == 1}));
      else
        p.term[side] = original_node.at(v);
    }
    pieces.push_back(p);
  }

  std::vector<std::vector<std::pair<int, int>>> at_joint(joint_id.size());
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (int side = 0; side < 2; ++side)
      if (pieces[i].term[side] < 0)
        at_joint[static_cast<std::size_t>(-pieces[i].term[side] - 1)].emplace_back(static_cast<int>(i), side);
  for (const auto& list : at_joint)
    if (list.size() != 2) throw InvalidNetwork("resolution leaf is not matched by exactly one curve end");

  std::vector<char> used(pieces.size(), 0);
  auto walk = [&](int first, int start_side, Chain& ch) {
    int cur = first, side = start_side;
    while (true) {
      used[static_cast<std::size_t>(cur)] = 1;
      PieceRef ref = pieces[static_cast<std::size_t>(cur)].ref;
      ref.reversed = side == 1;
      ch.pieces.push_back(ref);
      const int term = pieces[static_cast<std::size_t>(cur)].term[1 - side];
      if (term >= 0) {
        ch.end_node = term;
        return;
      }
      const auto& list = at_joint[static_cast<std::size_t>(-term - 1)];
      const auto next = list[0] == std::make_pair(cur, 1 - side) ? list[1] : list[0];
      if (used[static_cast<std::size_t>(next.first)]) {
        ch.closed = true;
        return;
      }
      cur = next.first;
      side = next.second;
    }
  };
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (int side = 0; side < 2; ++side)
      if (!used[i] && pieces[i].term[side] >= 0) {
        Chain ch;
        ch.start_node = pieces[i].term[side];
        walk(static_cast<int>(i), side, ch);
        g.chains.push_back(std::move(ch));
      }
  for (std::size_t i = 0; i < pieces.size(); ++i)
    if (!used[i]) {
      Chain ch;
      walk(static_cast<int>(i), 0, ch);
      ch.closed = true;
      ch.start_node = ch.end_node = -1;
      g.chains.push_back(std::move(ch));
    }

  // Interior ends first where possible.
  auto is_exterior = [&](int node) {
    return node >= 0 && g.nodes[static_cast<std::size_t>(node)].kind == ResolutionNode::Kind::Original &&
           net.vertices[static_cast<std::size_t>(g.nodes[static_cast<std::size_t>(node)].vertex)].kind ==
               VertexKind::Exterior;
  };
  for (auto& ch : g.chains)
    if (!ch.closed && is_exterior(ch.start_node) && !is_exterior(ch.end_node)) {
      std::reverse(ch.pieces.begin(), ch.pieces.end());
      for (auto& p : ch.pieces) p.reversed = !p.reversed;
      std::swap(ch.start_node, ch.end_node);
    }
  return g;
}

}  // namespace netflow
