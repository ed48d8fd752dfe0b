#pragma once

#include "netflow/network.hpp"

#include <array>
#include <map>
#include <string>
#include <utility>

namespace netflow {

/// One connected component of a resolution: a planar binary tree whose
/// leaves are a cyclically contiguous run of fan rays. The tree is stored as
/// a triangulation of the b-gon whose sides correspond to the leaves: side i
/// joins polygon corners i and i+1 and carries leaf i. Diagonals are the
/// internal edges, triangles are the junctions.
struct BlockTree {
  std::vector<int> leaves;                      ///< 0-based fan indices, cyclic order
  std::vector<std::pair<int, int>> diagonals;   ///< local corners (p, q), p < q

  int size() const { return static_cast<int>(leaves.size()); }
  int interior_vertices() const { return size() >= 3 ? size() - 2 : 0; }
  int edges() const { return size() >= 3 ? 2 * size() - 3 : 1; }
  int interior_edges() const { return size() >= 3 ? size() - 3 : 0; }

  /// Triangles of the triangulation as local corner triples, sorted.
  std::vector<std::array<int, 3>> triangles() const;
  /// Local leaf indices on the p-side of diagonal (p, q): p, ..., q-1.
  std::vector<int> diagonal_side(const std::pair<int, int>& d) const;
};

struct TopologyDescriptor {
  int k = 0;
  std::vector<BlockTree> blocks;

  bool connected() const { return blocks.size() == 1; }
  /// Canonical text form: "123", "12|34", "12|345;123|45", "{12}{34}",
  /// "{1234:12|34}{56}". Leaves are 1-based.
  std::string to_string() const;
  static TopologyDescriptor parse(const std::string& text, int k);

  friend bool operator==(const TopologyDescriptor& a, const TopologyDescriptor& b) {
    return a.to_string() == b.to_string();
  }
};

/// Throws UnsupportedValence when fan.valence() < 3.
std::vector<TopologyDescriptor> enumerate_resolutions(const Fan& fan, bool allow_disconnected);
std::vector<TopologyDescriptor> enumerate_resolutions(int k, bool allow_disconnected);

/// Abstract soliton graph of a descriptor. Junctions are numbered block by
/// block in triangle order. External arcs run from a junction out to a leaf,
/// internal arcs from junction a to junction b, two-leaf geodesics from leaf a
/// to leaf b.
struct SkeletonArc {
  enum class Kind { External, Internal, Geodesic };
  Kind kind = Kind::External;
  int a = -1;
  int b = -1;
  int block = 0;
};

struct Skeleton {
  int k = 0;
  int junctions = 0;
  std::vector<int> junction_block;
  std::vector<SkeletonArc> arcs;
  /// Arc index reaching leaf i (external arc or geodesic).
  std::vector<int> leaf_arc;
};

Skeleton skeleton(const TopologyDescriptor& topo);

struct VertexCounts {
  int vertex = 0;
  int valence = 0;
  int interior_vertices = 0;
  int edges = 0;
  int interior_edges = 0;
};

struct PredictedCounts {
  int curves = 0;
  std::vector<VertexCounts> per_vertex;
};

using TopologyChoices = std::map<int, TopologyDescriptor>;

PredictedCounts predicted_counts(const Network& net, const TopologyChoices& choices);

/// Combinatorial assembly of a resolved network: original curves and soliton
/// arcs glued at the leaves and merged into maximal chains.
struct PieceRef {
  enum class Kind { Curve, SolitonArc };
  Kind kind = Kind::Curve;
  int vertex = -1;  ///< resolved vertex for soliton arcs
  int index = 0;    ///< curve id or skeleton arc id
  bool reversed = false;
};

struct ResolutionNode {
  enum class Kind { Original, Junction };
  Kind kind = Kind::Original;
  int vertex = -1;    ///< original vertex id, or the resolved vertex owning the junction
  int junction = -1;  ///< skeleton junction id
};

struct Chain {
  std::vector<PieceRef> pieces;
  int start_node = -1;  ///< -1 for closed chains
  int end_node = -1;
  bool closed = false;
};

struct ResolutionGraph {
  std::vector<ResolutionNode> nodes;
  std::vector<Chain> chains;
  std::map<int, Skeleton> skeletons;
};

ResolutionGraph assemble_resolution_graph(const Network& net, const TopologyChoices& choices);

}  // namespace netflow
