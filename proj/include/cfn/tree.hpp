#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cfn {

using NodeId = int;
using EdgeId = int;

// Orientation convention: the magnetization attached to a DirectedEdge is
// evaluated at `head`, over the component containing `head` once the edge is
// removed ("the descendant subtree at head").
struct DirectedEdge {
  EdgeId edge;
  NodeId head;
  NodeId tail;
};

// Path structure between two distinct edges e = {x,y} and f = {u,v}, oriented
// so that y is the endpoint of e on the side containing f and u is the
// endpoint of f closer to y. path[j] is the j-th vertex walking from u toward
// y (path[0] = u, path[n_between] = y); side[j] is the third neighbor of
// path[j]. The extension vertices are before = v and after = x.
struct PathDecomposition {
  int n_between = 0;              // graph distance between y and u
  std::vector<NodeId> path;       // size n_between + 1
  std::vector<NodeId> side;       // size n_between + 1
  NodeId before = -1;             // v
  NodeId after = -1;              // x
};

struct NewickInfo {
  bool branch_lengths_ignored = false;
};

// Unrooted binary tree: every node has degree 1 or 3. Immutable after
// construction; edge ids are stable (order of first appearance).
class Tree {
 public:
  // Newick with unlabeled internal nodes; branch lengths are skipped (flagged
  // in `info`); a bifurcating root is suppressed into a single edge.
  static Tree parse_newick(std::string_view text, NewickInfo* info = nullptr);

  // Two complete rooted binary trees of depth-1 joined by a central edge;
  // 2^depth leaves, diameter 2*depth - 1.
  static Tree balanced(int depth);

  // Caterpillar with n_leaves leaves; diameter n_leaves - 1.
  static Tree caterpillar(int n_leaves);

  int node_count() const { return static_cast<int>(neighbors_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int leaf_count() const { return static_cast<int>(leaves_.size()); }

  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  const std::vector<NodeId>& neighbors(NodeId v) const { return neighbors_[v]; }
  const std::vector<NodeId>& leaves() const { return leaves_; }

  bool is_leaf(NodeId v) const { return neighbors_[v].size() == 1; }
  // Position of node v in the leaf order, or -1.
  int leaf_index(NodeId v) const { return leaf_index_[v]; }
  const std::string& leaf_name(int leaf_pos) const { return leaf_names_[leaf_pos]; }

  // Edge id joining adjacent nodes a and b; throws if not adjacent.
  EdgeId edge_between(NodeId a, NodeId b) const;

  // Index of the directed message slot for (head, tail); in [0, 2|E|).
  int directed_index(NodeId head, NodeId tail) const;

  // Fixed root for forward simulation: lowest-indexed internal node, or the
  // first endpoint of edge 0 when the tree has no internal node.
  NodeId simulation_root() const;

  int diameter() const;

  PathDecomposition edge_path(EdgeId e, EdgeId f) const;

  // Distances (in edges) from `from` to every node.
  std::vector<int> distances_from(NodeId from) const;

  std::string to_newick() const;

 private:
  Tree() = default;
  void finalize();  // builds adjacency/leaf tables, checks the invariants

  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<NodeId>> neighbors_;
  std::vector<std::vector<EdgeId>> neighbor_edges_;  // aligned with neighbors_
  std::vector<NodeId> leaves_;
  std::vector<int> leaf_index_;
  std::vector<std::string> leaf_names_;
};

}  // namespace cfn
