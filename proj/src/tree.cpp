#include "cfn/tree.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <stdexcept>
#include <string>

namespace cfn {

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' ||
         c == '|';
}

// Recursive-descent Newick reader producing a rooted node/edge list; the
// caller unroots afterwards.
class NewickReader {
 public:
  NewickReader(std::string_view text, NewickInfo* info) : text_(text), info_(info) {}

  // Returns (edges, names) with the root as node 0? No: root is whatever
  // parse_node returned first; exposed via root().
  NodeId parse() {
    skip_ws();
    NodeId root = parse_node();
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != ';')
      throw std::invalid_argument("newick: missing terminating ';'");
    ++pos_;
    skip_ws();
    if (pos_ != text_.size())
      throw std::invalid_argument("newick: trailing characters after ';'");
    return root;
  }

  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  const std::vector<std::string>& names() const { return names_; }
  int node_count() const { return next_id_; }

 private:
  NodeId new_node() {
    names_.emplace_back();
    return next_id_++;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_branch_length() {
    if (peek() != ':') return;
    ++pos_;
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == '+' || text_[pos_] == '-' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      ++pos_;
    if (pos_ == start) throw std::invalid_argument("newick: ':' without a branch length");
    if (info_) info_->branch_lengths_ignored = true;
  }

  NodeId parse_node() {
    skip_ws();
    if (peek() == '(') {
      ++pos_;
      NodeId me = new_node();
      while (true) {
        NodeId child = parse_node();
        edges_.emplace_back(me, child);
        skip_ws();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        throw std::invalid_argument("newick: expected ',' or ')'");
      }
      skip_ws();
      if (is_name_char(peek()))
        throw std::invalid_argument("newick: internal node labels are not supported");
      skip_branch_length();
      return me;
    }
    // leaf
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_name_char(text_[pos_])) ++pos_;
    if (pos_ == start) throw std::invalid_argument("newick: expected a leaf name or '('");
    NodeId me = new_node();
    names_[me] = std::string(text_.substr(start, pos_ - start));
    skip_branch_length();
    return me;
  }

  std::string_view text_;
  NewickInfo* info_;
  std::size_t pos_ = 0;
  int next_id_ = 0;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::string> names_;
};

}  // namespace

void Tree::finalize() {
  const int n = node_count();
  if (edge_count() != n - 1) throw std::invalid_argument("tree: |E| != |V| - 1");
  neighbor_edges_.assign(n, {});
  neighbors_.assign(n, {});
  for (EdgeId e = 0; e < edge_count(); ++e) {
    auto [u, v] = edges_[e];
    if (u < 0 || v < 0 || u >= n || v >= n || u == v)
      throw std::invalid_argument("tree: bad edge endpoints");
    neighbors_[u].push_back(v);
    neighbor_edges_[u].push_back(e);
    neighbors_[v].push_back(u);
    neighbor_edges_[v].push_back(e);
  }
  leaves_.clear();
  leaf_index_.assign(n, -1);
  for (NodeId v = 0; v < n; ++v) {
    std::size_t deg = neighbors_[v].size();
    if (deg != 1 && deg != 3)
      throw std::invalid_argument("tree: node of degree " + std::to_string(deg) +
                                  " (only 1 or 3 allowed)");
  }
  // leaf order must already be set by the builder via leaves_/leaf_names_;
  // fall back to node-id order if not.
  if (leaves_.empty()) {
    for (NodeId v = 0; v < n; ++v)
      if (neighbors_[v].size() == 1) leaves_.push_back(v);
  }
  for (int i = 0; i < leaf_count(); ++i) leaf_index_[leaves_[i]] = i;
  if (leaf_count() < 2) throw std::invalid_argument("tree: fewer than 2 leaves");
  // connectivity
  std::vector<char> seen(n, 0);
  std::deque<NodeId> queue{0};
  seen[0] = 1;
  int visited = 0;
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    ++visited;
    for (NodeId w : neighbors_[u])
      if (!seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
  }
  if (visited != n) throw std::invalid_argument("tree: not connected");
}

Tree Tree::parse_newick(std::string_view text, NewickInfo* info) {
  NewickReader reader(text, info);
  NodeId root = reader.parse();
  auto edges = reader.edges();
  auto names = reader.names();
  int n = reader.node_count();
  if (n == 1) throw std::invalid_argument("tree: fewer than 2 leaves");

  // Suppress a bifurcating root: replace its two incident edges by one edge
  // joining the two children, keeping the position of the first.
  int root_degree = 0;
  for (auto& [u, v] : edges) root_degree += (u == root) + (v == root);
  if (root_degree == 2) {
    int first = -1, second = -1;
    for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
      auto [u, v] = edges[i];
      if (u != root && v != root) continue;
      if (first == -1)
        first = i;
      else
        second = i;
    }
    auto other = [&](int i) {
      return edges[i].first == root ? edges[i].second : edges[i].first;
    };
    edges[first] = {other(first), other(second)};
    edges.erase(edges.begin() + second);
    // compact node ids: drop the root slot
    std::vector<NodeId> remap(n, -1);
    int next = 0;
    for (NodeId v = 0; v < n; ++v)
      if (v != root) remap[v] = next++;
    for (auto& [u, v] : edges) {
      u = remap[u];
      v = remap[v];
    }
    std::vector<std::string> names2;
    names2.reserve(n - 1);
    for (NodeId v = 0; v < n; ++v)
      if (v != root) names2.push_back(std::move(names[v]));
    names = std::move(names2);
    n -= 1;
  }

  Tree t;
  t.edges_ = std::move(edges);
  t.neighbors_.assign(n, {});
  // leaf order: order of appearance in the input (ascending pre-compaction id
  // preserves it, as compaction keeps relative order)
  std::vector<int> degree(n, 0);
  for (auto& [u, v] : t.edges_) {
    ++degree[u];
    ++degree[v];
  }
  for (NodeId v = 0; v < n; ++v) {
    if (degree[v] == 1) {
      if (names[v].empty()) throw std::invalid_argument("newick: unlabeled leaf");
      t.leaves_.push_back(v);
      t.leaf_names_.push_back(names[v]);
    }
  }
  t.finalize();
  return t;
}

Tree Tree::balanced(int depth) {
  if (depth < 1) throw std::invalid_argument("balanced: depth must be >= 1");
  Tree t;
  int next = 0;
  // builds a complete rooted subtree, returns its root id
  auto build = [&](auto&& self, int d) -> NodeId {
    NodeId me = next++;
    if (d == 0) {
      t.leaves_.push_back(me);
      return me;
    }
    NodeId a = self(self, d - 1);
    NodeId b = self(self, d - 1);
    t.edges_.emplace_back(me, a);
    t.edges_.emplace_back(me, b);
    return me;
  };
  NodeId left = build(build, depth - 1);
  NodeId right = build(build, depth - 1);
  t.edges_.emplace_back(left, right);
  t.neighbors_.assign(next, {});
  for (std::size_t i = 0; i < t.leaves_.size(); ++i)
    t.leaf_names_.push_back("L" + std::to_string(i + 1));
  t.finalize();
  return t;
}

Tree Tree::caterpillar(int n_leaves) {
  if (n_leaves < 2) throw std::invalid_argument("caterpillar: need at least 2 leaves");
  Tree t;
  if (n_leaves == 2) {
    t.edges_.emplace_back(0, 1);
    t.leaves_ = {0, 1};
    t.neighbors_.assign(2, {});
  } else {
    // spine s_1..s_{n-2} after the leaf ids 0..n-1
    int spine = n_leaves - 2;
    auto spine_node = [&](int i) { return n_leaves + i; };
    t.edges_.emplace_back(spine_node(0), 0);
    t.edges_.emplace_back(spine_node(0), 1);
    for (int i = 1; i < spine; ++i) {
      t.edges_.emplace_back(spine_node(i - 1), spine_node(i));
      t.edges_.emplace_back(spine_node(i), i + 1);
    }
    t.edges_.emplace_back(spine_node(spine - 1), n_leaves - 1);
    for (int i = 0; i < n_leaves; ++i) t.leaves_.push_back(i);
    t.neighbors_.assign(n_leaves + spine, {});
  }
  for (int i = 0; i < n_leaves; ++i) t.leaf_names_.push_back("L" + std::to_string(i + 1));
  t.finalize();
  return t;
}

EdgeId Tree::edge_between(NodeId a, NodeId b) const {
  const auto& adj = neighbors_[a];
  for (std::size_t i = 0; i < adj.size(); ++i)
    if (adj[i] == b) return neighbor_edges_[a][i];
  throw std::invalid_argument("edge_between: nodes not adjacent");
}

int Tree::directed_index(NodeId head, NodeId tail) const {
  EdgeId e = edge_between(head, tail);
  return 2 * e + (edges_[e].first == head ? 0 : 1);
}

NodeId Tree::simulation_root() const {
  for (NodeId v = 0; v < node_count(); ++v)
    if (!is_leaf(v)) return v;
  return edges_[0].first;
}

std::vector<int> Tree::distances_from(NodeId from) const {
  std::vector<int> dist(node_count(), -1);
  std::deque<NodeId> queue{from};
  dist[from] = 0;
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    for (NodeId w : neighbors_[u])
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
  }
  return dist;
}

int Tree::diameter() const {
  auto d0 = distances_from(0);
  NodeId far = static_cast<NodeId>(std::max_element(d0.begin(), d0.end()) - d0.begin());
  auto d1 = distances_from(far);
  return *std::max_element(d1.begin(), d1.end());
}

PathDecomposition Tree::edge_path(EdgeId e, EdgeId f) const {
  if (e == f) throw std::invalid_argument("edge_path: edges must be distinct");
  if (e < 0 || f < 0 || e >= edge_count() || f >= edge_count())
    throw std::invalid_argument("edge_path: invalid edge id");
  auto [e1, e2] = edges_[e];
  auto [f1, f2] = edges_[f];
  auto de1 = distances_from(e1);
  auto de2 = distances_from(e2);
  // y: endpoint of e on the side containing f (strictly closer to f)
  NodeId y, x;
  if (std::min(de1[f1], de1[f2]) < std::min(de2[f1], de2[f2])) {
    y = e1;
    x = e2;
  } else {
    y = e2;
    x = e1;
  }
  auto dy = distances_from(y);
  NodeId u, v;
  if (dy[f1] < dy[f2]) {
    u = f1;
    v = f2;
  } else {
    u = f2;
    v = f1;
  }

  PathDecomposition out;
  out.n_between = dy[u];
  out.before = v;
  out.after = x;
  // walk from u up toward y following decreasing dy
  out.path.reserve(out.n_between + 1);
  NodeId cur = u;
  out.path.push_back(cur);
  while (cur != y) {
    for (NodeId w : neighbors_[cur])
      if (dy[w] == dy[cur] - 1) {
        cur = w;
        break;
      }
    out.path.push_back(cur);
  }
  // side vertex: the neighbor of path[j] distinct from its path/extension
  // neighbors
  out.side.resize(out.n_between + 1, -1);
  for (int j = 0; j <= out.n_between; ++j) {
    NodeId prev = (j == 0) ? out.before : out.path[j - 1];
    NodeId next = (j == out.n_between) ? out.after : out.path[j + 1];
    for (NodeId w : neighbors_[out.path[j]])
      if (w != prev && w != next) {
        out.side[j] = w;
        break;
      }
  }
  return out;
}

std::string Tree::to_newick() const {
  std::string out;
  // root at the neighbor of the first leaf (the leaf itself for a 2-leaf tree)
  NodeId root = leaf_count() == 2 ? leaves_[0] : neighbors_[leaves_[0]][0];
  auto emit = [&](auto&& self, NodeId v, NodeId parent) -> void {
    if (is_leaf(v)) {
      out += leaf_names_[leaf_index_[v]];
      return;
    }
    out += '(';
    bool first = true;
    for (NodeId w : neighbors_[v]) {
      if (w == parent) continue;
      if (!first) out += ',';
      first = false;
      self(self, w, v);
    }
    out += ')';
  };
  if (leaf_count() == 2) {
    out = '(' + leaf_names_[0] + ',' + leaf_names_[1] + ')';
  } else {
    out += '(';
    bool first = true;
    for (NodeId w : neighbors_[root]) {
      if (!first) out += ',';
      first = false;
      emit(emit, w, root);
    }
    out += ')';
  }
  out += ';';
  return out;
}

}  // namespace cfn
