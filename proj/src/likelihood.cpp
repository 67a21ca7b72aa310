#include "cfn/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cfn/errors.hpp"

namespace cfn {

namespace {

constexpr double kDenomFloor = 1e-14;

void check_inputs(const Tree& tree, const EdgeVector& theta, const LeafPattern& pattern) {
  if (theta.size() != tree.edge_count())
    throw std::invalid_argument("theta length != edge count");
  if (pattern.size() != tree.leaf_count())
    throw std::invalid_argument("pattern length != leaf count");
  for (double v : theta.values)
    if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument("theta entry outside [-1,1]");
}

// DFS pre-order (node, parent) pairs from `root`.
std::vector<std::pair<NodeId, NodeId>> traversal(const Tree& tree, NodeId root) {
  std::vector<std::pair<NodeId, NodeId>> order;
  order.reserve(tree.node_count());
  std::vector<std::pair<NodeId, NodeId>> stack{{root, -1}};
  while (!stack.empty()) {
    auto [u, p] = stack.back();
    stack.pop_back();
    order.emplace_back(u, p);
    for (NodeId w : tree.neighbors(u))
      if (w != p) stack.emplace_back(w, u);
  }
  return order;
}

double combine_children(const Tree& tree, const EdgeVector& theta, const LeafPattern& pattern,
                        const std::vector<double>& z, NodeId head, NodeId tail) {
  bool have = false;
  double acc = 0.0;
  for (NodeId w : tree.neighbors(head)) {
    if (w == tail) continue;
    double term = theta[tree.edge_between(head, w)] * z[tree.directed_index(w, head)];
    if (!have) {
      acc = term;
      have = true;
    } else {
      double den = 1.0 + acc * term;
      if (std::abs(den) < kDenomFloor)
        throw numerical_error("magnetization: degenerate combine denominator");
      acc = (acc + term) / den;
    }
  }
  if (!have) return static_cast<double>(pattern.spins[tree.leaf_index(head)]);
  return std::clamp(acc, -1.0, 1.0);
}

}  // namespace

MagnetizationTable magnetizations_all(const Tree& tree, const EdgeVector& theta_hat,
                                      const LeafPattern& pattern) {
  check_inputs(tree, theta_hat, pattern);
  MagnetizationTable table;
  table.z.assign(2 * tree.edge_count(), 0.0);
  auto order = traversal(tree, 0);
  // upward: magnetization of each node over its subtree away from the parent
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto [u, p] = *it;
    if (p < 0) continue;
    table.z[tree.directed_index(u, p)] = combine_children(tree, theta_hat, pattern, table.z, u, p);
  }
  // downward: magnetization of each parent over everything away from the child
  for (auto [u, p] : order) {
    if (p < 0) continue;
    table.z[tree.directed_index(p, u)] = combine_children(tree, theta_hat, pattern, table.z, p, u);
  }
  return table;
}

double magnetization_by_definition(const Tree& tree, const EdgeVector& theta_hat,
                                   const LeafPattern& pattern, const DirectedEdge& d) {
  check_inputs(tree, theta_hat, pattern);
  if (tree.leaf_count() > 14)
    throw std::invalid_argument("magnetization_by_definition: more than 14 leaves");
  {
    auto [a, b] = tree.edges()[d.edge];
    if (!((d.head == a && d.tail == b) || (d.head == b && d.tail == a)))
      throw std::invalid_argument("magnetization_by_definition: head/tail do not match edge");
  }
  if (tree.is_leaf(d.head)) return pattern.spins[tree.leaf_index(d.head)];

  // gather the descendant subtree at head
  std::vector<char> in_sub(tree.node_count(), 0);
  std::vector<NodeId> stack{d.head};
  in_sub[d.head] = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (NodeId w : tree.neighbors(u)) {
      if (u == d.head && w == d.tail) continue;
      if (!in_sub[w]) {
        in_sub[w] = 1;
        stack.push_back(w);
      }
    }
  }
  std::vector<EdgeId> sub_edges;
  for (EdgeId e = 0; e < tree.edge_count(); ++e) {
    auto [a, b] = tree.edges()[e];
    if (in_sub[a] && in_sub[b]) sub_edges.push_back(e);
  }
  std::vector<NodeId> free_nodes;  // internal subtree nodes whose spin is summed over
  for (NodeId v = 0; v < tree.node_count(); ++v)
    if (in_sub[v] && v != d.head && !tree.is_leaf(v)) free_nodes.push_back(v);

  std::vector<std::int8_t> spin(tree.node_count(), 0);
  for (int i = 0; i < tree.leaf_count(); ++i) spin[tree.leaves()[i]] = pattern.spins[i];

  double mass[2] = {0.0, 0.0};  // head spin -1 / +1
  const std::uint64_t total = std::uint64_t(1) << free_nodes.size();
  for (int hs = 0; hs < 2; ++hs) {
    spin[d.head] = hs ? 1 : -1;
    for (std::uint64_t assign = 0; assign < total; ++assign) {
      for (std::size_t i = 0; i < free_nodes.size(); ++i)
        spin[free_nodes[i]] = (assign >> i) & 1u ? 1 : -1;
      double p = 1.0;
      for (EdgeId e : sub_edges) {
        auto [a, b] = tree.edges()[e];
        p *= (1.0 + theta_hat[e] * spin[a] * spin[b]) / 2.0;
      }
      mass[hs] += p;
    }
  }
  double denom = mass[0] + mass[1];
  if (denom <= 0.0) throw numerical_error("magnetization: zero conditional mass");
  return (mass[1] - mass[0]) / denom;
}

double log_pattern_probability(const Tree& tree, const EdgeVector& theta_hat,
                               const LeafPattern& pattern, NodeId root) {
  check_inputs(tree, theta_hat, pattern);
  if (root < 0) root = tree.simulation_root();
  auto order = traversal(tree, root);
  // L[v][s]: probability of the observed leaves below v given spin s at v,
  // rescaled per node; log_scale accumulates the rescaling.
  std::vector<double> minus(tree.node_count(), 1.0), plus(tree.node_count(), 1.0);
  double log_scale = 0.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto [v, parent] = *it;
    double lm = 1.0, lp = 1.0;
    if (tree.is_leaf(v)) {
      bool up = pattern.spins[tree.leaf_index(v)] > 0;
      lm = up ? 0.0 : 1.0;
      lp = up ? 1.0 : 0.0;
    }
    for (NodeId c : tree.neighbors(v)) {
      if (c == parent) continue;
      double th = theta_hat[tree.edge_between(v, c)];
      double same = (1.0 + th) / 2.0, diff = (1.0 - th) / 2.0;
      lm *= same * minus[c] + diff * plus[c];
      lp *= diff * minus[c] + same * plus[c];
    }
    double scale = std::max(std::abs(lm), std::abs(lp));
    if (scale <= 0.0)
      throw numerical_error("likelihood: pattern probability underflowed to zero");
    minus[v] = lm / scale;
    plus[v] = lp / scale;
    log_scale += std::log(scale);
  }
  double p = 0.5 * (minus[root] + plus[root]);
  if (p <= 0.0) throw numerical_error("likelihood: pattern probability underflowed to zero");
  return std::log(p) + log_scale;
}

double log_likelihood(const Tree& tree, const EdgeVector& theta_hat, const SampleSet& samples) {
  if (samples.distinct() == 0) throw std::invalid_argument("log_likelihood: empty sample set");
  double acc = 0.0;
  for (int i = 0; i < samples.distinct(); ++i)
    acc += static_cast<double>(samples.counts[i]) *
           log_pattern_probability(tree, theta_hat, samples.patterns[i]);
  return acc / static_cast<double>(samples.total());
}

std::vector<double> pattern_gradient(const Tree& tree, const EdgeVector& theta_hat,
                                     const LeafPattern&, const MagnetizationTable& table) {
  std::vector<double> g(tree.edge_count());
  for (EdgeId e = 0; e < tree.edge_count(); ++e) {
    double z = table.z[2 * e] * table.z[2 * e + 1];
    double den = 1.0 + theta_hat[e] * z;
    if (std::abs(den) < kDenomFloor)
      throw numerical_error("gradient: degenerate denominator");
    g[e] = z / den;
  }
  return g;
}

std::vector<double> pattern_gradient(const Tree& tree, const EdgeVector& theta_hat,
                                     const LeafPattern& pattern) {
  return pattern_gradient(tree, theta_hat, pattern, magnetizations_all(tree, theta_hat, pattern));
}

std::vector<double> gradient(const Tree& tree, const EdgeVector& theta_hat,
                             const SampleSet& samples) {
  if (samples.distinct() == 0) throw std::invalid_argument("gradient: empty sample set");
  std::vector<double> acc(tree.edge_count(), 0.0);
  for (int i = 0; i < samples.distinct(); ++i) {
    auto g = pattern_gradient(tree, theta_hat, samples.patterns[i]);
    for (EdgeId e = 0; e < tree.edge_count(); ++e)
      acc[e] += static_cast<double>(samples.counts[i]) * g[e];
  }
  double m = static_cast<double>(samples.total());
  for (double& v : acc) v /= m;
  return acc;
}

namespace {

// Pattern-independent evaluation plan for one off-diagonal Hessian entry.
struct PairPlan {
  EdgeId e, f;
  int zx_dir, zy_dir, zv_dir;
  std::vector<EdgeId> path_edges;  // {y_j, y_{j-1}}, j = 1..N
  struct SideTerm {
    EdgeId side_edge;  // {y_j, w_j}
    EdgeId step_edge;  // {y_j, y_{j-1}}
    int w_dir;         // Z at w_j over its subtree away from y_j
    int ym_dir;        // Z at y_{j-1} over its subtree away from y_j
  };
  std::vector<SideTerm> side;
};

std::vector<PairPlan> build_plans(const Tree& tree) {
  std::vector<PairPlan> plans;
  const int E = tree.edge_count();
  plans.reserve(E * (E - 1) / 2);
  for (EdgeId e = 0; e < E; ++e) {
    for (EdgeId f = e + 1; f < E; ++f) {
      PathDecomposition pd = tree.edge_path(e, f);
      PairPlan plan;
      plan.e = e;
      plan.f = f;
      NodeId y = pd.path.back(), x = pd.after;
      NodeId u = pd.path.front(), v = pd.before;
      plan.zx_dir = tree.directed_index(x, y);
      plan.zy_dir = tree.directed_index(y, x);
      plan.zv_dir = tree.directed_index(v, u);
      for (int j = 1; j <= pd.n_between; ++j)
        plan.path_edges.push_back(tree.edge_between(pd.path[j], pd.path[j - 1]));
      for (int j = 0; j <= pd.n_between; ++j) {
        NodeId yj = pd.path[j];
        NodeId prev = (j == 0) ? pd.before : pd.path[j - 1];
        PairPlan::SideTerm term;
        term.side_edge = tree.edge_between(yj, pd.side[j]);
        term.step_edge = tree.edge_between(yj, prev);
        term.w_dir = tree.directed_index(pd.side[j], yj);
        term.ym_dir = tree.directed_index(prev, yj);
        plan.side.push_back(term);
      }
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

double eval_plan(const PairPlan& plan, const EdgeVector& theta, const std::vector<double>& z) {
  double den0 = 1.0 + theta[plan.e] * z[plan.zx_dir] * z[plan.zy_dir];
  if (std::abs(den0) < kDenomFloor) throw numerical_error("hessian: degenerate denominator");
  double val = z[plan.zx_dir] * z[plan.zv_dir] / (den0 * den0);
  for (EdgeId pe : plan.path_edges) val *= theta[pe];
  for (const auto& term : plan.side) {
    double tw = theta[term.side_edge] * z[term.w_dir];
    double den = 1.0 + theta[term.side_edge] * theta[term.step_edge] * z[term.w_dir] * z[term.ym_dir];
    if (std::abs(den) < kDenomFloor) throw numerical_error("hessian: degenerate denominator");
    val *= (1.0 - tw * tw) / (den * den);
  }
  return val;
}

}  // namespace

SymmetricMatrix average_hessian(const Tree& tree, const EdgeVector& theta_hat,
                                const std::vector<LeafPattern>& patterns,
                                const std::vector<double>& weights) {
  if (patterns.size() != weights.size())
    throw std::invalid_argument("average_hessian: pattern/weight size mismatch");
  if (patterns.empty()) throw std::invalid_argument("average_hessian: no patterns");
  const int E = tree.edge_count();
  auto plans = build_plans(tree);
  SymmetricMatrix H(E);
  double total = 0.0;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    double w = weights[i];
    if (w == 0.0) continue;
    total += w;
    auto table = magnetizations_all(tree, theta_hat, patterns[i]);
    auto g = pattern_gradient(tree, theta_hat, patterns[i], table);
    for (EdgeId e = 0; e < E; ++e) H.add(e, e, -w * g[e] * g[e]);
    for (const auto& plan : plans) H.add(plan.e, plan.f, w * eval_plan(plan, theta_hat, table.z));
  }
  if (total <= 0.0) throw std::invalid_argument("average_hessian: zero total weight");
  H.scale(1.0 / total);
  return H;
}

SymmetricMatrix pattern_hessian(const Tree& tree, const EdgeVector& theta_hat,
                                const LeafPattern& pattern) {
  return average_hessian(tree, theta_hat, {pattern}, {1.0});
}

SymmetricMatrix hessian(const Tree& tree, const EdgeVector& theta_hat, const SampleSet& samples) {
  if (samples.distinct() == 0) throw std::invalid_argument("hessian: empty sample set");
  std::vector<double> weights(samples.counts.begin(), samples.counts.end());
  return average_hessian(tree, theta_hat, samples.patterns, weights);
}

double third_derivative_fd(const Tree& tree, const EdgeVector& theta_hat, const SampleSet& samples,
                           EdgeId e1, EdgeId e2, EdgeId e3, double h) {
  if (!(h > 0)) throw std::invalid_argument("third_derivative_fd: h must be > 0");
  if (std::abs(theta_hat[e3]) + h >= 1.0)
    throw std::invalid_argument("third_derivative_fd: step leaves (-1,1)");
  EdgeVector up = theta_hat, down = theta_hat;
  up[e3] += h;
  down[e3] -= h;
  double a = hessian(tree, up, samples)(e1, e2);
  double b = hessian(tree, down, samples)(e1, e2);
  return (a - b) / (2.0 * h);
}

DerivativeBounds deterministic_bounds(double delta, int diam, double c_bar, double C_tilde) {
  if (!(delta > 0) || !(c_bar > 0) || diam < 1 || !(C_tilde > 0))
    throw std::invalid_argument("deterministic_bounds: inputs must be positive");
  double s = 2.0 * c_bar * delta;
  DerivativeBounds out;
  out.gradient_bound = 1.0 / s;
  out.third_derivative_bound = 4.0 * diam / std::pow(s, 4 * diam + 2);
  out.hessian_entry_scale = std::pow(C_tilde / delta, diam / 2.0 + 4.0);
  return out;
}

}  // namespace cfn
