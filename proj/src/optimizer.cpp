#include "cfn/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cfn/errors.hpp"
#include "cfn/likelihood.hpp"

namespace cfn {

namespace {

constexpr double kDenomFloor = 1e-14;

// Derivative of the 1D restriction: g(t) = (1/m) sum_i c_i z_i / (1 + t z_i),
// strictly decreasing in t wherever some z_i != 0. Values z_i are clamped to
// [-1,1] upstream, so 1 + t z_i >= 0 on [-1,1]; an exact zero denominator is
// the one-sided limit and IEEE division yields the correctly signed infinity.
double derivative_at(const std::vector<double>& z, const std::vector<std::uint64_t>& counts,
                     double m, double t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] == 0.0) continue;
    acc += static_cast<double>(counts[i]) * z[i] / (1.0 + t * z[i]);
  }
  return acc / m;
}

CoordinateUpdateResult solve_1d(const std::vector<double>& z,
                                const std::vector<std::uint64_t>& counts, double current,
                                double lo, double hi, double tol) {
  bool flat = std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; });
  if (flat) return {current, true};
  double m = 0.0;
  for (auto c : counts) m += static_cast<double>(c);
  if (derivative_at(z, counts, m, lo) <= 0.0) return {lo, false};
  if (derivative_at(z, counts, m, hi) >= 0.0) return {hi, false};
  double a = lo, b = hi;
  while (b - a > tol) {
    double mid = 0.5 * (a + b);
    if (derivative_at(z, counts, m, mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  return {0.5 * (a + b), false};
}

// Per-pattern directed magnetizations kept consistent with the current
// parameter under single-coordinate updates. Changing theta_e only invalidates
// the messages oriented away from e; messages pointing toward e stay valid, so
// each 1D solve refreshes just what it needs.
class MessageWorkspace {
 public:
  MessageWorkspace(const Tree& tree, const SampleSet& samples, const EdgeVector& theta)
      : tree_(tree),
        samples_(samples),
        theta_(theta),
        n_patterns_(samples.distinct()),
        values_(static_cast<std::size_t>(2 * tree.edge_count()) * samples.distinct()),
        valid_(2 * tree.edge_count(), 0) {}

  void update_theta(EdgeId e, double value) {
    theta_[e] = value;
    auto [u, v] = tree_.edges()[e];
    invalidate_away_from(u, v);
    invalidate_away_from(v, u);
  }

  // z products Z_head * Z_tail across edge e for every pattern
  void edge_products(EdgeId e, std::vector<double>& out) {
    ensure(2 * e);
    ensure(2 * e + 1);
    out.resize(n_patterns_);
    const double* a = values_.data() + static_cast<std::size_t>(2 * e) * n_patterns_;
    const double* b = values_.data() + static_cast<std::size_t>(2 * e + 1) * n_patterns_;
    for (int i = 0; i < n_patterns_; ++i) out[i] = a[i] * b[i];
  }

 private:
  // invalidate every message (parent-toward-e, node) in the component of
  // `from` when edge {from, other} is removed
  void invalidate_away_from(NodeId from, NodeId other) {
    std::vector<std::pair<NodeId, NodeId>> stack{{from, other}};
    while (!stack.empty()) {
      auto [node, parent] = stack.back();
      stack.pop_back();
      for (NodeId w : tree_.neighbors(node)) {
        if (w == parent) continue;
        valid_[tree_.directed_index(node, w)] = 0;
        stack.emplace_back(w, node);
      }
    }
  }

  void ensure(int dir) {
    if (valid_[dir]) return;
    std::vector<int> stack{dir};
    while (!stack.empty()) {
      int d = stack.back();
      EdgeId e = d / 2;
      auto [a, b] = tree_.edges()[e];
      NodeId head = (d % 2 == 0) ? a : b;
      NodeId tail = (d % 2 == 0) ? b : a;
      bool ready = true;
      for (NodeId w : tree_.neighbors(head)) {
        if (w == tail) continue;
        int child = tree_.directed_index(w, head);
        if (!valid_[child]) {
          ready = false;
          stack.push_back(child);
        }
      }
      if (!ready) continue;
      compute(d, head, tail);
      valid_[d] = 1;
      stack.pop_back();
    }
  }

  void compute(int dir, NodeId head, NodeId tail) {
    double* out = values_.data() + static_cast<std::size_t>(dir) * n_patterns_;
    if (tree_.is_leaf(head)) {
      int li = tree_.leaf_index(head);
      for (int i = 0; i < n_patterns_; ++i)
        out[i] = static_cast<double>(samples_.patterns[i].spins[li]);
      return;
    }
    const double* child_vals[2] = {nullptr, nullptr};
    double child_theta[2] = {0, 0};
    int k = 0;
    for (NodeId w : tree_.neighbors(head)) {
      if (w == tail) continue;
      child_vals[k] = values_.data() +
                      static_cast<std::size_t>(tree_.directed_index(w, head)) * n_patterns_;
      child_theta[k] = theta_[tree_.edge_between(head, w)];
      ++k;
    }
    for (int i = 0; i < n_patterns_; ++i) {
      double s = child_theta[0] * child_vals[0][i];
      double t = child_theta[1] * child_vals[1][i];
      double den = 1.0 + s * t;
      if (std::abs(den) < kDenomFloor)
        throw numerical_error("magnetization: degenerate combine denominator");
      out[i] = std::clamp((s + t) / den, -1.0, 1.0);
    }
  }

  const Tree& tree_;
  const SampleSet& samples_;
  EdgeVector theta_;
  int n_patterns_;
  std::vector<double> values_;  // [directed edge][pattern]
  std::vector<char> valid_;
};

std::pair<double, double> search_interval(const OptConfig& config) {
  if (config.clamp_box) return {config.clamp_box->theta_lo(), config.clamp_box->theta_hi()};
  return {-1.0, 1.0};
}

}  // namespace

CoordinateUpdateResult coordinate_update(const Tree& tree, const EdgeVector& theta_hat,
                                         const SampleSet& samples, EdgeId e, double tol,
                                         const ParamBox* clamp) {
  if (e < 0 || e >= tree.edge_count()) throw std::invalid_argument("coordinate_update: bad edge");
  if (samples.distinct() == 0) throw std::invalid_argument("coordinate_update: empty sample set");
  auto [x, y] = tree.edges()[e];
  std::vector<double> z(samples.distinct());
  for (int i = 0; i < samples.distinct(); ++i) {
    auto table = magnetizations_all(tree, theta_hat, samples.patterns[i]);
    z[i] = table.at(tree, x, y) * table.at(tree, y, x);
  }
  double lo = clamp ? clamp->theta_lo() : -1.0;
  double hi = clamp ? clamp->theta_hi() : 1.0;
  return solve_1d(z, samples.counts, theta_hat[e], lo, hi, tol);
}

OptTrace fit(const Tree& tree, const EdgeVector& theta0, const SampleSet& samples,
             const OptConfig& config) {
  const int E = tree.edge_count();
  if (theta0.size() != E) throw std::invalid_argument("fit: theta0 length != edge count");
  if (samples.distinct() == 0) throw std::invalid_argument("fit: empty sample set");
  if (!(config.sweep_tolerance > 0) || !(config.solver_tolerance > 0) || config.max_sweeps < 1)
    throw std::invalid_argument("fit: bad tolerances or sweep limit");
  auto [lo, hi] = search_interval(config);
  for (double v : theta0.values)
    if (!(v > lo && v < hi))
      throw std::invalid_argument("fit: theta0 not interior to the search domain");

  std::vector<EdgeId> order = config.edge_order;
  if (order.empty()) {
    order.resize(E);
    std::iota(order.begin(), order.end(), 0);
  } else {
    std::vector<char> hit(E, 0);
    for (EdgeId e : order) {
      if (e < 0 || e >= E || hit[e])
        throw std::invalid_argument("fit: edge_order is not a permutation");
      hit[e] = 1;
    }
    if (static_cast<int>(order.size()) != E)
      throw std::invalid_argument("fit: edge_order is not a permutation");
  }

  const double m = static_cast<double>(samples.total());
  EdgeVector theta = theta0;
  MessageWorkspace workspace(tree, samples, theta);

  OptTrace trace;
  trace.iterates.push_back(theta);
  trace.objectives.push_back(log_likelihood(tree, theta, samples));

  std::vector<double> z;
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    double max_change = 0.0;
    double min_gain = 0.0;
    for (EdgeId e : order) {
      workspace.edge_products(e, z);
      auto result = solve_1d(z, samples.counts, theta[e], lo, hi, config.solver_tolerance);
      if (result.flat) continue;
      // objective change of this single update, from the cached products
      double gain = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i)
        gain += static_cast<double>(samples.counts[i]) *
                (std::log1p(result.value * z[i]) - std::log1p(theta[e] * z[i]));
      gain /= m;
      min_gain = std::min(min_gain, gain);
      max_change = std::max(max_change, std::abs(result.value - theta[e]));
      if (result.value != theta[e]) {
        theta[e] = result.value;
        workspace.update_theta(e, result.value);
      }
    }
    double objective = log_likelihood(tree, theta, samples);
    if (!std::isfinite(objective)) throw numerical_error("fit: non-finite objective");
    trace.iterates.push_back(theta);
    trace.objectives.push_back(objective);
    trace.max_coordinate_change.push_back(max_change);
    trace.min_update_gain.push_back(min_gain);
    if (max_change < config.sweep_tolerance) {
      trace.termination = Termination::kConverged;
      return trace;
    }
  }
  trace.termination = Termination::kMaxSweeps;
  return trace;
}

ConfinementReport confinement_report(const OptTrace& trace, const ParamBox& box) {
  if (trace.iterates.empty()) throw std::invalid_argument("confinement_report: empty trace");
  ConfinementReport out;
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    if (!box.contains_open(trace.iterates[k])) {
      out.all_interior = false;
      out.first_escape_sweep = static_cast<int>(k);
      return out;
    }
  }
  return out;
}

}  // namespace cfn
