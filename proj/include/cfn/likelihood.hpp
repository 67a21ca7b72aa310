#pragma once

#include <vector>

#include "cfn/matrix.hpp"
#include "cfn/model.hpp"
#include "cfn/tree.hpp"

namespace cfn {

// All 2|E| directed magnetizations for one leaf pattern, indexed by
// Tree::directed_index. Each value lies in [-1, 1]; at a directed edge whose
// head is a leaf the value is that leaf's spin exactly.
struct MagnetizationTable {
  std::vector<double> z;

  double at(const Tree& tree, NodeId head, NodeId tail) const {
    return z[tree.directed_index(head, tail)];
  }
};

// Belief-propagation combine: magnetization of a parent given the two scaled
// child magnetizations s and t.
inline double magnetization_combine(double s, double t) { return (s + t) / (1.0 + s * t); }

// Two-pass message schedule, O(|E|) per pattern. Requires every |theta_e| <= 1;
// raises numerical_error if a combine denominator degenerates.
MagnetizationTable magnetizations_all(const Tree& tree, const EdgeVector& theta_hat,
                                      const LeafPattern& pattern);

// Brute-force conditional magnetization by enumerating spin assignments over
// the descendant subtree (oracle for the recursion; small trees only).
double magnetization_by_definition(const Tree& tree, const EdgeVector& theta_hat,
                                   const LeafPattern& pattern, const DirectedEdge& d);

// log P(pattern) by sum-product pruning with per-node rescaling. root = -1
// picks the simulation root.
double log_pattern_probability(const Tree& tree, const EdgeVector& theta_hat,
                               const LeafPattern& pattern, NodeId root = -1);

// (1/m) sum_j log P(pattern_j), weighted by multiplicities.
double log_likelihood(const Tree& tree, const EdgeVector& theta_hat, const SampleSet& samples);

// Per-pattern derivative of the one-sample log-likelihood for each edge
// e = {x,y}: Z_x Z_y / (1 + theta_e Z_x Z_y).
std::vector<double> pattern_gradient(const Tree& tree, const EdgeVector& theta_hat,
                                     const LeafPattern& pattern);
std::vector<double> pattern_gradient(const Tree& tree, const EdgeVector& theta_hat,
                                     const LeafPattern& pattern, const MagnetizationTable& table);

std::vector<double> gradient(const Tree& tree, const EdgeVector& theta_hat,
                             const SampleSet& samples);

// Per-pattern Hessian. Diagonal entries are minus the squared gradient terms;
// off-diagonal entries follow the magnetization path-product formula over the
// PathDecomposition between the two edges.
SymmetricMatrix pattern_hessian(const Tree& tree, const EdgeVector& theta_hat,
                                const LeafPattern& pattern);

SymmetricMatrix hessian(const Tree& tree, const EdgeVector& theta_hat, const SampleSet& samples);

// Weighted average of per-pattern Hessians; weights need not be normalized
// counts (used for both sample averages and exact population mixtures).
SymmetricMatrix average_hessian(const Tree& tree, const EdgeVector& theta_hat,
                                const std::vector<LeafPattern>& patterns,
                                const std::vector<double>& weights);

// Central finite difference of the (e1,e2) Hessian entry in direction e3.
double third_derivative_fd(const Tree& tree, const EdgeVector& theta_hat, const SampleSet& samples,
                           EdgeId e1, EdgeId e2, EdgeId e3, double h);

struct DerivativeBounds {
  double gradient_bound;          // 1 / (2 c_bar delta)
  double third_derivative_bound;  // 4 diam / (2 c_bar delta)^(4 diam + 2)
  double hessian_entry_scale;     // (C_tilde / delta)^(diam/2 + 4)
};

DerivativeBounds deterministic_bounds(double delta, int diam, double c_bar, double C_tilde = 1.0);

}  // namespace cfn
