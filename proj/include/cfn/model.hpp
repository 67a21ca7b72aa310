#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfn/tree.hpp"

namespace cfn {

// One edge-correlation parameter per edge id; the flip probability of edge e
// is p_e = (1 - values[e]) / 2.
struct EdgeVector {
  std::vector<double> values;

  EdgeVector() = default;
  explicit EdgeVector(std::vector<double> v) : values(std::move(v)) {}
  static EdgeVector constant(const Tree& tree, double v) {
    return EdgeVector(std::vector<double>(tree.edge_count(), v));
  }

  int size() const { return static_cast<int>(values.size()); }
  double operator[](int e) const { return values[e]; }
  double& operator[](int e) { return values[e]; }
};

// Per-edge interval [1 - 2*upper_flip*delta, 1 - 2*lower_flip*delta]: the
// theta image of flip probabilities in [lower_flip*delta, upper_flip*delta].
struct ParamBox {
  double delta = 0;
  double lower_flip = 0;  // c: lower flip-probability coefficient
  double upper_flip = 0;  // C: upper flip-probability coefficient

  double theta_lo() const { return 1.0 - 2.0 * upper_flip * delta; }
  double theta_hi() const { return 1.0 - 2.0 * lower_flip * delta; }
  double center() const { return 0.5 * (theta_lo() + theta_hi()); }
  bool contains(double v) const { return v >= theta_lo() && v <= theta_hi(); }
  bool contains_open(double v) const { return v > theta_lo() && v < theta_hi(); }
  bool contains_open(const EdgeVector& theta) const {
    for (double v : theta.values)
      if (!contains_open(v)) return false;
    return true;
  }
};

ParamBox make_param_box(double delta, double lower_flip, double upper_flip);

// Leaf spins in the tree's leaf order, entries +1/-1.
struct LeafPattern {
  std::vector<std::int8_t> spins;

  LeafPattern() = default;
  explicit LeafPattern(std::vector<std::int8_t> s) : spins(std::move(s)) {}

  int size() const { return static_cast<int>(spins.size()); }
  // Bit i set iff leaf i has spin +1.
  std::uint32_t packed() const;
  static LeafPattern unpack(std::uint32_t bits, int n_leaves);
  LeafPattern negated() const;

  std::string to_string() const;                       // e.g. "+-++"
  static LeafPattern from_string(std::string_view s);  // throws on bad chars

  bool operator==(const LeafPattern& o) const { return spins == o.spins; }
};

// Distinct observed leaf patterns with multiplicities.
struct SampleSet {
  std::vector<LeafPattern> patterns;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const;
  int distinct() const { return static_cast<int>(patterns.size()); }
};

SampleSet make_sample_set(const std::vector<std::pair<LeafPattern, std::uint64_t>>& entries);

// m forward simulations of the edge-flip process; only leaf restrictions are
// kept, aggregated into pattern/count form. Deterministic in (seed, m).
SampleSet sample_spins(const Tree& tree, const EdgeVector& theta, std::uint64_t seed, std::uint64_t m);

// Exact leaf-pattern distribution by summing (1/2) * prod_e (1+theta_e s_u s_v)/2
// over all full spin assignments. Enumeration guard: at most 14 leaves.
struct PatternDistribution {
  int leaf_count = 0;
  std::vector<double> prob;  // indexed by LeafPattern::packed()

  double at(const LeafPattern& p) const { return prob[p.packed()]; }
};

PatternDistribution exact_leaf_distribution(const Tree& tree, const EdgeVector& theta);

// "pattern,count" CSV with patterns as +/- strings; optional '#' preamble.
void save_samples_csv(const SampleSet& samples, const std::string& path,
                      const std::vector<std::string>& preamble = {});
SampleSet load_samples_csv(const std::string& path, const Tree& tree);

}  // namespace cfn
