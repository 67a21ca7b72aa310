#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cfn/errors.hpp"
#include "cfn/likelihood.hpp"
#include "cfn/model.hpp"
#include "cfn/rng.hpp"
#include "cfn/tree.hpp"
#include "oracles.hpp"

using namespace cfn;

namespace {

SampleSet one(const LeafPattern& p) { return make_sample_set({{p, 1}}); }

SampleSet random_samples(const Tree& tree, Rng& rng, int n) {
  std::vector<std::pair<LeafPattern, std::uint64_t>> entries;
  for (int i = 0; i < n; ++i) {
    LeafPattern p = oracle::random_pattern(tree, rng);
    bool found = false;
    for (auto& [q, c] : entries)
      if (q == p) {
        ++c;
        found = true;
      }
    if (!found) entries.push_back({p, 1});
  }
  return make_sample_set(entries);
}

}  // namespace

TEST_CASE("magnetization: leaf-headed edge returns the observed spin") {
  Tree t = Tree::parse_newick("(A,B,(C,D));");
  LeafPattern p = LeafPattern::from_string("+-+-");
  EdgeVector theta = EdgeVector::constant(t, 0.8);
  MagnetizationTable table = magnetizations_all(t, theta, p);
  for (int i = 0; i < t.leaf_count(); ++i) {
    NodeId leaf = t.leaves()[i];
    NodeId nbr = t.neighbors(leaf)[0];
    CHECK(table.at(t, leaf, nbr) == static_cast<double>(p.spins[i]));
    DirectedEdge d{t.edge_between(leaf, nbr), leaf, nbr};
    CHECK(magnetization_by_definition(t, theta, p, d) == static_cast<double>(p.spins[i]));
  }
}

TEST_CASE("magnetization: cherry arithmetic") {
  Tree t = Tree::parse_newick("(A,B,(C,D));");
  EdgeVector theta = EdgeVector::constant(t, 0.9);
  SUBCASE("two +1 children") {
    LeafPattern p = LeafPattern::from_string("++++");
    MagnetizationTable table = magnetizations_all(t, theta, p);
    // inner node toward the root: children C,D both +1 with theta 0.9
    // q(0.9, 0.9) = 1.8 / 1.81
    NodeId inner = -1;
    NodeId root = -1;
    for (NodeId v = 0; v < t.node_count(); ++v)
      if (!t.is_leaf(v)) {
        bool touches_cd = false;
        for (NodeId w : t.neighbors(v))
          if (t.is_leaf(w) && t.leaf_index(w) >= 2) touches_cd = true;
        if (touches_cd)
          inner = v;
        else
          root = v;
      }
    REQUIRE(inner >= 0);
    REQUIRE(root >= 0);
    CHECK(table.at(t, inner, root) == doctest::Approx(1.8 / 1.81).epsilon(1e-12));
  }
  SUBCASE("opposite children cancel") {
    LeafPattern p = LeafPattern::from_string("+++-");
    MagnetizationTable table = magnetizations_all(t, theta, p);
    NodeId inner = -1, root = -1;
    for (NodeId v = 0; v < t.node_count(); ++v)
      if (!t.is_leaf(v)) {
        bool touches_cd = false;
        for (NodeId w : t.neighbors(v))
          if (t.is_leaf(w) && t.leaf_index(w) >= 2) touches_cd = true;
        (touches_cd ? inner : root) = v;
      }
    CHECK(table.at(t, inner, root) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("magnetization recursion matches the enumeration oracle") {
  Rng rng = Rng::keyed(21, 0);
  for (int rep = 0; rep < 100; ++rep) {
    int n = 2 + static_cast<int>(rng.next_double() * 7);  // up to 8 leaves
    Tree t = oracle::random_tree(n, rng);
    EdgeVector theta = oracle::random_theta(t, rng, -0.95, 0.95);
    LeafPattern p = oracle::random_pattern(t, rng);
    MagnetizationTable table = magnetizations_all(t, theta, p);
    for (EdgeId e = 0; e < t.edge_count(); ++e) {
      auto [u, v] = t.edges()[e];
      CHECK(table.at(t, u, v) ==
            doctest::Approx(magnetization_by_definition(t, theta, p, {e, u, v})).epsilon(1e-10));
      CHECK(table.at(t, v, u) ==
            doctest::Approx(magnetization_by_definition(t, theta, p, {e, v, u})).epsilon(1e-10));
    }
  }
}

TEST_CASE("pattern negation flips magnetizations, keeps the likelihood") {
  Rng rng = Rng::keyed(22, 0);
  for (int rep = 0; rep < 20; ++rep) {
    Tree t = oracle::random_tree(2 + rep % 6, rng);
    EdgeVector theta = oracle::random_theta(t, rng, -0.9, 0.95);
    LeafPattern p = oracle::random_pattern(t, rng);
    MagnetizationTable a = magnetizations_all(t, theta, p);
    MagnetizationTable b = magnetizations_all(t, theta, p.negated());
    for (std::size_t i = 0; i < a.z.size(); ++i)
      CHECK(a.z[i] == doctest::Approx(-b.z[i]).epsilon(1e-12));
    CHECK(log_pattern_probability(t, theta, p) ==
          doctest::Approx(log_pattern_probability(t, theta, p.negated())).epsilon(1e-12));
  }
}

TEST_CASE("log likelihood: closed forms") {
  Tree two = Tree::parse_newick("(A,B);");
  CHECK(log_likelihood(two, EdgeVector::constant(two, 0.5), one(LeafPattern::from_string("++"))) ==
        doctest::Approx(std::log(0.375)).epsilon(1e-12));
  // independent fair leaves
  Tree t = Tree::balanced(3);
  CHECK(log_likelihood(t, EdgeVector::constant(t, 0.0), one(LeafPattern::from_string("+-+--++-"))) ==
        doctest::Approx(-8 * std::log(2)).epsilon(1e-12));
}

TEST_CASE("log likelihood: agrees with the exact distribution everywhere") {
  Tree t = Tree::balanced(2);
  EdgeVector theta = EdgeVector::constant(t, 0.8);
  PatternDistribution d = exact_leaf_distribution(t, theta);
  double plogp = 0, weighted = 0;
  for (std::uint32_t bits = 0; bits < d.prob.size(); ++bits) {
    LeafPattern p = LeafPattern::unpack(bits, 4);
    double lp = log_pattern_probability(t, theta, p);
    CHECK(lp == doctest::Approx(std::log(d.prob[bits])).epsilon(1e-10));
    plogp += d.prob[bits] * std::log(d.prob[bits]);
    weighted += d.prob[bits] * lp;
  }
  CHECK(weighted == doctest::Approx(plogp).epsilon(1e-10));
}

TEST_CASE("log likelihood: root invariance") {
  Rng rng = Rng::keyed(23, 0);
  for (int rep = 0; rep < 10; ++rep) {
    Tree t = oracle::random_tree(3 + rep % 6, rng);
    EdgeVector theta = oracle::random_theta(t, rng, -0.8, 0.95);
    LeafPattern p = oracle::random_pattern(t, rng);
    double ref = log_pattern_probability(t, theta, p, t.simulation_root());
    for (NodeId v = 0; v < t.node_count(); ++v)
      CHECK(log_pattern_probability(t, theta, p, v) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("gradient: closed forms") {
  Tree two = Tree::parse_newick("(A,B);");
  EdgeVector half = EdgeVector::constant(two, 0.5);
  auto g = gradient(two, half, one(LeafPattern::from_string("++")));
  CHECK(g[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  SampleSet mixed = make_sample_set(
      {{LeafPattern::from_string("++"), 1}, {LeafPattern::from_string("+-"), 1}});
  auto g0 = gradient(two, EdgeVector::constant(two, 0.0), mixed);
  CHECK(g0[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("gradient matches finite differences") {
  Rng rng = Rng::keyed(24, 0);
  for (int rep = 0; rep < 50; ++rep) {
    Tree t = rep % 2 ? Tree::balanced(2) : Tree::balanced(3);
    EdgeVector theta = oracle::random_theta(t, rng, 0.2, 0.9);
    SampleSet samples = random_samples(t, rng, 50);
    auto g = gradient(t, theta, samples);
    for (EdgeId e = 0; e < t.edge_count(); ++e) {
      double fd = oracle::fd_gradient(t, theta, samples, e, 1e-5);
      CHECK(g[e] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("hessian: 2-leaf closed form and exact symmetry") {
  Tree two = Tree::parse_newick("(A,B);");
  SymmetricMatrix h = hessian(two, EdgeVector::constant(two, 0.5),
                              one(LeafPattern::from_string("++")));
  CHECK(h(0, 0) == doctest::Approx(-4.0 / 9.0).epsilon(1e-14));

  Rng rng = Rng::keyed(25, 0);
  Tree t = Tree::balanced(3);
  EdgeVector theta = oracle::random_theta(t, rng, 0.3, 0.9);
  SampleSet samples = random_samples(t, rng, 20);
  SymmetricMatrix big = hessian(t, theta, samples);
  for (int i = 0; i < big.dim(); ++i)
    for (int j = 0; j < big.dim(); ++j) CHECK(big(i, j) == big(j, i));
}

TEST_CASE("hessian matches finite differences of the gradient") {
  Rng rng = Rng::keyed(26, 0);
  for (int rep = 0; rep < 50; ++rep) {
    Tree t = rep % 2 ? Tree::balanced(2) : Tree::balanced(3);
    EdgeVector theta = oracle::random_theta(t, rng, 0.5, 0.9);
    SampleSet samples = random_samples(t, rng, 30);
    SymmetricMatrix h = hessian(t, theta, samples);
    for (EdgeId e = 0; e < t.edge_count(); ++e)
      for (EdgeId f = e; f < t.edge_count(); ++f) {
        double fd = oracle::fd_hessian_entry(t, theta, samples, e, f, 1e-4);
        CHECK(std::abs(h(e, f) - fd) < 1e-5);
      }
  }
}

TEST_CASE("per-sample diagonal identity") {
  Rng rng = Rng::keyed(27, 0);
  for (int rep = 0; rep < 25; ++rep) {
    Tree t = oracle::random_tree(3 + rep % 5, rng);
    EdgeVector theta = oracle::random_theta(t, rng, -0.8, 0.95);
    LeafPattern p = oracle::random_pattern(t, rng);
    auto g = pattern_gradient(t, theta, p);
    SymmetricMatrix h = pattern_hessian(t, theta, p);
    for (EdgeId e = 0; e < t.edge_count(); ++e)
      CHECK(std::abs(h(e, e) + g[e] * g[e]) <= 1e-14);
  }
}

TEST_CASE("1D restrictions are concave along every coordinate") {
  Rng rng = Rng::keyed(28, 0);
  Tree t = Tree::balanced(2);
  SampleSet samples = random_samples(t, rng, 25);
  for (double v : {-0.9, -0.5, 0.0, 0.4, 0.8, 0.95}) {
    EdgeVector theta = oracle::random_theta(t, rng, -0.5, 0.9);
    for (EdgeId e = 0; e < t.edge_count(); ++e) {
      theta[e] = v;
      SymmetricMatrix h = hessian(t, theta, samples);
      CHECK(h(e, e) <= 0.0);
    }
  }
}

TEST_CASE("third derivative probe: 2-leaf closed form") {
  Tree two = Tree::parse_newick("(A,B);");
  SampleSet s = one(LeafPattern::from_string("++"));
  // d^3/dtheta^3 log((1+theta)/4) = 2/(1+theta)^3
  double v = third_derivative_fd(two, EdgeVector::constant(two, 0.5), s, 0, 0, 0, 1e-4);
  CHECK(v == doctest::Approx(2.0 / std::pow(1.5, 3)).epsilon(1e-4));
  // bound from the box with 2 c_bar delta = 0.2
  DerivativeBounds b = deterministic_bounds(0.2, 1, 0.5);
  CHECK(std::abs(v) <= b.third_derivative_bound);
  CHECK_THROWS_AS(third_derivative_fd(two, EdgeVector::constant(two, 0.99995), s, 0, 0, 0, 1e-4),
                  std::invalid_argument);
}

TEST_CASE("deterministic bounds: spot values and monotonicity") {
  // 2 c_bar delta = 0.2 with diam 1
  DerivativeBounds b = deterministic_bounds(0.2, 1, 0.5);
  CHECK(b.gradient_bound == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(b.third_derivative_bound == doctest::Approx(62500.0).epsilon(1e-12));
  CHECK(deterministic_bounds(0.1, 1, 0.5).gradient_bound == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(deterministic_bounds(0.2, 2, 0.5).third_derivative_bound > b.third_derivative_bound);
  CHECK(deterministic_bounds(0.2, 4, 0.5).third_derivative_bound >
        deterministic_bounds(0.2, 2, 0.5).third_derivative_bound);
}

TEST_CASE("gradient bound holds over a box grid") {
  Rng rng = Rng::keyed(29, 0);
  Tree t = Tree::balanced(2);
  double delta = 0.05, c_bar = 0.5;
  ParamBox box = make_param_box(delta, c_bar, 4.0);
  double bound = deterministic_bounds(delta, t.diameter(), c_bar).gradient_bound;
  SampleSet samples = random_samples(t, rng, 40);
  for (int rep = 0; rep < 30; ++rep) {
    EdgeVector theta = oracle::random_theta(t, rng, box.theta_lo(), box.theta_hi());
    for (double g : gradient(t, theta, samples)) CHECK(std::abs(g) <= bound + 1e-12);
  }
}

TEST_CASE("degenerate inputs raise") {
  Tree two = Tree::parse_newick("(A,B);");
  SampleSet s = one(LeafPattern::from_string("+-"));
  // theta = 1 makes a disagreeing 2-leaf pattern impossible
  CHECK_THROWS_AS(log_likelihood(two, EdgeVector::constant(two, 1.0), s), numerical_error);
  CHECK_THROWS_AS(log_likelihood(two, EdgeVector::constant(two, 1.5), s), std::invalid_argument);
  SampleSet empty;
  CHECK_THROWS_AS(log_likelihood(two, EdgeVector::constant(two, 0.5), empty),
                  std::invalid_argument);
}
