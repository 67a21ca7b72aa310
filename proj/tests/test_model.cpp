#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "cfn/model.hpp"
#include "cfn/rng.hpp"
#include "cfn/tree.hpp"
#include "oracles.hpp"

using namespace cfn;

TEST_CASE("param box: interval arithmetic") {
  ParamBox b1 = make_param_box(0.05, 1.0, 2.0);
  CHECK(b1.theta_lo() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(b1.theta_hi() == doctest::Approx(0.9).epsilon(1e-15));
  ParamBox b2 = make_param_box(0.1, 0.5, 4.0);
  CHECK(b2.theta_lo() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(b2.theta_hi() == doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(make_param_box(0.05, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_param_box(-0.05, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(make_param_box(0.3, 1.0, 2.0), std::invalid_argument);  // 2*C*delta >= 1
}

TEST_CASE("param box: monotone in delta") {
  double prev_lo = 2, prev_hi = 2, prev_width = -1;
  for (double delta : {0.01, 0.05, 0.1}) {
    ParamBox b = make_param_box(delta, 1.0, 2.0);
    CHECK(b.theta_lo() < prev_lo);   // lowers
    CHECK(b.theta_hi() < prev_hi);
    CHECK(b.theta_hi() - b.theta_lo() > prev_width);  // widens
    prev_lo = b.theta_lo();
    prev_hi = b.theta_hi();
    prev_width = b.theta_hi() - b.theta_lo();
  }
}

TEST_CASE("sample_spins: deterministic and degenerate cases") {
  Tree t = Tree::balanced(2);
  SUBCASE("theta = 1 gives constant patterns") {
    SampleSet s = sample_spins(t, EdgeVector::constant(t, 1.0), 7, 500);
    CHECK(s.total() == 500);
    for (const auto& p : s.patterns) {
      bool all_plus = true, all_minus = true;
      for (auto v : p.spins) {
        all_plus = all_plus && v > 0;
        all_minus = all_minus && v < 0;
      }
      CHECK((all_plus || all_minus));
    }
  }
  SUBCASE("theta = 0 gives fair independent leaves") {
    SampleSet s = sample_spins(t, EdgeVector::constant(t, 0.0), 7, 100000);
    for (int leaf = 0; leaf < t.leaf_count(); ++leaf) {
      double mean = 0;
      for (int i = 0; i < s.distinct(); ++i)
        mean += static_cast<double>(s.counts[i]) * s.patterns[i].spins[leaf];
      mean /= static_cast<double>(s.total());
      CHECK(std::abs(mean) < 0.02);  // ~6 sigma at m=1e5
    }
  }
  SUBCASE("identical seeds reproduce; different seeds differ") {
    SampleSet a = sample_spins(t, EdgeVector::constant(t, 0.7), 42, 1000);
    SampleSet b = sample_spins(t, EdgeVector::constant(t, 0.7), 42, 1000);
    SampleSet c = sample_spins(t, EdgeVector::constant(t, 0.7), 43, 1000);
    REQUIRE(a.distinct() == b.distinct());
    for (int i = 0; i < a.distinct(); ++i) {
      CHECK(a.patterns[i] == b.patterns[i]);
      CHECK(a.counts[i] == b.counts[i]);
    }
    bool same = a.distinct() == c.distinct();
    if (same)
      for (int i = 0; i < a.distinct(); ++i) same = same && a.counts[i] == c.counts[i];
    CHECK_FALSE(same);
  }
  SUBCASE("m = 0 rejected") {
    CHECK_THROWS_AS(sample_spins(t, EdgeVector::constant(t, 0.5), 1, 0), std::invalid_argument);
  }
}

TEST_CASE("sample_spins: 2-leaf agreement frequency") {
  Tree t = Tree::parse_newick("(A,B);");
  SampleSet s = sample_spins(t, EdgeVector::constant(t, 0.5), 123, 100000);
  double agree = 0;
  for (int i = 0; i < s.distinct(); ++i)
    if (s.patterns[i].spins[0] == s.patterns[i].spins[1])
      agree += static_cast<double>(s.counts[i]);
  agree /= static_cast<double>(s.total());
  CHECK(agree == doctest::Approx(0.75).epsilon(0.0055));  // 3 sigma plus slack
}

TEST_CASE("exact_leaf_distribution: 2-leaf closed form") {
  Tree t = Tree::parse_newick("(A,B);");
  PatternDistribution d = exact_leaf_distribution(t, EdgeVector::constant(t, 0.5));
  CHECK(d.at(LeafPattern::from_string("++")) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(d.at(LeafPattern::from_string("+-")) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(d.at(LeafPattern::from_string("-+")) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(d.at(LeafPattern::from_string("--")) == doctest::Approx(0.375).epsilon(1e-14));
}

TEST_CASE("exact_leaf_distribution: normalization, symmetry, marginals") {
  Rng rng = Rng::keyed(5, 0);
  for (int rep = 0; rep < 6; ++rep) {
    Tree t = oracle::random_tree(2 + rep, rng);
    EdgeVector theta = oracle::random_theta(t, rng, -0.9, 0.95);
    PatternDistribution d = exact_leaf_distribution(t, theta);
    double total = 0;
    for (double p : d.prob) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // global spin-flip symmetry
    const std::uint32_t all = (1u << t.leaf_count()) - 1;
    for (std::uint32_t bits = 0; bits < d.prob.size(); ++bits)
      CHECK(d.prob[bits] == doctest::Approx(d.prob[bits ^ all]).epsilon(1e-12));
    // single-leaf marginals are uniform
    for (int leaf = 0; leaf < t.leaf_count(); ++leaf) {
      double plus = 0;
      for (std::uint32_t bits = 0; bits < d.prob.size(); ++bits)
        if ((bits >> leaf) & 1u) plus += d.prob[bits];
      CHECK(plus == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("exact_leaf_distribution: guards") {
  CHECK_THROWS_AS(exact_leaf_distribution(Tree::balanced(4), EdgeVector::constant(Tree::balanced(4), 0.5)),
                  std::invalid_argument);  // 16 leaves > 14
}

TEST_CASE("sampling converges to the exact distribution (TV distance)") {
  Tree t = Tree::balanced(2);
  EdgeVector theta = EdgeVector::constant(t, 0.85);
  PatternDistribution exact = exact_leaf_distribution(t, theta);
  SampleSet s = sample_spins(t, theta, 99, 100000);
  std::vector<double> emp(exact.prob.size(), 0.0);
  for (int i = 0; i < s.distinct(); ++i)
    emp[s.patterns[i].packed()] =
        static_cast<double>(s.counts[i]) / static_cast<double>(s.total());
  double tv = 0;
  for (std::size_t k = 0; k < emp.size(); ++k) tv += std::abs(emp[k] - exact.prob[k]);
  CHECK(tv / 2 < 0.01);
}

TEST_CASE("pattern string round trip and validation") {
  LeafPattern p = LeafPattern::from_string("+-++");
  CHECK(p.to_string() == "+-++");
  CHECK(p.negated().to_string() == "-+--");
  CHECK(LeafPattern::unpack(p.packed(), 4) == p);
  CHECK_THROWS_AS(LeafPattern::from_string("+x"), std::invalid_argument);
}

TEST_CASE("samples CSV round trip") {
  Tree t = Tree::balanced(2);
  SampleSet s = sample_spins(t, EdgeVector::constant(t, 0.8), 3, 5000);
  auto path = (std::filesystem::temp_directory_path() / "cfn_samples_test.csv").string();
  save_samples_csv(s, path);
  SampleSet back = load_samples_csv(path, t);
  REQUIRE(back.distinct() == s.distinct());
  CHECK(back.total() == s.total());
  for (int i = 0; i < s.distinct(); ++i) {
    CHECK(back.patterns[i] == s.patterns[i]);
    CHECK(back.counts[i] == s.counts[i]);
  }
  // wrong tree rejected
  Tree bigger = Tree::balanced(3);
  CHECK_THROWS_AS(load_samples_csv(path, bigger), std::invalid_argument);
  std::remove(path.c_str());
}
