#include "cfn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cfn/csv.hpp"
#include "cfn/errors.hpp"
#include "cfn/rng.hpp"

namespace cfn {

ParamBox make_param_box(double delta, double lower_flip, double upper_flip) {
  if (!(delta > 0)) throw std::invalid_argument("param box: delta must be > 0");
  if (!(lower_flip > 0)) throw std::invalid_argument("param box: c must be > 0");
  if (!(lower_flip < upper_flip)) throw std::invalid_argument("param box: c >= C");
  if (!(2.0 * upper_flip * delta < 1.0))
    throw std::invalid_argument("param box: 2*C*delta must be < 1");
  return ParamBox{delta, lower_flip, upper_flip};
}

std::uint32_t LeafPattern::packed() const {
  std::uint32_t bits = 0;
  for (int i = 0; i < size(); ++i)
    if (spins[i] > 0) bits |= (1u << i);
  return bits;
}

LeafPattern LeafPattern::unpack(std::uint32_t bits, int n_leaves) {
  std::vector<std::int8_t> s(n_leaves);
  for (int i = 0; i < n_leaves; ++i) s[i] = (bits >> i) & 1u ? 1 : -1;
  return LeafPattern(std::move(s));
}

LeafPattern LeafPattern::negated() const {
  LeafPattern out = *this;
  for (auto& s : out.spins) s = -s;
  return out;
}

std::string LeafPattern::to_string() const {
  std::string s(spins.size(), '+');
  for (int i = 0; i < size(); ++i)
    if (spins[i] < 0) s[i] = '-';
  return s;
}

LeafPattern LeafPattern::from_string(std::string_view s) {
  std::vector<std::int8_t> spins(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+')
      spins[i] = 1;
    else if (s[i] == '-')
      spins[i] = -1;
    else
      throw std::invalid_argument("pattern: expected only '+' and '-'");
  }
  return LeafPattern(std::move(spins));
}

std::uint64_t SampleSet::total() const {
  std::uint64_t m = 0;
  for (auto c : counts) m += c;
  return m;
}

SampleSet make_sample_set(const std::vector<std::pair<LeafPattern, std::uint64_t>>& entries) {
  SampleSet out;
  for (const auto& [p, c] : entries) {
    if (c == 0) throw std::invalid_argument("sample set: zero count");
    for (const auto& q : out.patterns)
      if (q == p) throw std::invalid_argument("sample set: duplicate pattern");
    out.patterns.push_back(p);
    out.counts.push_back(c);
  }
  return out;
}

SampleSet sample_spins(const Tree& tree, const EdgeVector& theta, std::uint64_t seed,
                       std::uint64_t m) {
  if (m < 1) throw std::invalid_argument("sample_spins: m must be >= 1");
  if (theta.size() != tree.edge_count())
    throw std::invalid_argument("sample_spins: theta length != edge count");
  for (double v : theta.values)
    if (!(v >= -1.0 && v <= 1.0))
      throw std::invalid_argument("sample_spins: theta entries must lie in [-1,1]");

  // propagation order: BFS edges from the fixed root
  NodeId root = tree.simulation_root();
  std::vector<std::pair<NodeId, NodeId>> order;  // (parent, child)
  order.reserve(tree.edge_count());
  std::vector<char> seen(tree.node_count(), 0);
  std::vector<NodeId> stack{root};
  seen[root] = 1;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (NodeId w : tree.neighbors(u))
      if (!seen[w]) {
        seen[w] = 1;
        order.emplace_back(u, w);
        stack.push_back(w);
      }
  }

  std::vector<double> flip_p(tree.edge_count());
  for (EdgeId e = 0; e < tree.edge_count(); ++e) flip_p[e] = (1.0 - theta[e]) / 2.0;

  std::map<std::uint32_t, std::uint64_t> hist;
  std::vector<std::int8_t> spin(tree.node_count());
  for (std::uint64_t j = 0; j < m; ++j) {
    Rng rng = Rng::keyed(seed, j);
    spin[root] = static_cast<std::int8_t>(rng.next_sign());
    for (const auto& [parent, child] : order) {
      EdgeId e = tree.edge_between(parent, child);
      spin[child] = rng.bernoulli(flip_p[e]) ? static_cast<std::int8_t>(-spin[parent])
                                             : spin[parent];
    }
    std::uint32_t bits = 0;
    for (int i = 0; i < tree.leaf_count(); ++i)
      if (spin[tree.leaves()[i]] > 0) bits |= (1u << i);
    ++hist[bits];
  }

  SampleSet out;
  out.patterns.reserve(hist.size());
  out.counts.reserve(hist.size());
  for (const auto& [bits, count] : hist) {
    out.patterns.push_back(LeafPattern::unpack(bits, tree.leaf_count()));
    out.counts.push_back(count);
  }
  return out;
}

PatternDistribution exact_leaf_distribution(const Tree& tree, const EdgeVector& theta) {
  if (tree.leaf_count() > 14)
    throw std::invalid_argument("exact_leaf_distribution: more than 14 leaves");
  if (theta.size() != tree.edge_count())
    throw std::invalid_argument("exact_leaf_distribution: theta length != edge count");

  const int n = tree.node_count();
  const int nl = tree.leaf_count();
  PatternDistribution out;
  out.leaf_count = nl;
  out.prob.assign(std::size_t(1) << nl, 0.0);

  const auto& edges = tree.edges();
  std::vector<std::int8_t> spin(n);
  const std::uint64_t total = std::uint64_t(1) << n;
  for (std::uint64_t assign = 0; assign < total; ++assign) {
    for (int v = 0; v < n; ++v) spin[v] = (assign >> v) & 1u ? 1 : -1;
    double p = 0.5;
    for (EdgeId e = 0; e < tree.edge_count(); ++e)
      p *= (1.0 + theta[e] * spin[edges[e].first] * spin[edges[e].second]) / 2.0;
    std::uint32_t bits = 0;
    for (int i = 0; i < nl; ++i)
      if (spin[tree.leaves()[i]] > 0) bits |= (1u << i);
    out.prob[bits] += p;
  }
  return out;
}

void save_samples_csv(const SampleSet& samples, const std::string& path,
                      const std::vector<std::string>& preamble) {
  CsvBuilder csv;
  for (const auto& line : preamble) csv.comment(line);
  csv.header({"pattern", "count"});
  for (int i = 0; i < samples.distinct(); ++i) {
    csv.begin_row();
    csv.cell(samples.patterns[i].to_string());
    csv.cell(samples.counts[i]);
    csv.end_row();
  }
  csv.write(path);
}

SampleSet load_samples_csv(const std::string& path, const Tree& tree) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("samples: cannot open " + path);
  std::string line;
  bool saw_header = false;
  SampleSet out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "pattern,count")
        throw std::invalid_argument("samples: expected header 'pattern,count'");
      saw_header = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("samples: malformed row");
    LeafPattern p = LeafPattern::from_string(line.substr(0, comma));
    if (p.size() != tree.leaf_count())
      throw std::invalid_argument("samples: pattern length != leaf count");
    std::uint64_t count = std::stoull(line.substr(comma + 1));
    if (count == 0) throw std::invalid_argument("samples: zero count");
    out.patterns.push_back(std::move(p));
    out.counts.push_back(count);
  }
  if (!saw_header) throw std::invalid_argument("samples: empty file");
  return out;
}

}  // namespace cfn
