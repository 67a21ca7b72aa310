#include "cfn/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cfn/errors.hpp"
#include "cfn/likelihood.hpp"
#include "cfn/rng.hpp"

namespace cfn {

namespace {

// Cyclic Jacobi diagonalization; plenty for the small dense matrices here.
std::vector<double> jacobi_eigenvalues(const SymmetricMatrix& m, double tol) {
  const int n = m.dim();
  if (n == 0) throw std::invalid_argument("eigenvalues: empty matrix");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-12)
        throw std::invalid_argument("eigenvalues: matrix not symmetric");

  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = m(i, j);
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (std::sqrt(2.0 * off) <= tol) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = at(p, q);
        if (apq == 0.0) continue;
        double phi = (at(q, q) - at(p, p)) / (2.0 * apq);
        double t = (phi >= 0 ? 1.0 : -1.0) / (std::abs(phi) + std::sqrt(phi * phi + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double app = at(p, p), aqq = at(q, q);
        at(p, p) = app - t * apq;
        at(q, q) = aqq + t * apq;
        at(p, q) = 0.0;
        at(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(p, k) = at(k, p);
          at(k, q) = s * akp + c * akq;
          at(q, k) = at(k, q);
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

std::vector<std::vector<double>> scan_points(int n_edges, const ParamBox& box,
                                             const BoxScanOptions& opts, bool* exhaustive) {
  if (opts.grid_points_per_edge < 2)
    throw std::invalid_argument("box scan: need at least 2 grid points per edge");
  const double lo = box.theta_lo(), hi = box.theta_hi();
  const int g = opts.grid_points_per_edge;
  std::vector<double> grid(g);
  for (int i = 0; i < g; ++i) grid[i] = lo + (hi - lo) * i / (g - 1);

  std::vector<std::vector<double>> points;
  if (n_edges <= 6) {
    double count = std::pow(static_cast<double>(g), n_edges);
    if (count > static_cast<double>(opts.max_tensor_points))
      throw std::invalid_argument("box scan: tensor grid exceeds the point budget");
    std::vector<int> idx(n_edges, 0);
    while (true) {
      std::vector<double> p(n_edges);
      for (int e = 0; e < n_edges; ++e) p[e] = grid[idx[e]];
      points.push_back(std::move(p));
      int e = n_edges - 1;
      while (e >= 0 && ++idx[e] == g) idx[e--] = 0;
      if (e < 0) break;
    }
    *exhaustive = true;
    return points;
  }
  // axis-aligned slices through the center, plus random interior points
  std::vector<double> center(n_edges, box.center());
  for (int e = 0; e < n_edges; ++e) {
    for (int i = 0; i < g; ++i) {
      auto p = center;
      p[e] = grid[i];
      points.push_back(std::move(p));
    }
  }
  if (!opts.axis_slices_only) {
    Rng rng = Rng::keyed(opts.seed, 0x5ca9);
    for (int r = 0; r < opts.random_interior_points; ++r) {
      std::vector<double> p(n_edges);
      for (int e = 0; e < n_edges; ++e) p[e] = rng.uniform(lo, hi);
      points.push_back(std::move(p));
    }
  }
  *exhaustive = false;
  return points;
}

std::pair<std::vector<LeafPattern>, std::vector<double>> pattern_mixture(
    const Tree& tree, const EdgeVector& theta_star) {
  auto dist = exact_leaf_distribution(tree, theta_star);
  std::vector<LeafPattern> patterns;
  std::vector<double> weights;
  patterns.reserve(dist.prob.size());
  weights.reserve(dist.prob.size());
  for (std::uint32_t bits = 0; bits < dist.prob.size(); ++bits) {
    if (dist.prob[bits] <= 0.0) continue;
    patterns.push_back(LeafPattern::unpack(bits, tree.leaf_count()));
    weights.push_back(dist.prob[bits]);
  }
  return {std::move(patterns), std::move(weights)};
}

LandscapeReport scan_impl(const Tree& tree, const ParamBox& box, const BoxScanOptions& opts,
                          const std::vector<LeafPattern>& patterns,
                          const std::vector<double>& weights, std::string mode) {
  LandscapeReport report;
  report.mode = std::move(mode);
  report.delta = box.delta;
  report.points = scan_points(tree.edge_count(), box, opts, &report.exhaustive_grid);
  report.lambda_min.reserve(report.points.size());
  report.lambda_max.reserve(report.points.size());
  report.inf_lambda_min = std::numeric_limits<double>::infinity();
  report.sup_lambda_max = -std::numeric_limits<double>::infinity();
  for (const auto& p : report.points) {
    SymmetricMatrix h = average_hessian(tree, EdgeVector(p), patterns, weights);
    auto [lmin, lmax] = extreme_eigenvalues(h);
    report.lambda_min.push_back(lmin);
    report.lambda_max.push_back(lmax);
    report.inf_lambda_min = std::min(report.inf_lambda_min, lmin);
    report.sup_lambda_max = std::max(report.sup_lambda_max, lmax);
  }
  return report;
}

}  // namespace

std::pair<double, double> extreme_eigenvalues(const SymmetricMatrix& m, double tol) {
  auto eig = jacobi_eigenvalues(m, tol);
  return {eig.front(), eig.back()};
}

double spectral_norm(const SymmetricMatrix& m) {
  auto [lmin, lmax] = extreme_eigenvalues(m);
  return std::max(std::abs(lmin), std::abs(lmax));
}

SymmetricMatrix population_hessian(const Tree& tree, const EdgeVector& theta_star,
                                   const EdgeVector& theta_hat) {
  auto [patterns, weights] = pattern_mixture(tree, theta_star);
  return average_hessian(tree, theta_hat, patterns, weights);
}

SymmetricMatrix population_hessian_mc(const Tree& tree, const EdgeVector& theta_star,
                                      const EdgeVector& theta_hat, std::uint64_t m,
                                      std::uint64_t seed) {
  return hessian(tree, theta_hat, sample_spins(tree, theta_star, seed, m));
}

LandscapeReport box_scan_population(const Tree& tree, const EdgeVector& theta_star,
                                    const ParamBox& box, const BoxScanOptions& opts) {
  auto [patterns, weights] = pattern_mixture(tree, theta_star);
  return scan_impl(tree, box, opts, patterns, weights, "population-exact");
}

LandscapeReport box_scan_empirical(const Tree& tree, const SampleSet& samples,
                                   const ParamBox& box, const BoxScanOptions& opts) {
  if (samples.distinct() == 0) throw std::invalid_argument("box scan: empty sample set");
  std::vector<double> weights(samples.counts.begin(), samples.counts.end());
  return scan_impl(tree, box, opts, samples.patterns, weights,
                   "empirical(" + std::to_string(samples.total()) + ")");
}

double bernstein_bound(const BernsteinParams& params) {
  if (!(params.t > 0)) throw std::invalid_argument("bernstein: t must be > 0");
  if (params.p < 1 || params.d < 1 || params.n < 1 || params.R < 0 || params.L < 0 ||
      params.sigma2 < 0 || params.theta_diam < 0)
    throw std::invalid_argument("bernstein: invalid parameters");
  double cover = std::pow(params.theta_diam, params.p) *
                 std::pow(1.0 + 4.0 * static_cast<double>(params.n) * params.L / params.t,
                          params.p);
  double expo = -(params.t * params.t / 8.0) / (params.sigma2 + params.R * params.t / 6.0);
  return 2.0 * params.d * cover * std::exp(expo);
}

double covering_number_bound(double theta_diam, int p, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("covering number: eps must be > 0");
  if (p < 1 || theta_diam < 0) throw std::invalid_argument("covering number: invalid parameters");
  return std::pow(theta_diam, p) * std::pow(1.0 + 2.0 / eps, p);
}

long sample_complexity(double delta, int diam, double eps, double C) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("sample complexity: eps must lie in (0,1)");
  if (!(delta > 0) || !(C > 0) || diam < 1)
    throw std::invalid_argument("sample complexity: invalid parameters");
  double value = std::pow(C / delta, diam + 8) * std::log(1.0 / eps);
  if (!std::isfinite(value) || value >= static_cast<double>(std::numeric_limits<long>::max()))
    return std::numeric_limits<long>::max();
  long m = static_cast<long>(std::ceil(value));
  return std::max(m, 1L);
}

std::vector<DeviationTrial> hessian_deviation_experiment(const Tree& tree,
                                                         const EdgeVector& theta_star,
                                                         const ParamBox& box, std::uint64_t m,
                                                         int trials, std::uint64_t seed,
                                                         const BoxScanOptions& opts) {
  if (trials < 1) throw std::invalid_argument("deviation experiment: trials must be >= 1");
  bool exhaustive = false;
  auto points = scan_points(tree.edge_count(), box, opts, &exhaustive);
  auto [patterns, weights] = pattern_mixture(tree, theta_star);
  std::vector<SymmetricMatrix> exact;
  exact.reserve(points.size());
  for (const auto& p : points)
    exact.push_back(average_hessian(tree, EdgeVector(p), patterns, weights));

  std::vector<DeviationTrial> out;
  out.reserve(trials);
  for (int trial = 0; trial < trials; ++trial) {
    std::uint64_t trial_seed = Rng::keyed(seed, 0xde71, trial).next_u64();
    SampleSet samples = sample_spins(tree, theta_star, trial_seed, m);
    double sup = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      SymmetricMatrix emp = hessian(tree, EdgeVector(points[i]), samples);
      sup = std::max(sup, spectral_norm(emp.minus(exact[i])));
    }
    out.push_back({trial, sup});
  }
  return out;
}

}  // namespace cfn
