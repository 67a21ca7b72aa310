#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cfn/matrix.hpp"
#include "cfn/model.hpp"
#include "cfn/tree.hpp"

namespace cfn {

// (lambda_min, lambda_max) of a symmetric matrix via cyclic Jacobi sweeps.
// Deterministic; tol is the absolute off-diagonal convergence threshold.
std::pair<double, double> extreme_eigenvalues(const SymmetricMatrix& m, double tol = 1e-12);

// max(|lambda_min|, |lambda_max|); exact spectral norm for symmetric input.
double spectral_norm(const SymmetricMatrix& m);

// Hessian of the one-sample population log-likelihood at theta_hat, the exact
// mixture over the leaf-pattern distribution under theta_star (<= 14 leaves).
SymmetricMatrix population_hessian(const Tree& tree, const EdgeVector& theta_star,
                                   const EdgeVector& theta_hat);

// Monte Carlo estimate from m sampled patterns.
SymmetricMatrix population_hessian_mc(const Tree& tree, const EdgeVector& theta_star,
                                      const EdgeVector& theta_hat, std::uint64_t m,
                                      std::uint64_t seed);

struct BoxScanOptions {
  int grid_points_per_edge = 3;
  int random_interior_points = 64;  // only used by the sliced scan
  bool axis_slices_only = false;    // drop the random interior points
  std::uint64_t seed = 0;
  long max_tensor_points = 1000000;  // budget gate for the full tensor grid
};

// Hessian extreme eigenvalues over scanned points of the box. Full tensor grid
// for |E| <= 6 (within budget); otherwise axis-aligned slices through the box
// center plus seeded random interior points, flagged via exhaustive_grid.
// Aggregates are extremes over the scanned points only.
struct LandscapeReport {
  std::vector<std::vector<double>> points;  // theta per scanned point
  std::vector<double> lambda_min;
  std::vector<double> lambda_max;
  double inf_lambda_min = 0;
  double sup_lambda_max = 0;
  bool exhaustive_grid = false;
  std::string mode;  // "population-exact" or "empirical(m)"
  double delta = 0;
};

LandscapeReport box_scan_population(const Tree& tree, const EdgeVector& theta_star,
                                    const ParamBox& box, const BoxScanOptions& opts = {});
LandscapeReport box_scan_empirical(const Tree& tree, const SampleSet& samples,
                                   const ParamBox& box, const BoxScanOptions& opts = {});

struct BernsteinParams {
  int p = 1;             // parameter dimension
  int d = 1;             // matrix dimension
  long n = 1;            // number of summands
  double R = 0;          // a.s. eigenvalue bound
  double L = 0;          // Lipschitz constant
  double sigma2 = 0;     // variance proxy
  double theta_diam = 0; // L2 diameter of the parameter space
  double t = 0;          // deviation level
};

// 2 d |Theta|^p (1 + 4nL/t)^p exp(-(t^2/8)/(sigma^2 + R t / 6)); raw value,
// not capped at 1.
double bernstein_bound(const BernsteinParams& params);

// |Theta|^p (1 + 2/eps)^p
double covering_number_bound(double theta_diam, int p, double eps);

// ceil((C/delta)^(diam+8) * log(1/eps)), floored at 1.
long sample_complexity(double delta, int diam, double eps, double C);

struct DeviationTrial {
  int trial = 0;
  double sup_deviation = 0;  // sup over scanned points of ||H_hat - H||_2
};

// Per trial: draw m samples at theta_star, scan the box, record the largest
// spectral-norm deviation of the empirical Hessian from the exact population
// Hessian over the scanned points.
std::vector<DeviationTrial> hessian_deviation_experiment(const Tree& tree,
                                                         const EdgeVector& theta_star,
                                                         const ParamBox& box, std::uint64_t m,
                                                         int trials, std::uint64_t seed,
                                                         const BoxScanOptions& opts = {});

}  // namespace cfn
