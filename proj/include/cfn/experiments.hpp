#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cfn/model.hpp"
#include "cfn/optimizer.hpp"
#include "cfn/tree.hpp"

namespace cfn {

enum class ThetaStarMode { kBoxCenter, kExplicit, kRandomInBox };

struct ExperimentConfig {
  std::string experiment;  // error-scaling | convergence | landscape | steel-demo | bernstein

  // tree source: either a newick file or a builder
  std::string newick_path;
  std::string builder;  // "balanced" | "caterpillar"
  int builder_size = 0;

  double delta = 0.05;
  // Flip-probability coefficients: truth box uses (c, C), estimation box
  // (c_bar, C_bar). Must satisfy c_bar < c < C < C_bar and C_bar >= 2 c_bar.
  double c_bar = 0.9, c = 1.0, C = 2.0, C_bar = 2.2;

  ThetaStarMode theta_star_mode = ThetaStarMode::kBoxCenter;
  std::vector<double> theta_star_values;  // explicit mode

  std::vector<std::uint64_t> m_values;
  int trials = 1;
  std::uint64_t seed = 0;

  OptConfig optimizer;
  bool clamp_to_box = false;        // clamp 1D searches to the estimation box
  double init_radius_factor = 0.5;  // theta0 = theta* + perturbation of L2 radius factor*delta

  std::string out_dir = ".";

  // landscape / bernstein
  int grid_points = 3;
  int random_points = 64;
  double complexity_eps = 0.05;     // failure probability fed to the m formula
  std::vector<double> deviation_t;  // deviation levels tabulated by run_bernstein

  // steel-demo
  int inits_per_pair = 32;
  std::array<int, 2> slice_edges{0, 2};
  int slice_grid = 41;

  ParamBox truth_box() const;
  ParamBox estimation_box() const;
};

// Strict JSON loader: unknown keys are rejected (config_error).
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

Tree config_tree(const ExperimentConfig& cfg);
EdgeVector config_theta_star(const ExperimentConfig& cfg, const Tree& tree);

struct CsvReport {
  std::string path;
  std::string content;
  std::vector<std::string> extra_paths;  // companion files (e.g. likelihood slice)
};

struct ErrorScalingSummary {
  std::vector<double> median_error;  // per m
  double slope = 0;                  // log-log fit of median error vs m
  int nonconverged = 0;
};

CsvReport run_error_scaling(const ExperimentConfig& cfg, ErrorScalingSummary* summary = nullptr);

struct ConvergenceSummary {
  double fitted_rate = 0;      // geometric per-sweep factor from the log-gap fit (median)
  double r_squared = 0;        // of the log-gap linear fit (median)
  double reference_rate = 0;   // 1 - rho_hat / L_hat from the trajectory box scan (median)
  bool gaps_nonincreasing = true;
  std::vector<double> trial_rate;
  std::vector<double> trial_r_squared;
  std::vector<double> trial_reference_rate;
};

CsvReport run_convergence(const ExperimentConfig& cfg, ConvergenceSummary* summary = nullptr);

struct LandscapeSummary {
  double sup_lambda_max = 0;
  double inf_lambda_min = 0;
  long theoretical_m = 0;  // sample-complexity formula value for the config
};

CsvReport run_landscape(const ExperimentConfig& cfg, LandscapeSummary* summary = nullptr);

struct SteelWitness {
  std::string pattern_a, pattern_b;
  std::vector<double> init_a, init_b;
  std::vector<double> theta_a, theta_b;
  double objective_a = 0, objective_b = 0;
  double linf_separation = 0;
  bool gauge_inequivalent = false;
};

struct SteelSummary {
  std::vector<SteelWitness> witnesses;
};

CsvReport run_steel_demo(const ExperimentConfig& cfg, SteelSummary* summary = nullptr);

struct BernsteinSummary {
  std::vector<double> sup_deviation;  // per trial
};

CsvReport run_bernstein(const ExperimentConfig& cfg, BernsteinSummary* summary = nullptr);

// Seed derivation shared by the runners so trials are independent and
// reorderable: stream = (purpose, m index), substream = trial.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t m_index,
                         std::uint64_t trial);

// theta* plus a seeded uniform direction of L2 length radius, kept inside the
// open estimation box by coordinate-wise clipping.
EdgeVector perturbed_init(const EdgeVector& theta_star, double radius, const ParamBox& box,
                          std::uint64_t seed);

double median(std::vector<double> v);

// Least-squares slope and R^2 of y against x.
struct LineFit {
  double slope = 0, intercept = 0, r_squared = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cfn
