#include "cfn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cfn/csv.hpp"
#include "cfn/errors.hpp"
#include "cfn/landscape.hpp"
#include "cfn/likelihood.hpp"
#include "cfn/rng.hpp"
#include "cfn/version.hpp"

namespace cfn {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPurposeSampling = 1;
constexpr std::uint64_t kPurposeInit = 2;
constexpr std::uint64_t kPurposeThetaStar = 3;
constexpr std::uint64_t kPurposeSteel = 4;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw config_error("config: unknown key '" + it.key() + "' in " + where);
}

const std::set<std::string> kTopKeys = {
    "experiment", "tree",        "delta",          "box",         "theta_star",
    "m",          "trials",      "seed",           "optimizer",   "clamp_to_box",
    "init_radius_factor",        "out_dir",        "grid_points", "random_points",
    "complexity_eps", "deviation_t", "inits_per_pair", "slice_edges", "slice_grid"};

const std::set<std::string> kKnownExperiments = {"error-scaling", "convergence", "landscape",
                                                 "steel-demo", "bernstein"};

}  // namespace

ParamBox ExperimentConfig::truth_box() const { return make_param_box(delta, c, C); }
ParamBox ExperimentConfig::estimation_box() const { return make_param_box(delta, c_bar, C_bar); }

ExperimentConfig config_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw config_error("config: top level must be an object");
  reject_unknown_keys(root, kTopKeys, "top level");

  ExperimentConfig cfg;
  try {
    cfg.experiment = root.at("experiment").get<std::string>();
    if (!kKnownExperiments.count(cfg.experiment))
      throw config_error("config: unknown experiment '" + cfg.experiment + "'");

    const json& tree = root.at("tree");
    reject_unknown_keys(tree, {"newick_path", "builder", "size"}, "tree");
    if (tree.contains("newick_path")) {
      cfg.newick_path = tree.at("newick_path").get<std::string>();
      if (tree.contains("builder")) throw config_error("config: tree has both source kinds");
    } else {
      cfg.builder = tree.at("builder").get<std::string>();
      cfg.builder_size = tree.at("size").get<int>();
      if (cfg.builder != "balanced" && cfg.builder != "caterpillar")
        throw config_error("config: builder must be 'balanced' or 'caterpillar'");
    }

    if (root.contains("delta")) cfg.delta = root.at("delta").get<double>();
    if (root.contains("box")) {
      const json& box = root.at("box");
      reject_unknown_keys(box, {"c_bar", "c", "C", "C_bar"}, "box");
      if (box.contains("c_bar")) cfg.c_bar = box.at("c_bar").get<double>();
      if (box.contains("c")) cfg.c = box.at("c").get<double>();
      if (box.contains("C")) cfg.C = box.at("C").get<double>();
      if (box.contains("C_bar")) cfg.C_bar = box.at("C_bar").get<double>();
    }

    if (root.contains("theta_star")) {
      const json& ts = root.at("theta_star");
      if (ts.is_string()) {
        std::string mode = ts.get<std::string>();
        if (mode == "box_center")
          cfg.theta_star_mode = ThetaStarMode::kBoxCenter;
        else if (mode == "random_in_box")
          cfg.theta_star_mode = ThetaStarMode::kRandomInBox;
        else
          throw config_error("config: theta_star must be 'box_center', 'random_in_box' or a list");
      } else if (ts.is_array()) {
        cfg.theta_star_mode = ThetaStarMode::kExplicit;
        cfg.theta_star_values = ts.get<std::vector<double>>();
      } else {
        throw config_error("config: bad theta_star");
      }
    }

    if (root.contains("m")) {
      const json& m = root.at("m");
      if (m.is_array())
        cfg.m_values = m.get<std::vector<std::uint64_t>>();
      else
        cfg.m_values = {m.get<std::uint64_t>()};
    }
    if (root.contains("trials")) cfg.trials = root.at("trials").get<int>();
    if (root.contains("seed")) cfg.seed = root.at("seed").get<std::uint64_t>();

    if (root.contains("optimizer")) {
      const json& opt = root.at("optimizer");
      reject_unknown_keys(opt, {"sweep_tolerance", "solver_tolerance", "max_sweeps", "edge_order"},
                          "optimizer");
      if (opt.contains("sweep_tolerance"))
        cfg.optimizer.sweep_tolerance = opt.at("sweep_tolerance").get<double>();
      if (opt.contains("solver_tolerance"))
        cfg.optimizer.solver_tolerance = opt.at("solver_tolerance").get<double>();
      if (opt.contains("max_sweeps")) cfg.optimizer.max_sweeps = opt.at("max_sweeps").get<int>();
      if (opt.contains("edge_order"))
        cfg.optimizer.edge_order = opt.at("edge_order").get<std::vector<EdgeId>>();
    }
    if (root.contains("clamp_to_box")) cfg.clamp_to_box = root.at("clamp_to_box").get<bool>();
    if (root.contains("init_radius_factor"))
      cfg.init_radius_factor = root.at("init_radius_factor").get<double>();
    if (root.contains("out_dir")) cfg.out_dir = root.at("out_dir").get<std::string>();
    if (root.contains("grid_points")) cfg.grid_points = root.at("grid_points").get<int>();
    if (root.contains("random_points")) cfg.random_points = root.at("random_points").get<int>();
    if (root.contains("complexity_eps"))
      cfg.complexity_eps = root.at("complexity_eps").get<double>();
    if (root.contains("deviation_t"))
      cfg.deviation_t = root.at("deviation_t").get<std::vector<double>>();
    if (root.contains("inits_per_pair"))
      cfg.inits_per_pair = root.at("inits_per_pair").get<int>();
    if (root.contains("slice_edges")) {
      auto v = root.at("slice_edges").get<std::vector<int>>();
      if (v.size() != 2) throw config_error("config: slice_edges needs exactly 2 entries");
      cfg.slice_edges = {v[0], v[1]};
    }
    if (root.contains("slice_grid")) cfg.slice_grid = root.at("slice_grid").get<int>();
  } catch (const json::exception& e) {
    throw config_error(std::string("config: ") + e.what());
  }

  // Parameter-regime ordering for the nested boxes
  if (!(cfg.c_bar > 0 && cfg.c_bar < cfg.c && cfg.c < cfg.C && cfg.C < cfg.C_bar))
    throw config_error("config: box constants must satisfy c_bar < c < C < C_bar, all > 0");
  if (!(cfg.C_bar >= 2.0 * cfg.c_bar))
    throw config_error("config: box constants must satisfy C_bar >= 2*c_bar");
  if (!(cfg.delta > 0) || !(2.0 * cfg.C_bar * cfg.delta < 1.0))
    throw config_error("config: delta out of range for the box constants");
  for (auto m : cfg.m_values)
    if (m < 1) throw config_error("config: m entries must be >= 1");
  if (cfg.trials < 1) throw config_error("config: trials must be >= 1");
  if (cfg.init_radius_factor < 0) throw config_error("config: init_radius_factor must be >= 0");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

Tree config_tree(const ExperimentConfig& cfg) {
  if (!cfg.newick_path.empty()) {
    std::ifstream in(cfg.newick_path);
    if (!in) throw config_error("config: cannot open tree file " + cfg.newick_path);
    std::stringstream buf;
    buf << in.rdbuf();
    return Tree::parse_newick(buf.str());
  }
  if (cfg.builder == "balanced") return Tree::balanced(cfg.builder_size);
  return Tree::caterpillar(cfg.builder_size);
}

EdgeVector config_theta_star(const ExperimentConfig& cfg, const Tree& tree) {
  ParamBox truth = cfg.truth_box();
  switch (cfg.theta_star_mode) {
    case ThetaStarMode::kBoxCenter:
      return EdgeVector::constant(tree, truth.center());
    case ThetaStarMode::kExplicit: {
      if (static_cast<int>(cfg.theta_star_values.size()) != tree.edge_count())
        throw config_error("config: explicit theta_star length != edge count");
      return EdgeVector(cfg.theta_star_values);
    }
    case ThetaStarMode::kRandomInBox: {
      Rng rng = Rng::keyed(cfg.seed, kPurposeThetaStar);
      EdgeVector theta = EdgeVector::constant(tree, 0.0);
      for (int e = 0; e < tree.edge_count(); ++e)
        theta[e] = rng.uniform(truth.theta_lo(), truth.theta_hi());
      return theta;
    }
  }
  throw config_error("config: bad theta_star mode");
}

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t m_index,
                         std::uint64_t trial) {
  return Rng::keyed(master, (purpose << 32) | m_index, trial).next_u64();
}

EdgeVector perturbed_init(const EdgeVector& theta_star, double radius, const ParamBox& box,
                          std::uint64_t seed) {
  Rng rng(seed);
  const int n = theta_star.size();
  std::vector<double> dir(n);
  double norm2 = 0.0;
  // rejection-free spherical direction via normalized uniform cube draws,
  // redrawn if degenerate
  do {
    norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
      dir[i] = rng.uniform(-1.0, 1.0);
      norm2 += dir[i] * dir[i];
    }
  } while (norm2 < 1e-12);
  double scale = radius * rng.next_double() / std::sqrt(norm2);
  EdgeVector out = theta_star;
  const double lo = box.theta_lo(), hi = box.theta_hi();
  const double margin = 1e-9 * (hi - lo);
  for (int i = 0; i < n; ++i)
    out[i] = std::clamp(out[i] + scale * dir[i], lo + margin, hi - margin);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit out;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  double den = n * sxx - sx * sx;
  if (den == 0) return out;
  out.slope = (n * sxy - sx * sy) / den;
  out.intercept = (sy - out.slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (out.intercept + out.slope * x[i]);
    ss_res += r * r;
  }
  out.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return out;
}

namespace {

std::string tree_description(const ExperimentConfig& cfg, const Tree& tree) {
  std::string src = cfg.newick_path.empty()
                        ? cfg.builder + "(" + std::to_string(cfg.builder_size) + ")"
                        : cfg.newick_path;
  return src + " leaves=" + std::to_string(tree.leaf_count()) +
         " edges=" + std::to_string(tree.edge_count());
}

json config_as_json(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  if (!cfg.newick_path.empty())
    j["tree"] = {{"newick_path", cfg.newick_path}};
  else
    j["tree"] = {{"builder", cfg.builder}, {"size", cfg.builder_size}};
  j["delta"] = cfg.delta;
  j["box"] = {{"c_bar", cfg.c_bar}, {"c", cfg.c}, {"C", cfg.C}, {"C_bar", cfg.C_bar}};
  switch (cfg.theta_star_mode) {
    case ThetaStarMode::kBoxCenter: j["theta_star"] = "box_center"; break;
    case ThetaStarMode::kRandomInBox: j["theta_star"] = "random_in_box"; break;
    case ThetaStarMode::kExplicit: j["theta_star"] = cfg.theta_star_values; break;
  }
  j["m"] = cfg.m_values;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["optimizer"] = {{"sweep_tolerance", cfg.optimizer.sweep_tolerance},
                    {"solver_tolerance", cfg.optimizer.solver_tolerance},
                    {"max_sweeps", cfg.optimizer.max_sweeps}};
  j["clamp_to_box"] = cfg.clamp_to_box;
  j["init_radius_factor"] = cfg.init_radius_factor;
  j["grid_points"] = cfg.grid_points;
  j["random_points"] = cfg.random_points;
  return j;
}

void standard_preamble(CsvBuilder& csv, const ExperimentConfig& cfg, const Tree& tree) {
  std::string canonical = config_as_json(cfg).dump();
  char hash[20];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  csv.comment("experiment " + cfg.experiment);
  csv.comment("config_hash " + std::string(hash));
  csv.comment("seed " + std::to_string(cfg.seed));
  csv.comment("tree " + tree_description(cfg, tree));
  csv.comment("delta " + format_double(cfg.delta));
  csv.comment("box_constants c_bar=" + format_double(cfg.c_bar) + " c=" + format_double(cfg.c) +
              " C=" + format_double(cfg.C) + " C_bar=" + format_double(cfg.C_bar));
  csv.comment(std::string("versions tree_core=") + kVersion + " cfn_model=" + kVersion +
              " likelihood_engine=" + kVersion + " optimizer=" + kVersion +
              " landscape_probe=" + kVersion + " experiment_cli=" + kVersion);
}

std::string output_path(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out_dir);
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

OptConfig optimizer_config(const ExperimentConfig& cfg) {
  OptConfig opt = cfg.optimizer;
  if (cfg.clamp_to_box) opt.clamp_box = cfg.estimation_box();
  return opt;
}

double l2_distance(const EdgeVector& a, const EdgeVector& b) {
  double s = 0;
  for (int i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

CsvReport run_error_scaling(const ExperimentConfig& cfg, ErrorScalingSummary* summary) {
  if (cfg.m_values.size() < 3)
    throw config_error("error-scaling: need at least 3 m values");
  {
    auto [lo, hi] = std::minmax_element(cfg.m_values.begin(), cfg.m_values.end());
    if (static_cast<double>(*hi) < 100.0 * static_cast<double>(*lo))
      throw config_error("error-scaling: m values must span at least 2 decades");
  }
  Tree tree = config_tree(cfg);
  EdgeVector theta_star = config_theta_star(cfg, tree);
  ParamBox est_box = cfg.estimation_box();
  OptConfig opt = optimizer_config(cfg);

  CsvBuilder csv;
  standard_preamble(csv, cfg, tree);
  csv.header({"m", "trial", "error", "converged"});

  std::vector<double> log_m, log_median;
  int nonconverged = 0;
  std::vector<double> medians;
  for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
    std::uint64_t m = cfg.m_values[mi];
    std::vector<double> errors;
    for (int trial = 0; trial < cfg.trials; ++trial) {
      SampleSet samples = sample_spins(
          tree, theta_star, trial_seed(cfg.seed, kPurposeSampling, mi, trial), m);
      EdgeVector init = perturbed_init(theta_star, cfg.init_radius_factor * cfg.delta, est_box,
                                       trial_seed(cfg.seed, kPurposeInit, mi, trial));
      OptTrace trace = fit(tree, init, samples, opt);
      bool converged = trace.termination == Termination::kConverged;
      double error = l2_distance(trace.final_theta(), theta_star);
      if (converged)
        errors.push_back(error);
      else
        ++nonconverged;
      csv.begin_row();
      csv.cell(static_cast<std::uint64_t>(m));
      csv.cell(trial);
      csv.cell(error);
      csv.cell(converged ? 1 : 0);
      csv.end_row();
    }
    double med = median(errors);
    medians.push_back(med);
    if (med > 0) {
      log_m.push_back(std::log(static_cast<double>(m)));
      log_median.push_back(std::log(med));
    }
  }
  LineFit line = fit_line(log_m, log_median);
  for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
    // bound-shaped normalization: error / (sqrt(|E|/m) * log(|E|/eps)), eps = 0.05
    double shape = std::sqrt(static_cast<double>(tree.edge_count()) /
                             static_cast<double>(cfg.m_values[mi])) *
                   std::log(tree.edge_count() / 0.05);
    csv.comment("median m=" + std::to_string(cfg.m_values[mi]) + " " +
                format_double(medians[mi]) + " normalized " + format_double(medians[mi] / shape));
  }
  csv.comment("loglog_slope " + format_double(line.slope));
  csv.comment("nonconverged " + std::to_string(nonconverged));

  if (summary) {
    summary->median_error = medians;
    summary->slope = line.slope;
    summary->nonconverged = nonconverged;
  }
  CsvReport report;
  report.content = csv.str();
  report.path = output_path(cfg, "error_scaling.csv");
  csv.write(report.path);
  return report;
}

CsvReport run_convergence(const ExperimentConfig& cfg, ConvergenceSummary* summary) {
  if (cfg.m_values.size() != 1) throw config_error("convergence: need exactly one m value");
  Tree tree = config_tree(cfg);
  EdgeVector theta_star = config_theta_star(cfg, tree);
  ParamBox est_box = cfg.estimation_box();
  OptConfig opt = optimizer_config(cfg);

  CsvBuilder csv;
  standard_preamble(csv, cfg, tree);
  csv.header({"trial", "sweep", "objective_gap", "param_dist"});

  std::vector<double> rates, r2s, ref_rates;
  bool all_nonincreasing = true;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    SampleSet samples = sample_spins(
        tree, theta_star, trial_seed(cfg.seed, kPurposeSampling, 0, trial), cfg.m_values[0]);
    EdgeVector init = perturbed_init(theta_star, cfg.init_radius_factor * cfg.delta, est_box,
                                     trial_seed(cfg.seed, kPurposeInit, 0, trial));
    // reference optimum from a long, tight run
    OptConfig long_opt = opt;
    long_opt.max_sweeps = std::max(opt.max_sweeps, 2000);
    long_opt.sweep_tolerance = std::min(opt.sweep_tolerance, 1e-13);
    OptTrace ref = fit(tree, init, samples, long_opt);
    double ell_star = ref.final_objective();

    OptTrace trace = fit(tree, init, samples, opt);
    std::vector<double> sweeps_axis, log_gaps;
    for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
      double gap = ell_star - trace.objectives[k];
      double dist = l2_distance(trace.iterates[k], ref.final_theta());
      csv.begin_row();
      csv.cell(trial);
      csv.cell(static_cast<int>(k));
      csv.cell(gap);
      csv.cell(dist);
      csv.end_row();
      if (k + 1 < trace.iterates.size() &&
          trace.objectives[k + 1] < trace.objectives[k] - 1e-12)
        all_nonincreasing = false;
      if (gap > 1e-14) {
        sweeps_axis.push_back(static_cast<double>(k));
        log_gaps.push_back(std::log(gap));
      }
    }
    LineFit line = fit_line(sweeps_axis, log_gaps);
    double fitted_rate = std::exp(line.slope);
    rates.push_back(fitted_rate);
    r2s.push_back(line.r_squared);

    // reference rate from the landscape over the trajectory's bounding box
    double lo = 1.0, hi = -1.0;
    for (const auto& it : trace.iterates)
      for (double v : it.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    double pad = 1e-6 + 0.01 * (hi - lo);
    ParamBox traj_box;
    traj_box.delta = cfg.delta;
    traj_box.lower_flip = (1.0 - std::min(hi + pad, 1.0 - 1e-9)) / (2.0 * cfg.delta);
    traj_box.upper_flip = (1.0 - std::max(lo - pad, -1.0 + 1e-9)) / (2.0 * cfg.delta);
    BoxScanOptions scan_opts;
    scan_opts.grid_points_per_edge = cfg.grid_points;
    scan_opts.random_interior_points = cfg.random_points;
    scan_opts.seed = cfg.seed;
    LandscapeReport scan = box_scan_empirical(tree, samples, traj_box, scan_opts);
    double rho_hat = -scan.sup_lambda_max;
    // blockwise smoothness: min over edges of the largest |diagonal| seen
    std::vector<double> diag_sup(tree.edge_count(), 0.0);
    for (const auto& point : scan.points) {
      SymmetricMatrix h = hessian(tree, EdgeVector(point), samples);
      for (int e = 0; e < tree.edge_count(); ++e)
        diag_sup[e] = std::max(diag_sup[e], std::abs(h(e, e)));
    }
    double l_hat = *std::min_element(diag_sup.begin(), diag_sup.end());
    double ref_rate = (l_hat > 0) ? 1.0 - rho_hat / l_hat : 1.0;
    ref_rates.push_back(ref_rate);
    csv.comment("trial " + std::to_string(trial) + " fitted_rate " + format_double(fitted_rate) +
                " r2 " + format_double(line.r_squared) + " reference_rate " +
                format_double(ref_rate));
  }

  if (summary) {
    summary->fitted_rate = median(rates);
    summary->r_squared = median(r2s);
    summary->reference_rate = median(ref_rates);
    summary->gaps_nonincreasing = all_nonincreasing;
    summary->trial_rate = rates;
    summary->trial_r_squared = r2s;
    summary->trial_reference_rate = ref_rates;
  }
  CsvReport report;
  report.content = csv.str();
  report.path = output_path(cfg, "convergence.csv");
  csv.write(report.path);
  return report;
}

CsvReport run_landscape(const ExperimentConfig& cfg, LandscapeSummary* summary) {
  Tree tree = config_tree(cfg);
  EdgeVector theta_star = config_theta_star(cfg, tree);
  ParamBox box = cfg.estimation_box();
  BoxScanOptions opts;
  opts.grid_points_per_edge = cfg.grid_points;
  opts.random_interior_points = cfg.random_points;
  opts.seed = cfg.seed;

  CsvBuilder csv;
  standard_preamble(csv, cfg, tree);
  std::vector<std::string> cols{"mode", "point_index"};
  for (int e = 0; e < tree.edge_count(); ++e) cols.push_back("theta_" + std::to_string(e));
  cols.push_back("lambda_min");
  cols.push_back("lambda_max");
  csv.header(cols);

  auto emit = [&](const LandscapeReport& rep) {
    for (std::size_t i = 0; i < rep.points.size(); ++i) {
      csv.begin_row();
      csv.cell(rep.mode);
      csv.cell(static_cast<int>(i));
      for (double v : rep.points[i]) csv.cell(v);
      csv.cell(rep.lambda_min[i]);
      csv.cell(rep.lambda_max[i]);
      csv.end_row();
    }
    // any finite scan only bounds the true box extremes
    csv.comment(rep.mode + " scanned_extremes (" +
                (rep.exhaustive_grid ? "tensor grid" : "center slices + random points") +
                ") inf_lambda_min " + format_double(rep.inf_lambda_min) + " sup_lambda_max " +
                format_double(rep.sup_lambda_max));
  };

  LandscapeSummary local;
  if (!cfg.m_values.empty()) {
    SampleSet samples = sample_spins(tree, theta_star,
                                     trial_seed(cfg.seed, kPurposeSampling, 0, 0),
                                     cfg.m_values[0]);
    LandscapeReport emp = box_scan_empirical(tree, samples, box, opts);
    emit(emp);
    local.sup_lambda_max = emp.sup_lambda_max;
    local.inf_lambda_min = emp.inf_lambda_min;
  }
  if (tree.leaf_count() <= 14) {
    LandscapeReport pop = box_scan_population(tree, theta_star, box, opts);
    emit(pop);
    if (cfg.m_values.empty()) {
      local.sup_lambda_max = pop.sup_lambda_max;
      local.inf_lambda_min = pop.inf_lambda_min;
    }
  }
  local.theoretical_m = sample_complexity(cfg.delta, tree.diameter(), cfg.complexity_eps, cfg.C);
  csv.comment("theoretical requirement m >= " + std::to_string(local.theoretical_m) + " (eps=" +
              format_double(cfg.complexity_eps) + ", C=" + format_double(cfg.C) + ")");

  if (summary) *summary = local;
  CsvReport report;
  report.content = csv.str();
  report.path = output_path(cfg, "landscape.csv");
  csv.write(report.path);
  return report;
}

namespace {

// Sign flips of all edges at an internal node leave the leaf distribution
// invariant; two maximizers are genuinely distinct only if no combination of
// such flips maps one onto the other.
std::vector<EdgeVector> gauge_orbit(const Tree& tree, const EdgeVector& theta) {
  std::vector<NodeId> internal;
  for (NodeId v = 0; v < tree.node_count(); ++v)
    if (!tree.is_leaf(v)) internal.push_back(v);
  std::vector<EdgeVector> orbit;
  const std::size_t combos = std::size_t(1) << internal.size();
  orbit.reserve(combos);
  for (std::size_t mask = 0; mask < combos; ++mask) {
    EdgeVector g = theta;
    for (std::size_t i = 0; i < internal.size(); ++i) {
      if (!((mask >> i) & 1)) continue;
      for (NodeId w : tree.neighbors(internal[i])) {
        EdgeId e = tree.edge_between(internal[i], w);
        g[e] = -g[e];
      }
    }
    orbit.push_back(std::move(g));
  }
  return orbit;
}

bool gauge_equivalent(const Tree& tree, const EdgeVector& a, const EdgeVector& b, double tol) {
  for (const auto& g : gauge_orbit(tree, a)) {
    double linf = 0;
    for (int e = 0; e < tree.edge_count(); ++e) linf = std::max(linf, std::abs(g[e] - b[e]));
    if (linf <= tol) return true;
  }
  return false;
}

double linf_distance(const EdgeVector& a, const EdgeVector& b) {
  double out = 0;
  for (int i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
  return out;
}

}  // namespace

CsvReport run_steel_demo(const ExperimentConfig& cfg, SteelSummary* summary) {
  Tree tree = config_tree(cfg);
  if (tree.leaf_count() != 4) throw config_error("steel-demo: needs a quartet tree");
  OptConfig opt = optimizer_config(cfg);

  CsvBuilder csv;
  standard_preamble(csv, cfg, tree);
  std::vector<std::string> cols{"pattern_pair", "init_id"};
  for (int e = 0; e < tree.edge_count(); ++e) cols.push_back("theta_" + std::to_string(e));
  cols.push_back("objective");
  csv.header(cols);

  SteelSummary local;
  const int n_patterns = 16;
  for (int a = 0; a < n_patterns; ++a) {
    for (int b = a; b < n_patterns; ++b) {
      LeafPattern pa = LeafPattern::unpack(a, 4), pb = LeafPattern::unpack(b, 4);
      SampleSet samples = a == b ? make_sample_set({{pa, 2}})
                                 : make_sample_set({{pa, 1}, {pb, 1}});
      std::string pair_name = pa.to_string() + "|" + pb.to_string();
      struct Limit {
        EdgeVector init, theta;
        double objective;
      };
      std::vector<Limit> limits;
      for (int init_id = 0; init_id < cfg.inits_per_pair; ++init_id) {
        std::uint64_t s = trial_seed(cfg.seed, kPurposeSteel,
                                     static_cast<std::uint64_t>(a * n_patterns + b), init_id);
        Rng rng(s);
        EdgeVector init = EdgeVector::constant(tree, 0.0);
        for (int e = 0; e < tree.edge_count(); ++e) init[e] = rng.uniform(-0.85, 0.85);
        try {
          OptTrace trace = fit(tree, init, samples, opt);
          limits.push_back({init, trace.final_theta(), trace.final_objective()});
        } catch (const numerical_error&) {
          continue;  // degenerate boundary run; the search just skips it
        }
        const Limit& lim = limits.back();
        csv.begin_row();
        csv.cell(pair_name);
        csv.cell(init_id);
        for (double v : lim.theta.values) csv.cell(v);
        csv.cell(lim.objective);
        csv.end_row();
      }
      if (limits.empty()) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& lim : limits) best = std::max(best, lim.objective);
      // distinct ascent limits at the shared best objective
      std::vector<const Limit*> reps;
      for (const auto& lim : limits) {
        if (std::abs(lim.objective - best) > 1e-9) continue;
        bool dup = false;
        for (const auto* r : reps)
          if (linf_distance(lim.theta, r->theta) < 0.05) dup = true;
        if (!dup) reps.push_back(&lim);
      }
      for (std::size_t i = 0; i + 1 < reps.size() && local.witnesses.size() < 64; ++i) {
        for (std::size_t j = i + 1; j < reps.size(); ++j) {
          SteelWitness w;
          w.pattern_a = pa.to_string();
          w.pattern_b = pb.to_string();
          w.init_a = reps[i]->init.values;
          w.init_b = reps[j]->init.values;
          w.theta_a = reps[i]->theta.values;
          w.theta_b = reps[j]->theta.values;
          w.objective_a = reps[i]->objective;
          w.objective_b = reps[j]->objective;
          w.linf_separation = linf_distance(reps[i]->theta, reps[j]->theta);
          w.gauge_inequivalent =
              !gauge_equivalent(tree, reps[i]->theta, reps[j]->theta, 1e-6);
          local.witnesses.push_back(std::move(w));
        }
      }
    }
  }
  int gauge_count = 0;
  for (const auto& w : local.witnesses) gauge_count += w.gauge_inequivalent ? 1 : 0;
  csv.comment("witness_pairs " + std::to_string(local.witnesses.size()) +
              " gauge_inequivalent " + std::to_string(gauge_count));

  CsvReport report;
  report.content = csv.str();
  report.path = output_path(cfg, "steel_demo.csv");
  csv.write(report.path);

  // 2D likelihood slice through the first gauge-inequivalent witness (or the
  // first witness at all), for external plotting
  const SteelWitness* chosen = nullptr;
  for (const auto& w : local.witnesses)
    if (w.gauge_inequivalent) {
      chosen = &w;
      break;
    }
  if (!chosen && !local.witnesses.empty()) chosen = &local.witnesses.front();
  if (chosen) {
    CsvBuilder slice;
    standard_preamble(slice, cfg, tree);
    slice.comment("slice pattern_pair " + chosen->pattern_a + "|" + chosen->pattern_b);
    int e1 = cfg.slice_edges[0], e2 = cfg.slice_edges[1];
    slice.comment("slice edges " + std::to_string(e1) + "," + std::to_string(e2));
    slice.header({"theta_" + std::to_string(e1), "theta_" + std::to_string(e2), "log_likelihood"});
    SampleSet samples =
        make_sample_set({{LeafPattern::from_string(chosen->pattern_a), 1},
                         {LeafPattern::from_string(chosen->pattern_b), 1}});
    EdgeVector theta(chosen->theta_a);
    const int g = cfg.slice_grid;
    for (int i = 0; i < g; ++i) {
      for (int j = 0; j < g; ++j) {
        theta[e1] = -0.999 + 1.998 * i / (g - 1);
        theta[e2] = -0.999 + 1.998 * j / (g - 1);
        slice.begin_row();
        slice.cell(theta[e1]);
        slice.cell(theta[e2]);
        slice.cell(log_likelihood(tree, theta, samples));
        slice.end_row();
      }
    }
    std::string slice_path = output_path(cfg, "steel_slice.csv");
    slice.write(slice_path);
    report.extra_paths.push_back(slice_path);
  }

  if (summary) *summary = std::move(local);
  return report;
}

CsvReport run_bernstein(const ExperimentConfig& cfg, BernsteinSummary* summary) {
  Tree tree = config_tree(cfg);
  if (tree.leaf_count() > 14) throw config_error("bernstein: tree too large for the exact oracle");
  if (cfg.m_values.empty()) throw config_error("bernstein: need an m value");
  EdgeVector theta_star = config_theta_star(cfg, tree);
  ParamBox box = cfg.estimation_box();
  BoxScanOptions opts;
  opts.grid_points_per_edge = cfg.grid_points;
  opts.random_interior_points = cfg.random_points;
  opts.seed = cfg.seed;

  std::uint64_t m = cfg.m_values[0];
  auto trials = hessian_deviation_experiment(tree, theta_star, box, m, cfg.trials, cfg.seed, opts);

  // deviation levels to tabulate: configured, or quantile-spread defaults
  std::vector<double> t_values = cfg.deviation_t;
  if (t_values.empty()) {
    std::vector<double> sups;
    for (const auto& tr : trials) sups.push_back(tr.sup_deviation);
    double mid = median(sups);
    t_values = {0.5 * mid, mid, 2.0 * mid};
  }

  const int E = tree.edge_count();
  DerivativeBounds bounds = deterministic_bounds(cfg.delta, tree.diameter(), cfg.c_bar);
  double J = bounds.hessian_entry_scale;
  double R = E * J / static_cast<double>(m);  // per-summand bound for X_k = (H_k - H)/m
  double L = E * E * bounds.third_derivative_bound / static_cast<double>(m);
  double sigma2 = static_cast<double>(E) * E * J * J / static_cast<double>(m);
  double diam_theta = (box.theta_hi() - box.theta_lo()) * std::sqrt(static_cast<double>(E));

  CsvBuilder csv;
  standard_preamble(csv, cfg, tree);
  csv.header({"trial", "m", "sup_deviation", "t", "bernstein_bound", "covering_number_bound"});
  for (const auto& tr : trials) {
    for (double t : t_values) {
      BernsteinParams params;
      params.p = E;
      params.d = E;
      params.n = static_cast<long>(m);
      params.R = R;
      params.L = L;
      params.sigma2 = sigma2;
      params.theta_diam = diam_theta;
      params.t = t;
      csv.begin_row();
      csv.cell(tr.trial);
      csv.cell(static_cast<std::uint64_t>(m));
      csv.cell(tr.sup_deviation);
      csv.cell(t);
      csv.cell(bernstein_bound(params));
      csv.cell(covering_number_bound(diam_theta, E, t / (2.0 * m * std::max(L, 1e-300))));
      csv.end_row();
    }
  }

  if (summary) {
    summary->sup_deviation.clear();
    for (const auto& tr : trials) summary->sup_deviation.push_back(tr.sup_deviation);
  }
  CsvReport report;
  report.content = csv.str();
  report.path = output_path(cfg, "bernstein.csv");
  csv.write(report.path);
  return report;
}

}  // namespace cfn
