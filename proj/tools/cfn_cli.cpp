#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfn/csv.hpp"
#include "cfn/errors.hpp"
#include "cfn/experiments.hpp"
#include "cfn/landscape.hpp"
#include "cfn/likelihood.hpp"
#include "cfn/model.hpp"
#include "cfn/optimizer.hpp"
#include "cfn/tree.hpp"
#include "cfn/version.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericalError = 3;

cfn::Tree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cfn::config_error("cannot open tree file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  cfn::NewickInfo info;
  cfn::Tree tree = cfn::Tree::parse_newick(buf.str(), &info);
  if (info.branch_lengths_ignored)
    std::cerr << "warning: branch lengths in " << path << " were ignored\n";
  return tree;
}

std::vector<double> parse_theta_list(const std::string& text, int n_edges) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
  if (values.size() == 1) values.assign(n_edges, values[0]);
  if (static_cast<int>(values.size()) != n_edges)
    throw cfn::config_error("theta list length != edge count");
  return values;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string tree_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool out_set = false;
};

cfn::ExperimentConfig resolve_config(const CommonFlags& flags, const std::string& expected_kind) {
  if (flags.config_path.empty()) throw cfn::config_error("missing --config");
  cfn::ExperimentConfig cfg = cfn::load_config(flags.config_path);
  if (cfg.experiment != expected_kind)
    throw cfn::config_error("config experiment is '" + cfg.experiment + "', expected '" +
                            expected_kind + "'");
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.out_set) cfg.out_dir = flags.out_dir;
  if (!flags.tree_path.empty()) {
    cfg.newick_path = flags.tree_path;
    cfg.builder.clear();
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)");
  cmd->add_option("--seed", flags.seed, "override the config master seed")
      ->each([&](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--out", flags.out_dir, "output directory")
      ->each([&](const std::string&) { flags.out_set = true; });
  cmd->add_option("--tree", flags.tree_path, "newick tree file (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CFN branch-length estimation experiments"};
  app.set_version_flag("--version", cfn::kVersion);
  app.require_subcommand(1);

  CommonFlags flags;

  auto* cmd_error = app.add_subcommand("error-scaling", "statistical error vs sample size");
  add_common(cmd_error, flags);
  auto* cmd_conv = app.add_subcommand("convergence", "per-sweep convergence traces");
  add_common(cmd_conv, flags);
  auto* cmd_land = app.add_subcommand("landscape", "Hessian eigenvalue box scans");
  add_common(cmd_land, flags);
  auto* cmd_steel = app.add_subcommand("steel-demo", "multiple-maximizer search on the quartet");
  add_common(cmd_steel, flags);
  std::string steel_freeze;
  cmd_steel->add_option("--freeze-witness", steel_freeze,
                        "write the first gauge-inequivalent witness as a JSON fixture");
  auto* cmd_bern = app.add_subcommand("bernstein", "Hessian deviation vs concentration bound");
  add_common(cmd_bern, flags);

  // simulate: draw samples and write a pattern/count CSV
  auto* cmd_sim = app.add_subcommand("simulate", "sample leaf patterns from the model");
  std::string sim_tree, sim_theta = "0.8", sim_out = "samples.csv";
  std::uint64_t sim_m = 1000, sim_seed = 0;
  cmd_sim->add_option("--tree", sim_tree, "newick tree file")->required();
  cmd_sim->add_option("--theta", sim_theta, "edge parameter (single value or comma list)");
  cmd_sim->add_option("--m", sim_m, "number of samples");
  cmd_sim->add_option("--seed", sim_seed, "seed");
  cmd_sim->add_option("--out", sim_out, "output CSV path");

  // fit: maximize the likelihood on a sample file
  auto* cmd_fit = app.add_subcommand("fit", "coordinate-maximization fit");
  std::string fit_tree, fit_samples, fit_theta0 = "0.5", fit_out = "trace.csv";
  double fit_sweep_tol = 1e-10;
  int fit_max_sweeps = 500;
  cmd_fit->add_option("--tree", fit_tree, "newick tree file")->required();
  cmd_fit->add_option("--samples", fit_samples, "pattern/count CSV")->required();
  cmd_fit->add_option("--theta0", fit_theta0, "initial parameter (value or comma list)");
  cmd_fit->add_option("--sweep-tolerance", fit_sweep_tol, "stopping tolerance");
  cmd_fit->add_option("--max-sweeps", fit_max_sweeps, "sweep limit");
  cmd_fit->add_option("--out", fit_out, "trace CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_sim->parsed()) {
      cfn::Tree tree = load_tree(sim_tree);
      cfn::EdgeVector theta(parse_theta_list(sim_theta, tree.edge_count()));
      cfn::SampleSet samples = cfn::sample_spins(tree, theta, sim_seed, sim_m);
      std::vector<std::string> preamble{
          "simulate seed " + std::to_string(sim_seed) + " m " + std::to_string(sim_m),
          "tree " + tree.to_newick(), "theta " + sim_theta,
          std::string("version ") + cfn::kVersion};
      cfn::save_samples_csv(samples, sim_out, preamble);
      std::cout << "wrote " << sim_out << " (" << samples.distinct() << " distinct patterns, m="
                << samples.total() << ")\n";
      return 0;
    }
    if (cmd_fit->parsed()) {
      cfn::Tree tree = load_tree(fit_tree);
      cfn::SampleSet samples = cfn::load_samples_csv(fit_samples, tree);
      cfn::EdgeVector theta0(parse_theta_list(fit_theta0, tree.edge_count()));
      cfn::OptConfig opt;
      opt.sweep_tolerance = fit_sweep_tol;
      opt.max_sweeps = fit_max_sweeps;
      cfn::OptTrace trace = cfn::fit(tree, theta0, samples, opt);
      cfn::CsvBuilder csv;
      csv.comment("fit tree " + tree.to_newick());
      csv.comment("samples " + fit_samples + " m " + std::to_string(samples.total()));
      csv.comment("theta0 " + fit_theta0 + " sweep_tolerance " +
                  cfn::format_double(fit_sweep_tol));
      csv.comment(std::string("version ") + cfn::kVersion);
      std::vector<std::string> cols{"sweep", "objective", "max_coord_change"};
      for (int e = 0; e < tree.edge_count(); ++e) cols.push_back("theta_" + std::to_string(e));
      csv.header(cols);
      for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
        csv.begin_row();
        csv.cell(static_cast<int>(k));
        csv.cell(trace.objectives[k]);
        csv.cell(k == 0 ? 0.0 : trace.max_coordinate_change[k - 1]);
        for (double v : trace.iterates[k].values) csv.cell(v);
        csv.end_row();
      }
      csv.write(fit_out);
      std::cout << "converged=" << (trace.termination == cfn::Termination::kConverged)
                << " sweeps=" << trace.sweeps() << " objective="
                << cfn::format_double(trace.final_objective()) << "\nwrote " << fit_out << "\n";
      return 0;
    }

    if (cmd_error->parsed()) {
      cfn::ErrorScalingSummary summary;
      auto report = cfn::run_error_scaling(resolve_config(flags, "error-scaling"), &summary);
      std::cout << "log-log slope of median error vs m: " << cfn::format_double(summary.slope)
                << " (nonconverged rows: " << summary.nonconverged << ")\nwrote " << report.path
                << "\n";
      return 0;
    }
    if (cmd_conv->parsed()) {
      cfn::ConvergenceSummary summary;
      auto report = cfn::run_convergence(resolve_config(flags, "convergence"), &summary);
      std::cout << "median fitted per-sweep rate: " << cfn::format_double(summary.fitted_rate)
                << " (reference 1-rho/L: " << cfn::format_double(summary.reference_rate)
                << ", R^2: " << cfn::format_double(summary.r_squared) << ")\nwrote "
                << report.path << "\n";
      return 0;
    }
    if (cmd_land->parsed()) {
      cfn::LandscapeSummary summary;
      auto report = cfn::run_landscape(resolve_config(flags, "landscape"), &summary);
      std::cout << "scanned extremes: sup lambda_max = "
                << cfn::format_double(summary.sup_lambda_max)
                << ", inf lambda_min = " << cfn::format_double(summary.inf_lambda_min)
                << "\ntheoretical requirement (formula value): m >= " << summary.theoretical_m
                << "\nwrote " << report.path << "\n";
      return 0;
    }
    if (cmd_steel->parsed()) {
      cfn::ExperimentConfig cfg = resolve_config(flags, "steel-demo");
      cfn::SteelSummary summary;
      auto report = cfn::run_steel_demo(cfg, &summary);
      int gauge = 0;
      for (const auto& w : summary.witnesses) gauge += w.gauge_inequivalent ? 1 : 0;
      std::cout << "witness pairs: " << summary.witnesses.size()
                << " (gauge-inequivalent: " << gauge << ")\nwrote " << report.path;
      for (const auto& p : report.extra_paths) std::cout << " and " << p;
      std::cout << "\n";
      if (!steel_freeze.empty()) {
        const cfn::SteelWitness* chosen = nullptr;
        for (const auto& w : summary.witnesses)
          if (w.gauge_inequivalent) {
            chosen = &w;
            break;
          }
        if (!chosen) throw cfn::numerical_error("no gauge-inequivalent witness found to freeze");
        nlohmann::json fx;
        fx["newick"] = cfn::config_tree(cfg).to_newick();
        fx["pattern_a"] = chosen->pattern_a;
        fx["pattern_b"] = chosen->pattern_b;
        fx["init_a"] = chosen->init_a;
        fx["init_b"] = chosen->init_b;
        fx["theta_a"] = chosen->theta_a;
        fx["theta_b"] = chosen->theta_b;
        fx["objective"] = chosen->objective_a;
        fx["linf_separation"] = chosen->linf_separation;
        fx["discovery_seed"] = cfg.seed;
        fx["inits_per_pair"] = cfg.inits_per_pair;
        std::ofstream out(steel_freeze);
        out << fx.dump(2) << "\n";
        std::cout << "froze witness to " << steel_freeze << "\n";
      }
      return 0;
    }
    if (cmd_bern->parsed()) {
      cfn::BernsteinSummary summary;
      auto report = cfn::run_bernstein(resolve_config(flags, "bernstein"), &summary);
      std::cout << "trials: " << summary.sup_deviation.size() << "\nwrote " << report.path
                << "\n";
      return 0;
    }
  } catch (const cfn::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const cfn::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumericalError;
  }
  return 0;
}
