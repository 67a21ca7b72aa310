#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfn/model.hpp"
#include "cfn/tree.hpp"

namespace cfn {

struct OptConfig {
  double sweep_tolerance = 1e-10;   // stop when the max per-sweep coordinate change drops below
  double solver_tolerance = 1e-12;  // 1D bisection bracket width
  int max_sweeps = 500;
  std::vector<EdgeId> edge_order;      // empty = ascending edge ids
  std::optional<ParamBox> clamp_box;   // restrict each 1D search to the box interval
};

enum class Termination { kConverged, kMaxSweeps };

struct OptTrace {
  std::vector<EdgeVector> iterates;          // theta_0, theta_1, ... per completed sweep
  std::vector<double> objectives;            // aligned with iterates
  std::vector<double> max_coordinate_change; // per sweep (size iterates.size()-1)
  std::vector<double> min_update_gain;       // smallest single-update objective gain per sweep
  Termination termination = Termination::kMaxSweeps;

  int sweeps() const { return static_cast<int>(iterates.size()) - 1; }
  const EdgeVector& final_theta() const { return iterates.back(); }
  double final_objective() const { return objectives.back(); }
};

struct CoordinateUpdateResult {
  double value = 0;
  bool flat = false;  // every per-sample magnetization product was zero
};

// Exact 1D maximization of t -> (1/m) sum_i log(1 + t z_i) over the search
// interval ([-1,1], or the clamp box interval), via bisection on the strictly
// decreasing derivative. Magnetizations across edge e are evaluated at
// theta_hat and held fixed during the solve.
CoordinateUpdateResult coordinate_update(const Tree& tree, const EdgeVector& theta_hat,
                                         const SampleSet& samples, EdgeId e, double tol,
                                         const ParamBox* clamp = nullptr);

// Cyclic coordinate maximization of the empirical log-likelihood. The two
// directed magnetizations across the edge being updated are refreshed from the
// current parameter before each 1D solve (incrementally: a coordinate update
// only invalidates the messages oriented away from that edge).
OptTrace fit(const Tree& tree, const EdgeVector& theta0, const SampleSet& samples,
             const OptConfig& config = {});

struct ConfinementReport {
  bool all_interior = true;
  std::optional<int> first_escape_sweep;
};

// Checks every iterate coordinate against the open interval of the box.
ConfinementReport confinement_report(const OptTrace& trace, const ParamBox& box);

}  // namespace cfn
