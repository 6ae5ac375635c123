#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/env.hpp"
#include "dgpmp/gp_prior.hpp"
#include "dgpmp/planner.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dgpmp::learn {
class Network;
}

namespace dgpmp::eval {

/// Number of support states with d(position) <= r.
int collision_count(const Trajectory& traj, const Sdf& sdf, double radius);

/// True iff d(position_i) > r at every support state.
bool is_collision_free(const Trajectory& traj, const Sdf& sdf, double radius);

/// (1 / (N-1)) sum_i e_i^T Q^-1 e_i over the GP segments; anchors excluded.
double gp_mse(const Trajectory& traj, const PriorModel& prior);

/// Fraction of support states in collision.
double coll_intensity(const Trajectory& traj, const Sdf& sdf, double radius);

/// Mean over states and axes of max(|v_j| - v_max_j, 0).
double constraint_violation(const Trajectory& traj, const Vec2& v_max);

/// Sum of straight segment lengths between consecutive support positions.
double path_length(const Trajectory& traj);

/// Outcome of one planner run on one problem.
struct ProblemRecord {
  std::string env_id;
  std::string kind;
  std::string variant;
  bool success = false;
  double gp_mse = 0.0;
  double coll_intensity = 0.0;
  int iters = 0;
  double violation = 0.0;
  bool converged = false;
  std::string failure;  // empty on success: "collision", "solver: ..."
};

struct MetricsRow {
  std::string variant;
  std::string subset;
  int problems = 0;
  double success = 0.0;         // fraction in [0, 1]
  double gp_mse = 0.0;          // mean over all problems
  double coll_intensity = 0.0;  // mean over colliding problems only
  double coll_intensity_all = 0.0;
  double num_iters = 0.0;       // mean over all runs
  double constraint_violation = 0.0;
};

/// Folds the records of one (variant, subset) pair. subset "mixed" takes
/// every kind; any other subset matches ProblemRecord::kind.
MetricsRow aggregate(const std::vector<ProblemRecord>& records, const std::string& variant,
                     const std::string& subset);

struct EvalProblem {
  std::string id;
  EnvKind kind;
  Problem problem;
};

/// A planner under test: either a constant sigma (GPMP2 baseline) or a
/// trained network predicting sigma at every iteration.
struct PlannerVariant {
  std::string name;
  std::optional<double> fixed_sigma;
  std::shared_ptr<const learn::Network> network;

  SigmaProvider provider_for(const Problem& problem) const;
};

ProblemRecord evaluate_problem(const EvalProblem& p, const PlannerVariant& variant,
                               const PlannerConfig& config);

struct ExperimentResult {
  std::vector<ProblemRecord> records;  // variant-major, dataset order
  std::vector<MetricsRow> rows;
};

/// Runs every variant on every problem, reusing `completed` records (matched
/// by env id and variant) instead of recomputing them. Rows cover each kind
/// present plus "mixed".
ExperimentResult run_experiment(const std::vector<EvalProblem>& dataset,
                                const std::vector<PlannerVariant>& variants,
                                const PlannerConfig& config, int jobs = 1,
                                const std::vector<ProblemRecord>& completed = {});

void write_records_csv(std::ostream& os, const std::vector<ProblemRecord>& records);
std::vector<ProblemRecord> read_records_csv(std::istream& is);
void write_summary_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace dgpmp::eval
