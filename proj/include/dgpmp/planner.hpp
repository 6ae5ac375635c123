#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/env.hpp"
#include "dgpmp/factors.hpp"
#include "dgpmp/gp_prior.hpp"
#include "dgpmp/solver.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dgpmp {

struct PlannerConfig {
  int t_max = 100;
  double tol_rel_err = 1e-4;
  double tol_update = 1e-3;  // meters, infinity norm of the update
  /// When set, run exactly this many steps and never test convergence.
  std::optional<int> fixed_unroll;
  double step_scale = 1.0;
  /// Diagonal damping used only if the undamped Cholesky fails. 0 disables.
  double fallback_damping = 0.0;
  /// Step halvings tried while a step raises the objective. Ignored under
  /// fixed_unroll. 0 keeps plain Gauss-Newton steps.
  int max_backtracks = 0;

  void validate() const;
};

/// Supplies the obstacle standard deviations used to linearize at a given
/// iterate. Fixed-covariance planning returns a constant vector.
using SigmaProvider = std::function<LearnedParams(int iteration, const Trajectory& traj)>;

SigmaProvider constant_sigma(double sigma);

struct PlanResult {
  Trajectory final;
  std::vector<Trajectory> iterates;  // initialization first
  int iterations_used = 0;
  bool converged = false;
  std::vector<double> objectives;  // one per iterate
  std::optional<std::string> error;
};

/// Everything computed while taking one Gauss-Newton step.
struct StepWork {
  StackedLikelihood likelihood;
  LinearizedSystem system;
  std::optional<BlockCholesky> factor;
  double damping = 0.0;
  Eigen::VectorXd delta;
};

StepWork linearize_and_solve(const Trajectory& traj, const Problem& problem,
                             const PriorModel& prior, const LearnedParams& learned,
                             double fallback_damping = 0.0);

/// theta + step_scale * delta where delta solves the linearized system at theta.
Trajectory step(const Trajectory& traj, const Problem& problem, const PriorModel& prior,
                const LearnedParams& learned, const PlannerConfig& config = {});
Trajectory step(const Trajectory& traj, const Problem& problem, const LearnedParams& learned);

/// 1/2 ||theta - mu||_K^2 + 1/2 ||h(theta)||_Sigma^2.
double objective(const PriorModel& prior, const Trajectory& traj, const Problem& problem,
                 const LearnedParams& learned);

PlanResult plan(const Problem& problem, const SigmaProvider& provider,
                const PlannerConfig& config = {});

/// As above but starting from a given trajectory instead of the straight line.
PlanResult plan_from(const Problem& problem, const Trajectory& init,
                     const SigmaProvider& provider, const PlannerConfig& config = {});

}  // namespace dgpmp
