#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/diff.hpp"
#include "dgpmp/env.hpp"
#include "dgpmp/gp_prior.hpp"

#include <vector>

namespace dgpmp::learn {

/// A planning problem paired with the expert trajectory to imitate.
struct Demonstration {
  Problem problem;
  Trajectory expert;
};

/// ||expert - traj||^2 over the stacked 4N state vector, or over positions
/// only when `positions_only` is set.
double imitation_loss(const Trajectory& traj, const Trajectory& expert,
                      bool positions_only = false);
IterateLoss imitation_loss_grad(const Trajectory& traj, const Trajectory& expert,
                                bool positions_only = false);

/// gp_energy + lambda * 1/2 sum_i hinge(d_i, eps)^2. Not weighted by sigma.
double task_loss(const Trajectory& traj, const PriorModel& prior, const Sdf& sdf,
                 const FixedParams& fixed, double lambda);
IterateLoss task_loss_grad(const Trajectory& traj, const PriorModel& prior, const Sdf& sdf,
                           const FixedParams& fixed, double lambda);

/// Mean over a K x T table of per-iteration losses. Throws InvalidArgument
/// when the table is empty or ragged.
double total_loss(const std::vector<std::vector<double>>& losses);

}  // namespace dgpmp::learn
