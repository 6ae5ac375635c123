#include "dgpmp/learn/loss.hpp"

#include "dgpmp/factors.hpp"

namespace dgpmp::learn {

namespace {

void check_sizes(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size())
    throw InvalidArgument("imitation loss needs trajectories of equal length (" +
                          std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

IterateLoss imitation_loss_grad(const Trajectory& traj, const Trajectory& expert,
                                bool positions_only) {
  check_sizes(traj, expert);
  Eigen::VectorXd diff = traj.flat() - expert.flat();
  if (positions_only)
    for (int i = 0; i < traj.size(); ++i) diff.segment<2>(kStateDim * i + 2).setZero();
  return {diff.squaredNorm(), 2.0 * diff};
}

double imitation_loss(const Trajectory& traj, const Trajectory& expert, bool positions_only) {
  return imitation_loss_grad(traj, expert, positions_only).value;
}

IterateLoss task_loss_grad(const Trajectory& traj, const PriorModel& prior, const Sdf& sdf,
                           const FixedParams& fixed, double lambda) {
  IterateLoss out{gp_energy(prior, traj), gp_energy_gradient(prior, traj)};
  if (lambda == 0.0) return out;
  const double eps = fixed.epsilon();
  double obs = 0.0;
  for (int i = 0; i < traj.size(); ++i) {
    const SdfQuery q = sdf.query(traj.position(i));
    const double c = hinge_cost(q.value, eps);
    if (c == 0.0) continue;
    obs += 0.5 * c * c;
    out.gradient.segment<2>(kStateDim * i) -= lambda * c * q.gradient;
  }
  out.value += lambda * obs;
  return out;
}

double task_loss(const Trajectory& traj, const PriorModel& prior, const Sdf& sdf,
                 const FixedParams& fixed, double lambda) {
  return task_loss_grad(traj, prior, sdf, fixed, lambda).value;
}

double total_loss(const std::vector<std::vector<double>>& losses) {
  if (losses.empty() || losses.front().empty())
    throw InvalidArgument("total_loss needs a non-empty batch");
  const std::size_t t = losses.front().size();
  double sum = 0.0;
  for (const auto& row : losses) {
    if (row.size() != t) throw InvalidArgument("ragged loss table");
    for (double v : row) sum += v;
  }
  return sum / (static_cast<double>(losses.size()) * static_cast<double>(t));
}

}  // namespace dgpmp::learn
