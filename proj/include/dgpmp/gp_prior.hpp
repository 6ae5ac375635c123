#pragma once

#include "dgpmp/core.hpp"

#include <vector>

namespace dgpmp {

/// One constant-velocity GP transition between consecutive support states.
struct GpSegment {
  Mat4 phi;    // [[I, dt I], [0, I]]
  Mat4 q;      // [[dt^3/3 Qc, dt^2/2 Qc], [dt^2/2 Qc, dt Qc]]
  Mat4 q_inv;  // closed form inverse

  static GpSegment make(double dt, const Mat2& q_c);
};

/// Constant-velocity GP prior realized as N-1 pairwise factors plus start and
/// goal anchor factors.
struct PriorModel {
  Trajectory mean;
  std::vector<GpSegment> segments;
  Vec4 start_target;
  Vec4 goal_target;
  Mat4 k_start_inv;
  Mat4 k_goal_inv;

  int size() const { return mean.size(); }
};

/// Throws InvalidArgument if q_c (or an anchor covariance) is not SPD.
PriorModel build_prior(const Problem& problem);

/// e_i = theta_{i+1} - phi theta_i.
Vec4 gp_residual(const PriorModel& prior, const Trajectory& traj, int segment);

/// 1/2 [sum_i e_i^T Q^-1 e_i + start and goal anchor terms].
double gp_energy(const PriorModel& prior, const Trajectory& traj);

/// Gradient of gp_energy with respect to the flat trajectory.
Eigen::VectorXd gp_energy_gradient(const PriorModel& prior, const Trajectory& traj);

/// Block [phi^T Q^-1 phi, -phi^T Q^-1; -Q^-1 phi, Q^-1] contributed by one segment.
Eigen::Matrix<double, 8, 8> segment_information(const GpSegment& seg);

}  // namespace dgpmp
