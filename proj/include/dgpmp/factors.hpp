#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/env.hpp"

#include <vector>

namespace dgpmp {

/// max(eps - d, 0). Returns 0 at d == eps.
double hinge_cost(double d, double eps);

struct ObstacleFactor {
  int index;
  double eps;
  double sigma;
};

struct VelocityFactor {
  int index;
  Vec2 v_max;
  double sigma;
};

using JacobianRow = Eigen::Matrix<double, 1, kStateDim>;

struct ObstacleEval {
  double residual = 0.0;
  JacobianRow jacobian = JacobianRow::Zero();
  SdfQuery sdf;
  bool active = false;  // d < eps; the kink d == eps counts as inactive
};

ObstacleEval obstacle_residual_jacobian(const ObstacleFactor& factor, const State& state,
                                        const Sdf& sdf);

struct VelocityEval {
  Vec2 residual = Vec2::Zero();
  Eigen::Matrix<double, 2, kStateDim> jacobian = Eigen::Matrix<double, 2, kStateDim>::Zero();
  /// +1 above the upper limit, -1 below the lower limit, 0 inside.
  Eigen::Vector2i sign = Eigen::Vector2i::Zero();
};

VelocityEval velocity_residual_jacobian(const VelocityFactor& factor, const State& state);

/// One scalar likelihood row. Its jacobian touches a single state block.
struct LikelihoodRow {
  enum class Kind { kObstacle, kVelocityX, kVelocityY };
  Kind kind;
  int state;
  double residual;
  JacobianRow jacobian;
  double weight;  // inverse variance
};

/// Stacked h(theta), H and the diagonal of Sigma^-1. Rows are ordered by
/// state: the obstacle row, then the two velocity rows when limits are set.
struct StackedLikelihood {
  std::vector<LikelihoodRow> rows;
  std::vector<ObstacleEval> obstacles;   // one per state
  std::vector<VelocityEval> velocities;  // one per state, empty without v_max

  Eigen::VectorXd residuals() const;
  Eigen::VectorXd weights() const;
  Eigen::MatrixXd dense_jacobian(int n_states) const;
  /// 1/2 sum_k w_k h_k^2.
  double energy() const;
};

/// Throws InvalidArgument if any sigma is not strictly positive.
StackedLikelihood stack_likelihood(const Trajectory& traj, const Sdf& sdf,
                                   const FixedParams& fixed, const LearnedParams& learned);

}  // namespace dgpmp
