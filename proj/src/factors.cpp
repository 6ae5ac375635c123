#include "dgpmp/factors.hpp"

#include <cmath>

namespace dgpmp {

double hinge_cost(double d, double eps) { return d < eps ? eps - d : 0.0; }

ObstacleEval obstacle_residual_jacobian(const ObstacleFactor& factor, const State& state,
                                        const Sdf& sdf) {
  ObstacleEval out;
  out.sdf = sdf.query(state.position);
  out.residual = hinge_cost(out.sdf.value, factor.eps);
  out.active = out.sdf.value < factor.eps;
  if (out.active) out.jacobian.head<2>() = -out.sdf.gradient.transpose();
  return out;
}

VelocityEval velocity_residual_jacobian(const VelocityFactor& factor, const State& state) {
  VelocityEval out;
  for (int j = 0; j < 2; ++j) {
    const double v = state.velocity[j];
    const double lim = factor.v_max[j];
    if (v > lim) {
      out.residual[j] = v - lim;
      out.sign[j] = 1;
    } else if (v < -lim) {
      out.residual[j] = -lim - v;
      out.sign[j] = -1;
    }
    out.jacobian(j, 2 + j) = out.sign[j];
  }
  return out;
}

StackedLikelihood stack_likelihood(const Trajectory& traj, const Sdf& sdf,
                                   const FixedParams& fixed, const LearnedParams& learned) {
  const int n = traj.size();
  learned.validate(n);
  const double eps = fixed.epsilon();
  const double w_vel = 1.0 / fixed.k_vel;

  StackedLikelihood out;
  out.obstacles.reserve(n);
  out.rows.reserve(fixed.v_max ? 3 * n : n);
  for (int i = 0; i < n; ++i) {
    const State s = traj.state(i);
    const double sigma = learned.sigma_obs[i];
    ObstacleEval ob = obstacle_residual_jacobian({i, eps, sigma}, s, sdf);
    out.rows.push_back({LikelihoodRow::Kind::kObstacle, i, ob.residual, ob.jacobian,
                        1.0 / (sigma * sigma)});
    out.obstacles.push_back(ob);
    if (fixed.v_max) {
      VelocityEval ve =
          velocity_residual_jacobian({i, *fixed.v_max, std::sqrt(fixed.k_vel)}, s);
      out.rows.push_back({LikelihoodRow::Kind::kVelocityX, i, ve.residual[0],
                          ve.jacobian.row(0), w_vel});
      out.rows.push_back({LikelihoodRow::Kind::kVelocityY, i, ve.residual[1],
                          ve.jacobian.row(1), w_vel});
      out.velocities.push_back(ve);
    }
  }
  return out;
}

Eigen::VectorXd StackedLikelihood::residuals() const {
  Eigen::VectorXd h(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) h[k] = rows[k].residual;
  return h;
}

Eigen::VectorXd StackedLikelihood::weights() const {
  Eigen::VectorXd w(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) w[k] = rows[k].weight;
  return w;
}

Eigen::MatrixXd StackedLikelihood::dense_jacobian(int n_states) const {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows.size(), kStateDim * n_states);
  for (std::size_t k = 0; k < rows.size(); ++k)
    jac.block<1, kStateDim>(k, kStateDim * rows[k].state) = rows[k].jacobian;
  return jac;
}

double StackedLikelihood::energy() const {
  double e = 0.0;
  for (const auto& r : rows) e += r.weight * r.residual * r.residual;
  return 0.5 * e;
}

}  // namespace dgpmp
