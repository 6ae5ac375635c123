#include "dgpmp/gp_prior.hpp"

namespace dgpmp {

GpSegment GpSegment::make(double dt, const Mat2& q_c) {
  if (!(dt > 0.0)) throw InvalidArgument("segment dt must be > 0");
  if (!is_spd(q_c)) throw InvalidArgument("q_c must be symmetric positive definite");
  const Mat2 eye = Mat2::Identity();
  const Mat2 qc_inv = q_c.inverse();
  GpSegment s;
  s.phi << eye, dt * eye, Mat2::Zero(), eye;
  s.q << dt * dt * dt / 3.0 * q_c, dt * dt / 2.0 * q_c, dt * dt / 2.0 * q_c, dt * q_c;
  s.q_inv << 12.0 / (dt * dt * dt) * qc_inv, -6.0 / (dt * dt) * qc_inv,
      -6.0 / (dt * dt) * qc_inv, 4.0 / dt * qc_inv;
  return s;
}

PriorModel build_prior(const Problem& problem) {
  problem.validate();
  Trajectory mean = straight_line_init(problem);
  const GpSegment seg = GpSegment::make(mean.dt(), problem.fixed.q_c);
  PriorModel prior{mean,
                   std::vector<GpSegment>(mean.size() - 1, seg),
                   mean.block(0),
                   mean.block(mean.size() - 1),
                   problem.fixed.k_start.inverse(),
                   problem.fixed.k_goal.inverse()};
  return prior;
}

Vec4 gp_residual(const PriorModel& prior, const Trajectory& traj, int segment) {
  const GpSegment& s = prior.segments.at(segment);
  return traj.block(segment + 1) - s.phi * traj.block(segment);
}

double gp_energy(const PriorModel& prior, const Trajectory& traj) {
  if (traj.size() != prior.size()) throw InvalidArgument("trajectory/prior size mismatch");
  double e = 0.0;
  for (int i = 0; i + 1 < traj.size(); ++i) {
    const Vec4 r = gp_residual(prior, traj, i);
    e += r.dot(prior.segments[i].q_inv * r);
  }
  const Vec4 ds = traj.block(0) - prior.start_target;
  const Vec4 dg = traj.block(traj.size() - 1) - prior.goal_target;
  e += ds.dot(prior.k_start_inv * ds) + dg.dot(prior.k_goal_inv * dg);
  return 0.5 * e;
}

Eigen::VectorXd gp_energy_gradient(const PriorModel& prior, const Trajectory& traj) {
  const int n = traj.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(kStateDim * n);
  for (int i = 0; i + 1 < n; ++i) {
    const GpSegment& s = prior.segments[i];
    const Vec4 w = s.q_inv * gp_residual(prior, traj, i);
    g.segment<4>(4 * i) -= s.phi.transpose() * w;
    g.segment<4>(4 * (i + 1)) += w;
  }
  g.segment<4>(0) += prior.k_start_inv * (traj.block(0) - prior.start_target);
  g.segment<4>(4 * (n - 1)) += prior.k_goal_inv * (traj.block(n - 1) - prior.goal_target);
  return g;
}

Eigen::Matrix<double, 8, 8> segment_information(const GpSegment& seg) {
  Eigen::Matrix<double, 4, 8> j;
  j << -seg.phi, Mat4::Identity();
  return j.transpose() * seg.q_inv * j;
}

}  // namespace dgpmp
