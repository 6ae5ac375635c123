#include "dgpmp/diff.hpp"

#include <stdexcept>

namespace dgpmp {

double Tape::loss() const {
  double total = 0.0;
  for (const auto& l : losses_) total += l.value;
  return total;
}

std::size_t Tape::cached_values() const {
  std::size_t n = theta0_.flat().size();
  for (const auto& s : steps_) {
    n += s.input.flat().size() + s.output.flat().size() + s.sigma.size();
    n += s.work.likelihood.rows.size() * (kStateDim + 2);
    n += s.work.likelihood.obstacles.size() * 5;
    n += s.work.likelihood.velocities.size() * 4;
    n += (s.work.system.diag.size() + s.work.system.lower.size()) * 16 * 2;
    n += s.work.system.rhs.size() + s.work.delta.size();
  }
  for (const auto& l : losses_) n += 1 + l.gradient.size();
  return n;
}

UnrollResult record_unroll(const Problem& problem, const SigmaProvider& provider, int steps,
                           const IterateLossFn& loss, std::optional<Trajectory> init,
                           double step_scale) {
  if (steps < 0) throw InvalidArgument("unroll length must be >= 0");
  PriorModel prior = build_prior(problem);
  Trajectory theta = init ? *init : straight_line_init(problem);
  if (theta.size() != prior.size()) throw InvalidArgument("initial trajectory size mismatch");

  Tape tape(problem, prior, theta, step_scale);
  PlanResult result{theta, {theta}, 0, false, {}, std::nullopt};

  LearnedParams sigma = provider(0, theta);
  result.objectives.push_back(objective(prior, theta, problem, sigma));
  for (int t = 0; t < steps; ++t) {
    StepWork work = linearize_and_solve(theta, problem, prior, sigma);
    Trajectory next(theta.flat() + step_scale * work.delta, theta.total_time());
    if (loss) tape.push_loss(loss(t + 1, next));
    tape.push_step({theta, sigma.sigma_obs, std::move(work), next});
    theta = next;
    result.iterates.push_back(theta);
    ++result.iterations_used;
    sigma = provider(t + 1, theta);
    result.objectives.push_back(objective(prior, theta, problem, sigma));
  }
  result.final = theta;
  if (loss || steps == 0) tape.mark_complete();
  return {std::move(result), std::move(tape)};
}

std::vector<Trajectory> replay(const Tape& tape) {
  std::vector<Trajectory> out{tape.theta0()};
  Trajectory theta = tape.theta0();
  for (const auto& rec : tape.steps()) {
    const StepWork work = linearize_and_solve(theta, tape.problem(), tape.prior(),
                                              LearnedParams{rec.sigma}, rec.work.damping);
    theta = Trajectory(theta.flat() + tape.step_scale() * work.delta, theta.total_time());
    out.push_back(theta);
  }
  return out;
}

namespace {

// Adds M_prior * x (the Hessian of the prior energy) to out.
void add_prior_hessian_product(const PriorModel& prior, const Eigen::VectorXd& x,
                               Eigen::VectorXd& out) {
  const int n = prior.size();
  for (int i = 0; i + 1 < n; ++i) {
    const GpSegment& seg = prior.segments[i];
    const Vec4 je = x.segment<4>(4 * (i + 1)) - seg.phi * x.segment<4>(4 * i);
    const Vec4 w = seg.q_inv * je;
    out.segment<4>(4 * i) -= seg.phi.transpose() * w;
    out.segment<4>(4 * (i + 1)) += w;
  }
  out.segment<4>(0) += prior.k_start_inv * x.segment<4>(0);
  out.segment<4>(4 * (n - 1)) += prior.k_goal_inv * x.segment<4>(4 * (n - 1));
}

struct StepAdjoint {
  Eigen::VectorXd d_input;      // adjoint of the step input trajectory
  Eigen::VectorXd d_log_sigma;  // N
  Mat2 d_qc = Mat2::Zero();
};

// Adjoint of theta' = theta + a * M(theta, sigma)^-1 rhs(theta, sigma) given
// d_output = dL/dtheta'. The hinge activation pattern is held fixed.
StepAdjoint step_backward(const Tape& tape, const StepRecord& rec,
                          const Eigen::VectorXd& d_output, bool with_qc) {
  const PriorModel& prior = tape.prior();
  const int n = rec.input.size();
  const StepWork& work = rec.work;
  const Eigen::VectorXd& delta = work.delta;

  StepAdjoint adj;
  adj.d_input = d_output;
  adj.d_log_sigma = Eigen::VectorXd::Zero(n);

  // delta = M^-1 rhs: d_rhs = M^-1 d_delta, d_M = -d_rhs delta^T.
  const Eigen::VectorXd u = work.factor->solve(tape.step_scale() * d_output);
  // rhs = -g(theta), so d_g = -u.
  const Eigen::VectorXd d_g = -u;

  // The prior gradient is linear in theta with Hessian M_prior.
  add_prior_hessian_product(prior, d_g, adj.d_input);

  const StackedLikelihood& lik = work.likelihood;
  for (int i = 0; i < n; ++i) {
    const ObstacleEval& ob = lik.obstacles[i];
    if (!ob.active) continue;
    const double sigma = rec.sigma[i];
    const double w = 1.0 / (sigma * sigma);
    const Vec2 grad = ob.sdf.gradient;
    const double r = ob.residual;
    Mat2 hess;
    hess << 0.0, ob.sdf.cross, ob.sdf.cross, 0.0;

    const Vec2 dg_pos = d_g.segment<2>(4 * i);
    const Vec2 u_pos = u.segment<2>(4 * i);
    const Vec2 delta_pos = delta.segment<2>(4 * i);
    // Symmetric part of d_M restricted to this position block.
    const Mat2 s = -0.5 * (u_pos * delta_pos.transpose() + delta_pos * u_pos.transpose());

    // g_i += -w r grad ; M_i += w grad grad^T
    const double d_w = -r * grad.dot(dg_pos) + grad.dot(s * grad);
    const Vec2 d_pos = w * grad * grad.dot(dg_pos) - w * r * (hess * dg_pos) +
                       2.0 * w * (hess * (s * grad));
    adj.d_input.segment<2>(4 * i) += d_pos;
    adj.d_log_sigma[i] = -2.0 * w * d_w;
  }

  if (!lik.velocities.empty()) {
    const double w_vel = 1.0 / tape.problem().fixed.k_vel;
    for (int i = 0; i < n; ++i) {
      const VelocityEval& ve = lik.velocities[i];
      for (int j = 0; j < 2; ++j)
        if (ve.sign[j] != 0) adj.d_input[4 * i + 2 + j] += w_vel * d_g[4 * i + 2 + j];
    }
  }

  if (with_qc) {
    // Q^-1 = kron(C(dt), Qc^-1); accumulate dL/d(Qc^-1) over segments.
    Mat2 d_p = Mat2::Zero();
    for (int i = 0; i + 1 < n; ++i) {
      const GpSegment& seg = prior.segments[i];
      Eigen::Matrix<double, 4, 8> j;
      j << -seg.phi, Mat4::Identity();
      Eigen::Matrix<double, 8, 1> u_blk, delta_blk, dg_blk;
      u_blk << u.segment<4>(4 * i), u.segment<4>(4 * (i + 1));
      delta_blk << delta.segment<4>(4 * i), delta.segment<4>(4 * (i + 1));
      dg_blk << d_g.segment<4>(4 * i), d_g.segment<4>(4 * (i + 1));
      const Vec4 e = gp_residual(prior, rec.input, i);
      const Mat4 d_qinv = -(j * u_blk) * (j * delta_blk).transpose() + (j * dg_blk) * e.transpose();
      const double dt = rec.input.dt();
      const double c[2][2] = {{12.0 / (dt * dt * dt), -6.0 / (dt * dt)},
                              {-6.0 / (dt * dt), 4.0 / dt}};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) d_p += c[a][b] * d_qinv.block<2, 2>(2 * a, 2 * b);
    }
    const Mat2 p = tape.problem().fixed.q_c.inverse();
    const Mat2 g = -p.transpose() * d_p * p.transpose();
    adj.d_qc = 0.5 * (g + g.transpose());
  }
  return adj;
}

}  // namespace

GradientReport backward(const Tape& tape, double seed, const BackwardOptions& opts) {
  if (!tape.complete()) throw std::logic_error("backward called on an incomplete tape");
  const int steps = tape.unroll_length();
  const int n = tape.theta0().size();

  GradientReport report;
  report.d_log_sigma = Eigen::MatrixXd::Zero(n, steps);
  report.d_sigma = Eigen::MatrixXd::Zero(n, steps);
  Mat2 d_qc = Mat2::Zero();

  Eigen::VectorXd d_theta = Eigen::VectorXd::Zero(kStateDim * n);
  for (int t = steps - 1; t >= 0; --t) {
    // d_theta is the adjoint of the output of step t (iterate t + 1).
    d_theta += seed * tape.losses()[t].gradient;
    const StepRecord& rec = tape.steps()[t];
    StepAdjoint adj = step_backward(tape, rec, d_theta, opts.with_qc);
    d_theta = std::move(adj.d_input);
    report.d_log_sigma.col(t) = adj.d_log_sigma;
    report.d_sigma.col(t) = adj.d_log_sigma.cwiseQuotient(rec.sigma);
    d_qc += adj.d_qc;
    if (opts.sigma_hook) {
      Eigen::VectorXd extra = opts.sigma_hook(t, adj.d_log_sigma);
      if (extra.size() == d_theta.size()) d_theta += extra;
    }
  }
  report.d_theta0 = std::move(d_theta);
  if (opts.with_qc) report.d_qc = d_qc;
  return report;
}

}  // namespace dgpmp
