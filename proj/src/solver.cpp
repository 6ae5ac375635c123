#include "dgpmp/solver.hpp"

#include <string>

namespace dgpmp {

Eigen::MatrixXd LinearizedSystem::dense() const {
  const int n = blocks();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  for (int i = 0; i < n; ++i) m.block<4, 4>(4 * i, 4 * i) = diag[i];
  for (int i = 0; i + 1 < n; ++i) {
    m.block<4, 4>(4 * (i + 1), 4 * i) = lower[i];
    m.block<4, 4>(4 * i, 4 * (i + 1)) = lower[i].transpose();
  }
  return m;
}

Eigen::VectorXd LinearizedSystem::multiply(const Eigen::VectorXd& x) const {
  const int n = blocks();
  Eigen::VectorXd y(4 * n);
  for (int i = 0; i < n; ++i) {
    Vec4 acc = diag[i] * x.segment<4>(4 * i);
    if (i > 0) acc += lower[i - 1] * x.segment<4>(4 * (i - 1));
    if (i + 1 < n) acc += lower[i].transpose() * x.segment<4>(4 * (i + 1));
    y.segment<4>(4 * i) = acc;
  }
  return y;
}

LinearizedSystem assemble(const PriorModel& prior, const Trajectory& traj,
                          const StackedLikelihood& likelihood) {
  const int n = traj.size();
  if (n != prior.size()) throw InvalidArgument("trajectory/prior size mismatch");
  if (static_cast<int>(prior.segments.size()) != n - 1)
    throw InvalidArgument("prior segment count mismatch");
  for (const auto& row : likelihood.rows)
    if (row.state < 0 || row.state >= n) throw InvalidArgument("likelihood row out of range");

  LinearizedSystem sys;
  sys.diag.assign(n, Mat4::Zero());
  sys.lower.assign(n - 1, Mat4::Zero());
  sys.rhs = Eigen::VectorXd::Zero(4 * n);

  for (int i = 0; i + 1 < n; ++i) {
    const GpSegment& seg = prior.segments[i];
    const Eigen::Matrix<double, 8, 8> info = segment_information(seg);
    sys.diag[i] += info.block<4, 4>(0, 0);
    sys.diag[i + 1] += info.block<4, 4>(4, 4);
    sys.lower[i] += info.block<4, 4>(4, 0);
    const Vec4 w = seg.q_inv * gp_residual(prior, traj, i);
    sys.rhs.segment<4>(4 * i) += seg.phi.transpose() * w;
    sys.rhs.segment<4>(4 * (i + 1)) -= w;
  }
  sys.diag[0] += prior.k_start_inv;
  sys.rhs.segment<4>(0) -= prior.k_start_inv * (traj.block(0) - prior.start_target);
  sys.diag[n - 1] += prior.k_goal_inv;
  sys.rhs.segment<4>(4 * (n - 1)) -= prior.k_goal_inv * (traj.block(n - 1) - prior.goal_target);

  for (const auto& row : likelihood.rows) {
    if (row.jacobian.isZero(0.0) && row.residual == 0.0) continue;
    sys.diag[row.state] += row.weight * row.jacobian.transpose() * row.jacobian;
    sys.rhs.segment<4>(4 * row.state) -= row.weight * row.residual * row.jacobian.transpose();
  }
  return sys;
}

BlockCholesky::BlockCholesky(const LinearizedSystem& system, double damping) {
  const int n = system.blocks();
  diag_.resize(n);
  lower_.resize(n > 0 ? n - 1 : 0);
  for (int i = 0; i < n; ++i) {
    Mat4 d = system.diag[i];
    if (damping != 0.0) d += damping * Mat4::Identity();
    if (i > 0) {
      // L(i, i-1) = M(i, i-1) L(i-1, i-1)^-T
      lower_[i - 1] = diag_[i - 1]
                          .triangularView<Eigen::Lower>()
                          .solve(system.lower[i - 1].transpose())
                          .transpose();
      d -= lower_[i - 1] * lower_[i - 1].transpose();
      ops_ += 2;
    }
    Eigen::LLT<Mat4> llt(d);
    ++ops_;
    if (llt.info() != Eigen::Success)
      throw SingularSystemError(i, "non-positive pivot in block " + std::to_string(i));
    diag_[i] = llt.matrixL();
  }
}

Eigen::VectorXd BlockCholesky::solve(const Eigen::VectorXd& b, long long* ops) const {
  const int n = blocks();
  long long count = 0;
  if (b.size() != 4 * n) throw InvalidArgument("rhs size does not match system");
  Eigen::VectorXd y(4 * n);
  for (int i = 0; i < n; ++i) {
    Vec4 r = b.segment<4>(4 * i);
    if (i > 0) {
      r -= lower_[i - 1] * y.segment<4>(4 * (i - 1));
      ++count;
    }
    y.segment<4>(4 * i) = diag_[i].triangularView<Eigen::Lower>().solve(r);
    ++count;
  }
  Eigen::VectorXd x(4 * n);
  for (int i = n - 1; i >= 0; --i) {
    Vec4 r = y.segment<4>(4 * i);
    if (i + 1 < n) {
      r -= lower_[i].transpose() * x.segment<4>(4 * (i + 1));
      ++count;
    }
    x.segment<4>(4 * i) = diag_[i].transpose().triangularView<Eigen::Upper>().solve(r);
    ++count;
  }
  if (ops) *ops += count;
  return x;
}

Eigen::VectorXd solve(const LinearizedSystem& system, const SolveOptions& opts) {
  try {
    return BlockCholesky(system).solve(system.rhs);
  } catch (const SingularSystemError&) {
    if (opts.fallback_damping <= 0.0) throw;
    return BlockCholesky(system, opts.fallback_damping).solve(system.rhs);
  }
}

}  // namespace dgpmp
