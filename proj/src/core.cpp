#include "dgpmp/core.hpp"

#include "dgpmp/env.hpp"

#include <cmath>

namespace dgpmp {

Trajectory::Trajectory(Eigen::VectorXd flat, double total_time)
    : flat_(std::move(flat)), total_time_(total_time) {
  if (flat_.size() % kStateDim != 0 || flat_.size() < 2 * kStateDim)
    throw InvalidArgument("trajectory needs at least two 4D states");
  if (!(total_time_ > 0.0) || !std::isfinite(total_time_))
    throw InvalidArgument("trajectory total_time must be positive");
}

Trajectory::Trajectory(const std::vector<State>& states, double total_time)
    : Trajectory(
          [&] {
            Eigen::VectorXd v(kStateDim * states.size());
            for (std::size_t i = 0; i < states.size(); ++i)
              v.segment<kStateDim>(kStateDim * i) = states[i].vector();
            return v;
          }(),
          total_time) {}

State Trajectory::state(int i) const { return State::from_vector(block(i)); }

std::vector<State> Trajectory::states() const {
  std::vector<State> out;
  out.reserve(size());
  for (int i = 0; i < size(); ++i) out.push_back(state(i));
  return out;
}

bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

void FixedParams::validate() const {
  if (!is_spd(q_c)) throw InvalidArgument("q_c must be symmetric positive definite");
  if (!is_spd(k_start)) throw InvalidArgument("k_start must be SPD");
  if (!is_spd(k_goal)) throw InvalidArgument("k_goal must be SPD");
  if (!(eps_safe >= 0.0)) throw InvalidArgument("eps_safe must be >= 0");
  if (!(robot_radius > 0.0)) throw InvalidArgument("robot_radius must be > 0");
  if (!(k_vel > 0.0)) throw InvalidArgument("k_vel must be > 0");
  if (v_max && !((*v_max).array() > 0.0).all())
    throw InvalidArgument("v_max components must be > 0");
}

void LearnedParams::validate(int n) const {
  if (sigma_obs.size() != n)
    throw InvalidArgument("sigma_obs length " + std::to_string(sigma_obs.size()) +
                          " does not match " + std::to_string(n) + " states");
  for (int i = 0; i < n; ++i)
    if (!(sigma_obs[i] > 0.0) || !std::isfinite(sigma_obs[i]))
      throw InvalidArgument("sigma_obs entries must be finite and > 0");
}

void Problem::validate() const {
  if (n_states < 2) throw InvalidArgument("n_states must be >= 2");
  if (!(total_time > 0.0)) throw InvalidArgument("total_time must be > 0");
  if (!start.finite() || !goal.finite()) throw InvalidArgument("non-finite endpoint");
  fixed.validate();
  if (sdf) {
    if (!sdf->grid().contains(start.position))
      throw InvalidArgument("start lies outside the SDF extent");
    if (!sdf->grid().contains(goal.position))
      throw InvalidArgument("goal lies outside the SDF extent");
  }
}

Trajectory straight_line_init(const Problem& problem) {
  const int n = problem.n_states;
  const Vec2 avg_vel = (problem.goal.position - problem.start.position) / problem.total_time;
  Eigen::VectorXd flat(kStateDim * n);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    Vec2 p = (1.0 - s) * problem.start.position + s * problem.goal.position;
    if (i == 0) p = problem.start.position;
    if (i == n - 1) p = problem.goal.position;
    flat.segment<2>(kStateDim * i) = p;
    flat.segment<2>(kStateDim * i + 2) = avg_vel;
  }
  return Trajectory(std::move(flat), problem.total_time);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix(base ^ splitmix(stream));
}

}  // namespace dgpmp
