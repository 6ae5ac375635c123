#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgpmp {

inline constexpr int kStateDim = 4;

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

/// Raised for malformed inputs: bad dimensions, non-SPD covariances,
/// non-positive standard deviations and so on.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Planar point-robot state [x, y, vx, vy].
struct State {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();

  State() = default;
  State(const Vec2& p, const Vec2& v) : position(p), velocity(v) {}
  State(double x, double y, double vx = 0.0, double vy = 0.0)
      : position(x, y), velocity(vx, vy) {}

  Vec4 vector() const {
    Vec4 out;
    out << position, velocity;
    return out;
  }
  static State from_vector(const Vec4& v) {
    return {v.head<2>(), v.tail<2>()};
  }
  bool finite() const { return position.allFinite() && velocity.allFinite(); }
};

/// N support states sampled uniformly in time, stored state-major as a flat
/// 4N vector [x1, y1, vx1, vy1, x2, ...].
class Trajectory {
 public:
  Trajectory(Eigen::VectorXd flat, double total_time);
  Trajectory(const std::vector<State>& states, double total_time);

  int size() const { return static_cast<int>(flat_.size() / kStateDim); }
  double total_time() const { return total_time_; }
  double dt() const { return total_time_ / (size() - 1); }

  const Eigen::VectorXd& flat() const { return flat_; }
  Eigen::VectorXd& flat() { return flat_; }

  State state(int i) const;
  Vec2 position(int i) const { return flat_.segment<2>(kStateDim * i); }
  Vec2 velocity(int i) const { return flat_.segment<2>(kStateDim * i + 2); }
  Vec4 block(int i) const { return flat_.segment<kStateDim>(kStateDim * i); }
  std::vector<State> states() const;

 private:
  Eigen::VectorXd flat_;
  double total_time_;
};

class Sdf;

/// User-set planning parameters that are never learned.
struct FixedParams {
  Mat2 q_c = 0.5 * Mat2::Identity();
  double eps_safe = 0.4;
  double robot_radius = 0.4;
  Mat4 k_start = 1e-6 * Mat4::Identity();
  Mat4 k_goal = 1e-6 * Mat4::Identity();
  double k_vel = 1e-4;
  std::optional<Vec2> v_max;

  double epsilon() const { return robot_radius + eps_safe; }
  void validate() const;
};

/// Per-state obstacle standard deviations; every entry strictly positive.
struct LearnedParams {
  Eigen::VectorXd sigma_obs;

  static LearnedParams uniform(int n, double sigma) {
    return {Eigen::VectorXd::Constant(n, sigma)};
  }
  void validate(int n) const;
};

struct Problem {
  State start;
  State goal;
  std::shared_ptr<const Sdf> sdf;
  FixedParams fixed;
  int n_states = 50;
  double total_time = 10.0;

  /// Throws InvalidArgument when counts, times or endpoints are unusable.
  void validate() const;
};

/// Constant-velocity straight line from start to goal. Endpoint positions
/// match the problem exactly; every velocity equals the average velocity.
Trajectory straight_line_init(const Problem& problem);

bool is_spd(const Eigen::MatrixXd& m);

/// Independent 64-bit seed for sub-stream `stream` of `base` (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace dgpmp
