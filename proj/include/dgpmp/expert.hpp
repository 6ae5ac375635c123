#pragma once

#include "dgpmp/learn/loss.hpp"
#include "dgpmp/planner.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dgpmp {

struct ExpertConfig {
  int iterations = 5000;
  double steer_step = 0.5;  // meters
  double goal_bias = 0.05;
  /// Neighborhood radius gamma * sqrt(log n / n), capped at rewire_max.
  double rewire_gamma = 14.0;
  double rewire_max = 2.0;
  /// Edge checks sample every edge_check_fraction * grid resolution meters.
  double edge_check_fraction = 0.25;
  /// Added to the robot radius for tree edges so smoothing starts with slack.
  double extra_clearance = 0.05;
  bool shortcut = true;
  double smoothing_sigma = 0.01;
  Mat2 q_c = 0.5 * Mat2::Identity();
  /// Backtracking keeps smoothing from stepping back into the obstacles it
  /// started clear of.
  PlannerConfig smoothing = [] {
    PlannerConfig c;
    c.max_backtracks = 8;
    return c;
  }();
  std::uint64_t seed = 0;

  void validate() const;
};

struct RrtResult {
  bool found = false;
  std::vector<Vec2> path;  // start first, goal last
  double cost = 0.0;
  int tree_size = 0;
};

/// RRT* over 2D positions followed by an optional greedy shortcut pass.
RrtResult rrt_star(const Problem& problem, const ExpertConfig& config);

/// Greedy pruning: from each kept vertex jump to the farthest vertex reachable
/// by a free straight edge.
std::vector<Vec2> shortcut_path(const std::vector<Vec2>& path, const Sdf& sdf, double clearance,
                                double check_step);

/// True if every sample along [a, b] taken at most `check_step` apart has
/// clearance strictly above `clearance`.
bool edge_free(const Vec2& a, const Vec2& b, const Sdf& sdf, double clearance, double check_step);

double polyline_length(const std::vector<Vec2>& path);

/// n states at constant speed along arc length over total_time. Velocities
/// are finite differences of the retimed positions.
Trajectory retime(const std::vector<Vec2>& path, int n, double total_time);

struct DemoResult {
  std::optional<learn::Demonstration> demo;
  std::string failure;  // empty on success
  int rrt_iterations = 0;
  double rrt_cost = 0.0;
  int smoothing_iterations = 0;
};

DemoResult make_demo(const Problem& problem, const ExpertConfig& config);

}  // namespace dgpmp
