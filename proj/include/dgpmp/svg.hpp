#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/env.hpp"

#include <string>
#include <vector>

namespace dgpmp::svg {

struct Segment {
  Vec2 a, b;
};

/// Marching-squares segments of {d = level} over the cell-center lattice.
std::vector<Segment> iso_contour(const Sdf& sdf, double level);

struct PlanFigure {
  const Sdf* sdf = nullptr;
  double contour_level = 0.0;
  std::vector<Trajectory> initializations;  // dashed red
  std::vector<Trajectory> solutions;        // solid blue
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  double robot_radius = 0.0;
  int width_px = 512;
  std::string title;
};

/// Occupied cells in gray, the contour at contour_level, trajectories,
/// start in green and goal in cyan. World y points up.
std::string render(const PlanFigure& fig);

}  // namespace dgpmp::svg
