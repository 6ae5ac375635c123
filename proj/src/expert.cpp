#include "dgpmp/expert.hpp"

#include "dgpmp/eval.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace dgpmp {

void ExpertConfig::validate() const {
  if (iterations < 1) throw InvalidArgument("expert iterations must be >= 1");
  if (!(steer_step > 0.0)) throw InvalidArgument("steer step must be > 0");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) throw InvalidArgument("goal bias must lie in [0, 1]");
  if (!(rewire_gamma > 0.0 && rewire_max > 0.0)) throw InvalidArgument("rewire radius must be > 0");
  if (!(edge_check_fraction > 0.0)) throw InvalidArgument("edge check fraction must be > 0");
  if (!(extra_clearance >= 0.0)) throw InvalidArgument("extra clearance must be >= 0");
  if (!(smoothing_sigma > 0.0)) throw InvalidArgument("smoothing sigma must be > 0");
  if (!is_spd(q_c)) throw InvalidArgument("expert Q_c must be SPD");
  smoothing.validate();
}

bool edge_free(const Vec2& a, const Vec2& b, const Sdf& sdf, double clearance, double check_step) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / check_step)));
  for (int k = 0; k <= steps; ++k) {
    const Vec2 p = a + (b - a) * (static_cast<double>(k) / steps);
    if (!(sdf.query_dist(p) > clearance)) return false;
  }
  return true;
}

double polyline_length(const std::vector<Vec2>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

std::vector<Vec2> shortcut_path(const std::vector<Vec2>& path, const Sdf& sdf, double clearance,
                                double check_step) {
  if (path.size() <= 2) return path;
  std::vector<Vec2> out{path.front()};
  std::size_t i = 0;
  while (i + 1 < path.size()) {
    std::size_t j = path.size() - 1;
    while (j > i + 1 && !edge_free(path[i], path[j], sdf, clearance, check_step)) --j;
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

namespace {

struct Node {
  Vec2 p;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

void propagate_cost(std::vector<Node>& tree, int root) {
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (int c : tree[n].children) {
      tree[c].cost = tree[n].cost + (tree[c].p - tree[n].p).norm();
      stack.push_back(c);
    }
  }
}

void reparent(std::vector<Node>& tree, int node, int new_parent) {
  auto& siblings = tree[tree[node].parent].children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), node));
  tree[node].parent = new_parent;
  tree[new_parent].children.push_back(node);
  tree[node].cost = tree[new_parent].cost + (tree[node].p - tree[new_parent].p).norm();
  propagate_cost(tree, node);
}

}  // namespace

RrtResult rrt_star(const Problem& problem, const ExpertConfig& config) {
  config.validate();
  if (!problem.sdf) throw InvalidArgument("rrt_star needs an SDF");
  const Sdf& sdf = *problem.sdf;
  const OccupancyGrid& grid = sdf.grid();
  const double r = problem.fixed.robot_radius;
  const double clearance = r + config.extra_clearance;
  const double check = config.edge_check_fraction * grid.resolution();
  const Vec2 start = problem.start.position;
  const Vec2 goal = problem.goal.position;

  RrtResult out;
  if (!(sdf.query_dist(start) > r) || !(sdf.query_dist(goal) > r)) return out;
  if ((goal - start).norm() == 0.0) {
    out.found = true;
    out.path = {start};
    out.tree_size = 1;
    return out;
  }
  // Endpoints may sit inside the extra margin; only the robot radius binds there.
  auto free_edge = [&](const Vec2& a, const Vec2& b, bool touches_endpoint) {
    return edge_free(a, b, sdf, touches_endpoint ? r : clearance, check);
  };

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec2 lo = grid.origin();
  const Vec2 span = grid.resolution() * Vec2(grid.width() - 1, grid.height() - 1);

  std::vector<Node> tree{{start, -1, 0.0, {}}};
  std::vector<int> goal_parents;
  for (int it = 0; it < config.iterations; ++it) {
    Vec2 sample = goal;
    if (unit(rng) >= config.goal_bias) sample = lo + Vec2(unit(rng) * span.x(), unit(rng) * span.y());

    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(tree.size()); ++i) {
      const double d = (tree[i].p - sample).squaredNorm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    const Vec2 from = tree[nearest].p;
    const double dist = std::sqrt(best);
    if (dist == 0.0) continue;
    const Vec2 q = dist > config.steer_step ? Vec2(from + (sample - from) * (config.steer_step / dist))
                                            : sample;
    const bool q_is_goal = q == goal;
    if (!free_edge(from, q, nearest == 0 || q_is_goal)) continue;

    const double n = static_cast<double>(tree.size() + 1);
    const double radius =
        std::min(config.rewire_gamma * std::sqrt(std::log(n) / n), config.rewire_max);
    std::vector<int> near;
    for (int i = 0; i < static_cast<int>(tree.size()); ++i)
      if ((tree[i].p - q).norm() <= radius) near.push_back(i);

    int parent = nearest;
    double cost = tree[nearest].cost + (q - from).norm();
    for (int i : near) {
      const double c = tree[i].cost + (q - tree[i].p).norm();
      if (c < cost && free_edge(tree[i].p, q, i == 0 || q_is_goal)) {
        parent = i;
        cost = c;
      }
    }
    const int id = static_cast<int>(tree.size());
    tree.push_back({q, parent, cost, {}});
    tree[parent].children.push_back(id);

    for (int i : near) {
      if (i == parent || i == 0) continue;
      const double c = cost + (tree[i].p - q).norm();
      if (c < tree[i].cost && free_edge(q, tree[i].p, q_is_goal)) reparent(tree, i, id);
    }

    if (q_is_goal)
      goal_parents.push_back(id);
    else if ((goal - q).norm() <= config.steer_step && free_edge(q, goal, true))
      goal_parents.push_back(id);
  }
  out.tree_size = static_cast<int>(tree.size());

  int best_node = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i : goal_parents) {
    const double c = tree[i].cost + (goal - tree[i].p).norm();
    if (c < best_cost) {
      best_cost = c;
      best_node = i;
    }
  }
  if (best_node < 0) return out;

  std::vector<Vec2> path;
  if (tree[best_node].p != goal) path.push_back(goal);
  for (int i = best_node; i >= 0; i = tree[i].parent) path.push_back(tree[i].p);
  std::reverse(path.begin(), path.end());
  if (config.shortcut) path = shortcut_path(path, sdf, r, check);
  out.found = true;
  out.path = std::move(path);
  out.cost = polyline_length(out.path);
  return out;
}

Trajectory retime(const std::vector<Vec2>& path, int n, double total_time) {
  if (path.empty()) throw InvalidArgument("cannot retime an empty path");
  if (n < 2) throw InvalidArgument("retime needs at least 2 states");
  if (!(total_time > 0.0)) throw InvalidArgument("retime needs total_time > 0");
  std::vector<double> s(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) s[i] = s[i - 1] + (path[i] - path[i - 1]).norm();
  const double len = s.back();

  std::vector<Vec2> pos(n);
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      pos[k] = path.front();
      continue;
    }
    if (k == n - 1 || path.size() == 1) {
      pos[k] = path.back();
      continue;
    }
    const double target = len * k / (n - 1);
    while (seg + 2 < path.size() && s[seg + 1] < target) ++seg;
    const double l = s[seg + 1] - s[seg];
    const double u = l > 0.0 ? std::clamp((target - s[seg]) / l, 0.0, 1.0) : 0.0;
    pos[k] = path[seg] + u * (path[seg + 1] - path[seg]);
  }
  const double dt = total_time / (n - 1);
  std::vector<State> states(n);
  for (int k = 0; k < n; ++k) {
    Vec2 v;
    if (k == 0)
      v = (pos[1] - pos[0]) / dt;
    else if (k == n - 1)
      v = (pos[n - 1] - pos[n - 2]) / dt;
    else
      v = (pos[k + 1] - pos[k - 1]) / (2.0 * dt);
    states[k] = State(pos[k], v);
  }
  return Trajectory(states, total_time);
}

DemoResult make_demo(const Problem& problem, const ExpertConfig& config) {
  DemoResult out;
  const RrtResult rrt = rrt_star(problem, config);
  out.rrt_iterations = config.iterations;
  out.rrt_cost = rrt.cost;
  if (!rrt.found) {
    out.failure = "rrt_star found no path";
    return out;
  }
  Problem smooth = problem;
  smooth.fixed.q_c = config.q_c;
  const Trajectory init = retime(rrt.path, problem.n_states, problem.total_time);
  const PlanResult res = plan_from(smooth, init, constant_sigma(config.smoothing_sigma),
                                   config.smoothing);
  out.smoothing_iterations = res.iterations_used;
  if (res.error) {
    out.failure = "smoothing failed: " + *res.error;
    return out;
  }
  if (!eval::is_collision_free(res.final, *problem.sdf, problem.fixed.robot_radius)) {
    out.failure = "smoothed trajectory collides";
    return out;
  }
  out.demo = learn::Demonstration{problem, res.final};
  return out;
}

}  // namespace dgpmp
