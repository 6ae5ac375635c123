#include "dgpmp/expert.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace dgpmp;

namespace {

Problem problem_on(const OccupancyGrid& g, Vec2 a, Vec2 b, double radius = 0.2) {
  Problem p;
  p.sdf = oracle::sdf_of(g);
  p.start = State(a.x(), a.y());
  p.goal = State(b.x(), b.y());
  p.n_states = 30;
  p.total_time = 10.0;
  p.fixed.robot_radius = radius;
  p.fixed.eps_safe = radius;
  return p;
}

/// Vertical wall at x in [4.5, 5.5] with an optional gap around y in [gap_lo, gap_hi].
OccupancyGrid wall(double gap_lo, double gap_hi) {
  std::vector<std::pair<Vec2, Vec2>> boxes;
  if (gap_lo > 0) boxes.push_back({Vec2(4.5, -1), Vec2(5.5, gap_lo)});
  boxes.push_back({Vec2(4.5, gap_hi), Vec2(5.5, 11)});
  return oracle::box_grid(40, 10.0, boxes);
}

ExpertConfig fast_config(std::uint64_t seed = 0) {
  ExpertConfig c;
  c.iterations = 3000;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("expert") {
  TEST_CASE("free space gives a single segment") {
    const Problem p = problem_on(OccupancyGrid(40, 40, 0.25, Vec2(0.125, 0.125)), {1, 1}, {9, 8});
    const RrtResult r = rrt_star(p, fast_config());
    REQUIRE(r.found);
    REQUIRE(r.path.size() == 2);
    CHECK(r.path.front() == Vec2(1, 1));
    CHECK(r.path.back() == Vec2(9, 8));
    CHECK(r.cost == doctest::Approx((Vec2(9, 8) - Vec2(1, 1)).norm()));
  }

  TEST_CASE("coincident start and goal") {
    const Problem p = problem_on(OccupancyGrid(40, 40, 0.25, Vec2(0.125, 0.125)), {3, 3}, {3, 3});
    const RrtResult r = rrt_star(p, fast_config());
    REQUIRE(r.found);
    CHECK(polyline_length(r.path) == 0.0);
  }

  TEST_CASE("path exists exactly when the grid is connected") {
    struct Case {
      double lo, hi;
    };
    for (const Case c : {Case{6.0, 7.5}, Case{2.0, 3.5}, Case{-1.0, 12.0}}) {
      const OccupancyGrid g = c.lo < 0 ? wall(0, 0) : wall(c.lo, c.hi);
      const Problem p = problem_on(g, {1, 5}, {9, 5});
      const bool reachable = oracle::grid_reachable(*p.sdf, {1, 5}, {9, 5}, p.fixed.robot_radius);
      const RrtResult r = rrt_star(p, fast_config(3));
      CHECK(r.found == reachable);
      if (r.found) {
        const double step = 0.25 * p.sdf->grid().resolution();
        for (std::size_t i = 0; i + 1 < r.path.size(); ++i)
          CHECK(edge_free(r.path[i], r.path[i + 1], *p.sdf, p.fixed.robot_radius, step));
        bool through_gap = false;
        for (std::size_t i = 0; i + 1 < r.path.size(); ++i) {
          const Vec2 a = r.path[i], b = r.path[i + 1];
          if ((a.x() - 5) * (b.x() - 5) > 0) continue;
          const double y = a.y() + (b.y() - a.y()) * (5 - a.x()) / (b.x() - a.x());
          through_gap |= y > c.lo && y < c.hi;
        }
        CHECK(through_gap);
      }
    }
  }

  TEST_CASE("blocked start fails") {
    const Problem p = problem_on(wall(6.0, 7.5), {5, 1}, {9, 5});
    CHECK_FALSE(rrt_star(p, fast_config()).found);
    CHECK_FALSE(make_demo(p, fast_config()).demo);
  }

  TEST_CASE("retiming keeps endpoints and arc length") {
    const std::vector<Vec2> path{{0, 0}, {3, 0}, {3, 4}, {7, 7}};
    for (int n : {2, 10, 50, 101}) {
      const Trajectory tr = retime(path, n, 10.0);
      CHECK(tr.position(0) == path.front());
      CHECK(tr.position(n - 1) == path.back());
      double len = 0.0;
      for (int i = 0; i + 1 < n; ++i) len += (tr.position(i + 1) - tr.position(i)).norm();
      if (n >= 50) CHECK(std::abs(len - polyline_length(path)) <= 0.01 * polyline_length(path));
      CHECK(len <= polyline_length(path) + 1e-9);
    }
    const Trajectory still = retime({Vec2(2, 2)}, 5, 1.0);
    for (int i = 0; i < 5; ++i) CHECK(still.velocity(i).isZero());
  }

  TEST_CASE("free space demonstration is the straight line") {
    const Problem p = problem_on(OccupancyGrid(40, 40, 0.25, Vec2(0.125, 0.125)), {1, 1}, {9, 8});
    const DemoResult d = make_demo(p, fast_config());
    REQUIRE(d.demo);
    const Trajectory line = straight_line_init(p);
    CHECK((d.demo->expert.flat() - line.flat()).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("demonstration avoids a tarpit cluster") {
    EnvSpec spec = EnvSpec::defaults(EnvKind::kTarpit);
    spec.seed = 4;
    Problem p = problem_on(generate(spec), spec.start, spec.goal, 0.4);
    p.n_states = 50;
    const DemoResult d = make_demo(p, fast_config(1));
    REQUIRE(d.demo);
    for (int i = 0; i < d.demo->expert.size(); ++i)
      CHECK(p.sdf->query_dist(d.demo->expert.position(i)) > p.fixed.robot_radius);
  }

  TEST_CASE("fixed seed repeats the demonstration") {
    EnvSpec spec = EnvSpec::defaults(EnvKind::kForest);
    spec.seed = 2;
    const Problem p = problem_on(generate(spec), spec.start, spec.goal);
    const DemoResult a = make_demo(p, fast_config(9));
    const DemoResult b = make_demo(p, fast_config(9));
    REQUIRE(a.demo);
    REQUIRE(b.demo);
    CHECK(a.demo->expert.flat() == b.demo->expert.flat());
    CHECK(a.rrt_cost == b.rrt_cost);
  }
}
