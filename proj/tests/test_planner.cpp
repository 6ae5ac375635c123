#include "dgpmp/planner.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace dgpmp;

namespace {

Problem empty_problem(int n = 20) {
  Problem p;
  p.sdf = oracle::sdf_of(dgpmp::OccupancyGrid(40, 40, 0.25, Vec2(0.125, 0.125)));
  p.start = State(1, 1);
  p.goal = State(9, 8);
  p.n_states = n;
  p.total_time = 10.0;
  return p;
}

Problem box_problem() {
  Problem p;
  p.sdf = oracle::sdf_of(oracle::box_grid(40, 10.0, {{Vec2(4, 4), Vec2(6, 6)}}));
  p.start = State(1, 1);
  p.goal = State(9, 9);
  p.n_states = 30;
  p.total_time = 10.0;
  return p;
}

}  // namespace

TEST_SUITE("planner") {
  TEST_CASE("prior mean is a fixed point of the step") {
    const Problem p = empty_problem();
    const PriorModel prior = build_prior(p);
    const Trajectory out = step(prior.mean, p, LearnedParams::uniform(p.n_states, 0.1));
    CHECK((out.flat() - prior.mean.flat()).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("empty environment converges after one iteration") {
    const Problem p = empty_problem();
    const PlanResult r = plan(p, constant_sigma(0.05));
    CHECK(r.converged);
    CHECK(r.iterations_used == 1);
    CHECK(r.iterates.size() == 2);
    CHECK(r.objectives.size() == 2);
    CHECK_FALSE(r.error);
    const Trajectory line = straight_line_init(p);
    CHECK((r.final.flat() - line.flat()).cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("one step solves a pure quadratic problem exactly") {
    const Problem p = empty_problem(12);
    const PriorModel prior = build_prior(p);
    Trajectory init = prior.mean;
    for (int i = 1; i + 1 < init.size(); ++i) init.flat()[4 * i + 1] += 0.3 * std::sin(i);
    const LearnedParams sigma = LearnedParams::uniform(p.n_states, 0.1);
    const Trajectory one = step(init, p, sigma);
    const Eigen::MatrixXd k_inv = oracle::dense_prior_information(prior);
    // Minimizer of the quadratic prior energy is the mean.
    CHECK((one.flat() - prior.mean.flat()).cwiseAbs().maxCoeff() < 1e-8);
    const StepWork w = linearize_and_solve(one, p, prior, sigma);
    CHECK(w.delta.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((k_inv * (one.flat() - prior.mean.flat())).cwiseAbs().maxCoeff() < 1e-5);
  }

  TEST_CASE("fixed unroll runs exactly the requested steps") {
    PlannerConfig c;
    c.fixed_unroll = 10;
    const PlanResult r = plan(empty_problem(), constant_sigma(0.05), c);
    CHECK(r.iterations_used == 10);
    CHECK(r.iterates.size() == 11);
    CHECK_FALSE(r.converged);
  }

  TEST_CASE("planning is bit-identical across runs") {
    const Problem p = box_problem();
    const PlanResult a = plan(p, constant_sigma(0.02));
    const PlanResult b = plan(p, constant_sigma(0.02));
    CHECK(a.iterations_used == b.iterations_used);
    CHECK(a.final.flat() == b.final.flat());
    CHECK(a.objectives == b.objectives);
  }

  TEST_CASE("small sigma routes around a blocking box") {
    Problem p = box_problem();
    p.fixed.robot_radius = 0.4;
    p.fixed.eps_safe = 0.4;
    const PlanResult r = plan(p, constant_sigma(0.01));
    REQUIRE_FALSE(r.error);
    for (int i = 0; i < r.final.size(); ++i)
      CHECK(p.sdf->query_dist(r.final.position(i)) > p.fixed.robot_radius);
  }

  TEST_CASE("backtracking never raises the objective") {
    Problem p = box_problem();
    p.fixed.robot_radius = 0.4;
    p.fixed.eps_safe = 0.4;
    PlannerConfig c;
    c.max_backtracks = 20;
    const PlanResult r = plan(p, constant_sigma(0.01), c);
    REQUIRE_FALSE(r.error);
    for (std::size_t k = 1; k < r.objectives.size(); ++k)
      CHECK(r.objectives[k] <= r.objectives[k - 1]);
    CHECK(r.converged);
  }

  TEST_CASE("fixed unroll ignores backtracking") {
    const Problem p = box_problem();
    PlannerConfig plain, bt;
    plain.fixed_unroll = bt.fixed_unroll = 6;
    bt.max_backtracks = 8;
    const PlanResult a = plan(p, constant_sigma(0.05), plain);
    const PlanResult b = plan(p, constant_sigma(0.05), bt);
    CHECK(a.final.flat() == b.final.flat());
  }

  TEST_CASE("configuration validation") {
    PlannerConfig c;
    c.t_max = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.fixed_unroll = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.max_backtracks = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    const Problem p = empty_problem();
    CHECK_THROWS_AS(plan_from(p, straight_line_init(empty_problem(5)), constant_sigma(0.1)),
                    InvalidArgument);
  }
}
