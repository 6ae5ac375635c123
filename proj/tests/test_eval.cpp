#include "dgpmp/eval.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace dgpmp;
using namespace dgpmp::eval;

namespace {

/// Field d(x, y) = x on a unit lattice starting at x = 0, so d is exact at x = 0.4.
Sdf linear_x_field() {
  OccupancyGrid g(21, 21, 1.0, Vec2(0, -10));
  std::vector<double> d(g.cells().size());
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x < 21; ++x) d[g.index(x, y)] = g.cell_center(x, y).x();
  return Sdf(g, d);
}

Trajectory along_y(const std::vector<double>& xs) {
  std::vector<State> s;
  for (std::size_t i = 0; i < xs.size(); ++i) s.emplace_back(xs[i], static_cast<double>(i) * 0.1);
  return Trajectory(s, 1.0);
}

ProblemRecord record(const std::string& kind, bool success, double ci, double mse = 1.0) {
  ProblemRecord r;
  r.env_id = kind + std::to_string(ci);
  r.kind = kind;
  r.variant = "v";
  r.success = success;
  r.coll_intensity = ci;
  r.gp_mse = mse;
  r.iters = 3;
  return r;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("collision checks") {
    const Sdf free_sdf = compute_sdf(OccupancyGrid(8, 8, 1.0, Vec2::Zero()));
    CHECK(is_collision_free(along_y({1, 2, 3}), free_sdf, 0.4));
    const Sdf sdf = linear_x_field();
    CHECK(is_collision_free(along_y({1, 2, 0.41}), sdf, 0.4));
    CHECK_FALSE(is_collision_free(along_y({1, 2, 0.4}), sdf, 0.4));
    CHECK(collision_count(along_y({0.4, 0.3, 5.0, -1.0}), sdf, 0.4) == 3);
  }

  TEST_CASE("collision verdicts match a per-state loop") {
    std::mt19937_64 rng(6);
    const Sdf sdf = compute_sdf(oracle::random_grid(rng, 20, 20, 0.5, 0.15));
    std::uniform_real_distribution<double> u(0, 10);
    for (int k = 0; k < 200; ++k) {
      std::vector<State> s;
      for (int i = 0; i < 8; ++i) s.emplace_back(u(rng), u(rng));
      const Trajectory tr(s, 1.0);
      bool free = true;
      for (const auto& st : s) free = free && sdf.query_dist(st.position) > 0.3;
      REQUIRE(is_collision_free(tr, sdf, 0.3) == free);
    }
  }

  TEST_CASE("intensity counts colliding states") {
    const Sdf sdf = linear_x_field();
    std::vector<double> xs(100, 5.0);
    for (int i = 0; i < 5; ++i) xs[10 * i] = 0.0;
    CHECK(coll_intensity(along_y(xs), sdf, 0.4) == doctest::Approx(0.05));
    CHECK(coll_intensity(along_y({3, 3, 3}), sdf, 0.4) == 0.0);
  }

  TEST_CASE("intensity aggregates over colliding runs only") {
    std::vector<ProblemRecord> rs{record("forest", false, 0.05), record("forest", false, 0.15)};
    for (int i = 0; i < 8; ++i) rs.push_back(record("tarpit", true, 0.0));
    const MetricsRow row = aggregate(rs, "v", "mixed");
    CHECK(row.problems == 10);
    CHECK(row.coll_intensity == doctest::Approx(0.10));
    CHECK(row.success == doctest::Approx(0.8));
    CHECK(row.num_iters == doctest::Approx(3.0));
    CHECK(aggregate(rs, "v", "forest").success == 0.0);
    CHECK(aggregate(rs, "v", "tarpit").problems == 8);
  }

  TEST_CASE("smoothness is zero on the prior mean and symmetric in time") {
    Problem p;
    p.start = State(1, 2);
    p.goal = State(8, 5);
    p.n_states = 20;
    const PriorModel prior = build_prior(p);
    CHECK(gp_mse(prior.mean, prior) < 1e-20);

    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    Trajectory tr = prior.mean;
    for (Eigen::Index i = 0; i < tr.flat().size(); ++i) tr.flat()[i] += 0.2 * n01(rng);
    // Reversing time flips velocities; segment residuals change sign only.
    std::vector<State> rev;
    for (int i = tr.size() - 1; i >= 0; --i) rev.emplace_back(tr.position(i), -tr.velocity(i));
    Problem rp = p;
    std::swap(rp.start, rp.goal);
    CHECK(gp_mse(Trajectory(rev, tr.total_time()), build_prior(rp)) ==
          doctest::Approx(gp_mse(tr, prior)).epsilon(1e-10));
  }

  TEST_CASE("velocity violation") {
    std::vector<State> s(10, State(0, 0, 0.5, -0.5));
    CHECK(constraint_violation(Trajectory(s, 1.0), Vec2(1, 1)) == 0.0);
    s[3].velocity.x() = 1.2;
    CHECK(constraint_violation(Trajectory(s, 1.0), Vec2(1, 1)) == doctest::Approx(0.01));
    s[4].velocity.y() = -1.5;
    CHECK(constraint_violation(Trajectory(s, 1.0), Vec2(1, 1)) == doctest::Approx(0.035));
  }

  TEST_CASE("path length") {
    CHECK(path_length(along_y({0, 0, 0})) == doctest::Approx(0.2));
  }

  TEST_CASE("record files round trip") {
    std::vector<ProblemRecord> rs{record("forest", true, 0.0, 0.1234567890123),
                                  record("tarpit", false, 0.3)};
    rs[1].failure = "solver: pivot, block 3";
    rs[1].converged = true;
    rs[1].violation = 1e-17;
    std::stringstream ss;
    write_records_csv(ss, rs);
    const auto back = read_records_csv(ss);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].env_id == rs[i].env_id);
      CHECK(back[i].kind == rs[i].kind);
      CHECK(back[i].success == rs[i].success);
      CHECK(back[i].gp_mse == rs[i].gp_mse);
      CHECK(back[i].coll_intensity == rs[i].coll_intensity);
      CHECK(back[i].violation == rs[i].violation);
      CHECK(back[i].converged == rs[i].converged);
      CHECK(back[i].failure == rs[i].failure);
    }
  }

  TEST_CASE("experiments reuse completed records") {
    std::vector<EvalProblem> data;
    for (int i = 0; i < 4; ++i) {
      EnvSpec spec = EnvSpec::defaults(i % 2 ? EnvKind::kTarpit : EnvKind::kForest);
      spec.seed = i;
      Problem p;
      p.sdf = oracle::sdf_of(generate(spec));
      p.start = State(1, 1);
      p.goal = State(9, 9);
      p.fixed.robot_radius = 0.2;
      data.push_back({"env" + std::to_string(i), spec.kind, p});
    }
    const std::vector<PlannerVariant> variants{{"a", 0.15, nullptr}, {"b", 0.01, nullptr}};
    const ExperimentResult full = run_experiment(data, variants, {}, 2);
    REQUIRE(full.records.size() == 8);
    CHECK(full.records[0].variant == "a");
    CHECK(full.records[4].variant == "b");
    CHECK(full.rows.size() == 6);

    std::vector<ProblemRecord> partial(full.records.begin(), full.records.begin() + 3);
    partial[0].gp_mse = -1.0;  // marker: must be kept, not recomputed
    const ExperimentResult resumed = run_experiment(data, variants, {}, 1, partial);
    CHECK(resumed.records[0].gp_mse == -1.0);
    for (std::size_t i = 1; i < 8; ++i) CHECK(resumed.records[i].gp_mse == full.records[i].gp_mse);
  }
}
