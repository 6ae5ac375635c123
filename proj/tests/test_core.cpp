#include "dgpmp/core.hpp"

#include <doctest.h>

using namespace dgpmp;

namespace {

Problem line_problem(State a, State b, int n, double t) {
  Problem p;
  p.start = a;
  p.goal = b;
  p.n_states = n;
  p.total_time = t;
  return p;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("straight line along x") {
    const Trajectory tr = straight_line_init(line_problem({0, 0}, {10, 0}, 11, 10.0));
    REQUIRE(tr.size() == 11);
    for (int i = 0; i < 11; ++i) {
      CHECK(tr.position(i).x() == doctest::Approx(i));
      CHECK(tr.position(i).y() == 0.0);
      CHECK(tr.velocity(i).x() == doctest::Approx(1.0));
      CHECK(tr.velocity(i).y() == 0.0);
    }
  }

  TEST_CASE("degenerate start equals goal") {
    const Trajectory tr = straight_line_init(line_problem({3, 3}, {3, 3}, 7, 4.0));
    for (int i = 0; i < tr.size(); ++i) {
      CHECK(tr.position(i) == Vec2(3, 3));
      CHECK(tr.velocity(i) == Vec2::Zero());
    }
  }

  TEST_CASE("two states") {
    const Trajectory tr = straight_line_init(line_problem({0, 0, 0, 0}, {4, 3, 0, 0}, 2, 5.0));
    REQUIRE(tr.size() == 2);
    CHECK(tr.position(0) == Vec2(0, 0));
    CHECK(tr.position(1) == Vec2(4, 3));
    CHECK(tr.velocity(0).x() == doctest::Approx(0.8));
    CHECK(tr.velocity(1).y() == doctest::Approx(0.6));
  }

  TEST_CASE("endpoints exact for awkward values") {
    const Trajectory tr = straight_line_init(line_problem({0.1, 0.7}, {9.3, 8.9}, 50, 10.0));
    CHECK(tr.position(0) == Vec2(0.1, 0.7));
    CHECK(tr.position(49) == Vec2(9.3, 8.9));
    CHECK(tr.dt() == doctest::Approx(10.0 / 49));
  }

  TEST_CASE("validation") {
    Problem p = line_problem({0, 0}, {1, 1}, 1, 1.0);
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.n_states = 5;
    p.total_time = 0.0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p.total_time = 1.0;
    p.start = State(std::nan(""), 0);
    CHECK_THROWS_AS(p.validate(), InvalidArgument);

    FixedParams f;
    f.q_c << 1, 2, 2, 1;
    CHECK_THROWS_AS(f.validate(), InvalidArgument);
    CHECK_THROWS_AS(LearnedParams::uniform(3, 0.0).validate(3), InvalidArgument);
    CHECK_THROWS_AS(LearnedParams::uniform(3, 1.0).validate(4), InvalidArgument);
  }

  TEST_CASE("trajectory layout is state-major") {
    Trajectory tr(std::vector<State>{State(1, 2, 3, 4), State(5, 6, 7, 8)}, 1.0);
    Eigen::VectorXd expect(8);
    expect << 1, 2, 3, 4, 5, 6, 7, 8;
    CHECK(tr.flat() == expect);
    CHECK(tr.state(1).velocity == Vec2(7, 8));
  }

  TEST_CASE("derived seeds differ per stream and are stable") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(42, 7) == derive_seed(42, 7));
  }
}
