#include "dgpmp/learn/checkpoint.hpp"
#include "dgpmp/learn/gradcheck.hpp"
#include "dgpmp/learn/loss.hpp"
#include "dgpmp/learn/network.hpp"
#include "dgpmp/learn/train.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace dgpmp;
using namespace dgpmp::learn;

namespace {

NetworkSpec tiny_spec(int n_states = 8) {
  NetworkSpec s;
  s.image_size = 8;
  s.n_states = n_states;
  s.conv_filters = {4, 4};
  s.fc_hidden = {16};
  s.dropout = 0.0;
  return s;
}

Problem small_problem(std::uint64_t seed, int n) {
  EnvSpec env = EnvSpec::defaults(EnvKind::kForest);
  env.extent = 4.0;
  env.cells = 16;
  env.min_obstacles = 2;
  env.max_obstacles = 4;
  env.min_size = 0.5;
  env.max_size = 0.9;
  env.start = Vec2(0.5, 0.5);
  env.goal = Vec2(3.5, 3.5);
  env.keep_free_margin = 0.4;
  env.seed = seed;
  Problem p;
  p.sdf = oracle::sdf_of(generate(env));
  p.start = State(0.5, 0.5);
  p.goal = State(3.5, 3.5);
  p.n_states = n;
  p.total_time = 4.0;
  p.fixed.robot_radius = 0.15;
  p.fixed.eps_safe = 0.15;
  return p;
}

/// Demonstration produced by the planner itself with a different constant
/// sigma, so a network can in principle match it.
TrainSample planner_sample(std::uint64_t seed, int n, double sigma, int image_size) {
  Problem p = small_problem(seed, n);
  PlannerConfig c;
  c.fixed_unroll = 6;
  const Trajectory expert = plan(p, constant_sigma(sigma), c).final;
  return TrainSample::make({p, expert}, image_size);
}

EnvImages images_for(const Problem& p, int size) { return EnvImages::from_sdf(*p.sdf, size); }

}  // namespace

TEST_SUITE("learn") {
  TEST_CASE("outputs are positive and sized per state") {
    const Network net(tiny_spec(), 1);
    const Problem p = small_problem(1, 8);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (int k = 0; k < 5; ++k) {
      Trajectory tr = straight_line_init(p);
      for (Eigen::Index i = 0; i < tr.flat().size(); ++i) tr.flat()[i] += 2.0 * n01(rng);
      const LearnedParams s = forward_w(net, images_for(p, 8), tr);
      CHECK(s.sigma_obs.size() == 8);
      CHECK((s.sigma_obs.array() > 0).all());
    }
  }

  TEST_CASE("evaluation forward is deterministic") {
    const Network net(tiny_spec(), 2);
    const Problem p = small_problem(2, 8);
    const auto img = images_for(p, 8);
    const Trajectory tr = straight_line_init(p);
    CHECK(forward_w(net, img, tr).sigma_obs == forward_w(net, img, tr).sigma_obs);
    CHECK(Network(tiny_spec(), 2).params()[0].data == net.params()[0].data);
  }

  TEST_CASE("zero output layer gives unit sigma") {
    Network net(tiny_spec(), 3);
    for (double& w : net.param("out.weight").data) w = 0.0;
    for (double& b : net.param("out.bias").data) b = 0.0;
    const Problem p = small_problem(3, 8);
    const LearnedParams s = forward_w(net, images_for(p, 8), straight_line_init(p));
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(s.sigma_obs[i] == 1.0);
  }

  TEST_CASE("forward rejects mismatched inputs") {
    const Network net(tiny_spec(), 4);
    const Problem p = small_problem(4, 8);
    CHECK_THROWS_AS(forward_w(net, images_for(p, 16), straight_line_init(p)), InvalidArgument);
    CHECK_THROWS_AS(forward_w(net, images_for(p, 8), straight_line_init(small_problem(4, 9))),
                    InvalidArgument);
  }

  TEST_CASE("imitation loss") {
    const Trajectory a(std::vector<State>{State(0, 0, 1, 1), State(1, 1, 1, 1)}, 1.0);
    CHECK(imitation_loss(a, a) == 0.0);
    Trajectory b = a;
    b.flat()[5] += 2.0;
    CHECK(imitation_loss(b, a) == doctest::Approx(4.0));
    Trajectory c = a;
    c.flat()[2] += 2.0;
    CHECK(imitation_loss(c, a, true) == 0.0);
    CHECK_THROWS_AS(imitation_loss(a, Trajectory(std::vector<State>{State(), State(), State()}, 1.0)), InvalidArgument);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(40, [&] { return n01(rng); });
    const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(40, [&] { return n01(rng); });
    double ref = 0.0;
    for (int i = 0; i < 40; ++i) ref += (x[i] - y[i]) * (x[i] - y[i]);
    CHECK(std::abs(imitation_loss(Trajectory(x, 2.0), Trajectory(y, 2.0)) - ref) <= 1e-12 * ref);
  }

  TEST_CASE("task loss") {
    Problem p = small_problem(5, 10);
    p.sdf = oracle::sdf_of(OccupancyGrid(16, 16, 0.25, Vec2(0.125, 0.125)));
    const PriorModel prior = build_prior(p);
    CHECK(task_loss(prior.mean, prior, *p.sdf, p.fixed, 1.0) == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(task_loss(prior.mean, prior, *p.sdf, p.fixed, 7.0) == doctest::Approx(0.0).epsilon(1e-18));
    const Problem q = small_problem(5, 10);
    Trajectory tr = straight_line_init(q);
    tr.flat()[4 * 4] += 0.3;
    CHECK(task_loss(tr, prior, *q.sdf, q.fixed, 0.0) == gp_energy(prior, tr));
  }

  TEST_CASE("task loss gradient matches finite differences") {
    const Problem p = small_problem(6, 10);
    const PriorModel prior = build_prior(p);
    Trajectory tr = straight_line_init(p);
    const IterateLoss l = task_loss_grad(tr, prior, *p.sdf, p.fixed, 2.0);
    const double h = 1e-6;
    for (Eigen::Index k = 4; k < tr.flat().size() - 4; ++k) {
      Trajectory a = tr, b = tr;
      a.flat()[k] += h;
      b.flat()[k] -= h;
      const double fp = task_loss(a, prior, *p.sdf, p.fixed, 2.0);
      const double fm = task_loss(b, prior, *p.sdf, p.fixed, 2.0);
      CHECK(std::abs((fp - fm) / (2 * h) - l.gradient[k]) <= 1e-4 * std::max(1.0, std::abs(l.gradient[k])));
    }
  }

  TEST_CASE("batch loss averaging") {
    CHECK(total_loss({{2.5}}) == 2.5);
    CHECK(total_loss({{4, 4, 4}, {4, 4, 4}}) == 4.0);
    CHECK(total_loss({{1, 2, 3}, {4, 5, 6}}) == 3.5);
    CHECK_THROWS_AS(total_loss({}), InvalidArgument);
    CHECK_THROWS_AS(total_loss({{1, 2}, {3}}), InvalidArgument);
  }

  TEST_CASE("zero learning rate leaves parameters unchanged") {
    TrainConfig c;
    c.network = tiny_spec();
    c.unroll = 2;
    c.batch = 2;
    c.epochs = 1;
    c.learning_rate = 0.0;
    c.norm_momentum = 0.0;
    const std::vector<TrainSample> set{planner_sample(1, 8, 0.3, 8), planner_sample(2, 8, 0.3, 8)};
    const Network init(c.network, c.seed);
    const TrainResult r = train(set, {}, c);
    for (std::size_t k = 0; k < init.params().size(); ++k)
      CHECK(r.network.params()[k].data == init.params()[k].data);

    Network net(c.network, 1);
    Optimizer opt(c);
    const Network before = net;
    std::vector<Tensor> g = net.zero_gradients();
    for (auto& t : g) std::fill(t.data.begin(), t.data.end(), 1.0);
    opt.step(net, g);
    CHECK(net.params()[0].data == before.params()[0].data);
  }

  TEST_CASE("gradient clipping bounds the update") {
    TrainConfig c;
    c.network = tiny_spec();
    c.learning_rate = 1.0;
    c.momentum = 0.0;
    c.grad_clip = 0.5;
    Network net(c.network, 2);
    const Network before = net;
    std::vector<Tensor> g = net.zero_gradients();
    for (auto& t : g) std::fill(t.data.begin(), t.data.end(), 100.0);
    Optimizer(c).step(net, g);
    double sq = 0.0;
    for (std::size_t k = 0; k < net.params().size(); ++k)
      for (std::size_t i = 0; i < net.params()[k].data.size(); ++i) {
        const double d = net.params()[k].data[i] - before.params()[k].data[i];
        sq += d * d;
      }
    CHECK(std::sqrt(sq) == doctest::Approx(0.5));
  }

  TEST_CASE("checkpoint round trip") {
    Network net(tiny_spec(), 9);
    net.buffers()[0].data[0] = 0.123;
    std::stringstream ss;
    write_checkpoint(ss, net);
    const Network back = read_checkpoint(ss);
    REQUIRE(back.params().size() == net.params().size());
    for (std::size_t k = 0; k < net.params().size(); ++k) {
      CHECK(back.params()[k].name == net.params()[k].name);
      CHECK(back.params()[k].data == net.params()[k].data);
    }
    CHECK(back.buffers()[0].data == net.buffers()[0].data);
    CHECK(to_json(back.spec()) == to_json(net.spec()));
    std::stringstream bad("NOTANET");
    CHECK_THROWS(read_checkpoint(bad));
  }

  TEST_CASE("seeded training repeats exactly") {
    TrainConfig c;
    c.network = tiny_spec();
    c.unroll = 2;
    c.batch = 2;
    c.epochs = 3;
    c.learning_rate = 1e-2;
    c.seed = 5;
    const std::vector<TrainSample> set{planner_sample(1, 8, 0.3, 8), planner_sample(2, 8, 0.3, 8),
                                       planner_sample(3, 8, 0.3, 8)};
    c.jobs = 1;
    const TrainResult a = train(set, {}, c);
    c.jobs = 3;
    const TrainResult b = train(set, {}, c);
    REQUIRE(a.log.size() == 3);
    for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.network.params().back().data == b.network.params().back().data);
  }

  TEST_CASE("training overfits a handful of problems") {
    TrainConfig c;
    c.network = tiny_spec(10);
    c.unroll = 3;
    c.batch = 5;
    c.epochs = 200;
    c.learning_rate = 1e-2;
    c.optimizer = OptimizerKind::kAdam;
    c.seed = 1;
    c.jobs = 4;
    std::vector<TrainSample> set;
    for (std::uint64_t s = 0; s < 5; ++s) set.push_back(planner_sample(10 + s, 10, 0.4, 8));
    const TrainResult r = train(set, {}, c);
    REQUIRE(r.log.size() == 200);
    MESSAGE("first epoch " << r.log.front().train_loss << ", last " << r.log.back().train_loss);
    CHECK(r.log.back().train_loss <= 0.5 * r.log.front().train_loss);
  }

  TEST_CASE("end-to-end gradient on a tiny configuration") {
    GradcheckConfig c;
    c.seed = 3;
    const GradcheckReport rep = gradcheck(c);
    CHECK(rep.params.checked > 500);
    CHECK(rep.log_sigma.checked > 0);
    int nonzero = 0;
    for (const auto& e : rep.entries) nonzero += e.analytic != 0.0;
    CHECK(nonzero > 100);
    CHECK(rep.ok);
  }
}
