#include "dgpmp/learn/gradcheck.hpp"

#include <cmath>
#include <random>

namespace dgpmp::learn {

namespace {

struct Setup {
  TrainSample sample;
  Eigen::MatrixXd log_sigma;  // N x T
};

Setup make_setup(const GradcheckConfig& c) {
  std::mt19937_64 rng(c.seed);
  EnvSpec env = EnvSpec::defaults(EnvKind::kForest);
  env.extent = c.extent;
  env.cells = c.grid_cells;
  env.min_obstacles = 2;
  env.max_obstacles = 4;
  env.min_size = 0.12 * c.extent;
  env.max_size = 0.25 * c.extent;
  env.start = Vec2::Constant(0.125 * c.extent);
  env.goal = Vec2::Constant(0.875 * c.extent);
  env.keep_free_margin = 0.1 * c.extent;
  env.seed = rng();

  // One extra block straddles the start-goal line so obstacle factors are
  // active; otherwise every gradient is exactly zero.
  OccupancyGrid grid = generate(env);
  std::uniform_real_distribution<double> along(0.35, 0.65), across(-0.05, 0.05);
  const double t = along(rng);
  const Vec2 dir = (env.goal - env.start).normalized();
  const Vec2 center = env.start + t * (env.goal - env.start) +
                      across(rng) * c.extent * Vec2(-dir.y(), dir.x());
  const double half = 0.08 * c.extent;
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x)
      if (((grid.cell_center(x, y) - center).cwiseAbs().array() <= half).all()) grid.set(x, y, true);

  Problem p;
  p.sdf = std::make_shared<const Sdf>(compute_sdf(grid));
  p.start = State(env.start.x(), env.start.y());
  p.goal = State(env.goal.x(), env.goal.y());
  p.n_states = c.n_states;
  p.total_time = 4.0;
  p.fixed.robot_radius = 0.05 * c.extent;
  p.fixed.eps_safe = 0.05 * c.extent;

  std::normal_distribution<double> noise(0.0, 0.05 * c.extent);
  Trajectory expert = straight_line_init(p);
  for (int i = 1; i + 1 < expert.size(); ++i)
    for (int k = 0; k < kStateDim; ++k) expert.flat()[kStateDim * i + k] += noise(rng);

  std::uniform_real_distribution<double> ls(std::log(0.05), std::log(0.5));
  Eigen::MatrixXd log_sigma(c.n_states, c.unroll);
  for (Eigen::Index i = 0; i < log_sigma.size(); ++i) log_sigma.data()[i] = ls(rng);

  Demonstration demo{p, expert};
  return {TrainSample::make(std::move(demo), c.network.image_size), log_sigma};
}

TrainConfig train_config(const GradcheckConfig& c) {
  TrainConfig t;
  t.unroll = c.unroll;
  t.network = c.network;
  return t;
}

double sigma_loss(const Setup& s, const Eigen::MatrixXd& log_sigma, int unroll,
                  Eigen::MatrixXd* grad) {
  const Problem& problem = s.sample.demo.problem;
  const PriorModel prior = build_prior(problem);
  SigmaProvider provider = [&](int it, const Trajectory&) {
    return LearnedParams{log_sigma.col(std::min(it, unroll - 1)).array().exp().matrix()};
  };
  IterateLossFn loss = [&](int, const Trajectory& traj) {
    IterateLoss im = imitation_loss_grad(traj, s.sample.demo.expert, false);
    IterateLoss task = task_loss_grad(traj, prior, *problem.sdf, problem.fixed, 1.0);
    return IterateLoss{(im.value + task.value) / unroll, (im.gradient + task.gradient) / unroll};
  };
  UnrollResult u = record_unroll(problem, provider, unroll, loss);
  if (grad) *grad = backward(u.tape).d_log_sigma;
  return u.tape.loss();
}

GradcheckEntry compare(GradcheckBlock& b, const GradcheckConfig& c, double analytic, double f0,
                       double fp, double fm) {
  const double h = c.step;
  const double dp = (fp - f0) / h;
  const double dm = (f0 - fm) / h;
  GradcheckEntry e;
  e.block = b.name;
  e.analytic = analytic;
  e.numeric = (fp - fm) / (2.0 * h);
  // One-sided slopes that disagree mark a hinge or ReLU switch inside [-h, h].
  if (std::abs(dp - dm) > 1e-3 * std::max(std::abs(dp), std::abs(dm)) + 1e-6) {
    ++b.kinks;
    e.kink = true;
    return e;
  }
  const double err = std::abs(analytic - e.numeric);
  const double scale = std::max(std::abs(analytic), std::abs(e.numeric));
  ++b.checked;
  e.pass = err <= c.abs_tol + c.rel_tol * scale;
  if (e.pass) ++b.passed;
  if (scale > 0.0) b.max_rel_error = std::max(b.max_rel_error, err / scale);
  return e;
}

int stride_for(long long n, int max_coords) {
  return static_cast<int>(std::max<long long>(1, (n + max_coords - 1) / max_coords));
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& c) {
  GradcheckReport rep;
  rep.log_sigma.name = "log_sigma";
  rep.params.name = "network";
  const Setup s = make_setup(c);

  Eigen::MatrixXd g;
  const double f0 = sigma_loss(s, s.log_sigma, c.unroll, &g);
  const int ls_stride = stride_for(s.log_sigma.size(), c.max_coords);
  for (Eigen::Index i = 0; i < s.log_sigma.size(); i += ls_stride) {
    Eigen::MatrixXd plus = s.log_sigma, minus = s.log_sigma;
    plus.data()[i] += c.step;
    minus.data()[i] -= c.step;
    GradcheckEntry e = compare(rep.log_sigma, c, g.data()[i], f0,
                               sigma_loss(s, plus, c.unroll, nullptr),
                               sigma_loss(s, minus, c.unroll, nullptr));
    const Eigen::Index state = i % s.log_sigma.rows(), step = i / s.log_sigma.rows();
    e.name = "t" + std::to_string(step) + "/s" + std::to_string(state);
    e.index = i;
    rep.entries.push_back(std::move(e));
  }

  const TrainConfig tc = train_config(c);
  Network net(c.network, c.seed ^ 0x5eedULL);
  const ForwardMode eval_mode{};
  const SampleGradient base = sample_gradient(net, s.sample, tc, eval_mode);
  if (!base.ok) throw std::runtime_error("gradcheck unroll failed: " + base.error);
  long long total = 0;
  for (const auto& t : net.params()) total += static_cast<long long>(t.data.size());
  const int p_stride = stride_for(total, c.max_coords);
  long long flat = 0;
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    for (std::size_t i = 0; i < net.params()[k].data.size(); ++i, ++flat) {
      if (flat % p_stride != 0) continue;
      Network probe = net;
      double& w = probe.params()[k].data[i];
      const double w0 = w;
      w = w0 + c.step;
      const double fp = sample_gradient(probe, s.sample, tc, eval_mode).loss;
      w = w0 - c.step;
      const double fm = sample_gradient(probe, s.sample, tc, eval_mode).loss;
      GradcheckEntry e = compare(rep.params, c, base.grads[k].data[i], base.loss, fp, fm);
      e.name = net.params()[k].name;
      e.index = static_cast<long long>(i);
      rep.entries.push_back(std::move(e));
    }
  }

  auto block_ok = [&](const GradcheckBlock& b) {
    return b.checked == 0 || b.passed >= c.min_pass_fraction * b.checked;
  };
  rep.ok = block_ok(rep.log_sigma) && block_ok(rep.params);
  return rep;
}

}  // namespace dgpmp::learn
