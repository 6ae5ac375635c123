#include "dgpmp/learn/train.hpp"

#include "dgpmp/eval.hpp"
#include "dgpmp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace dgpmp::learn {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return derive_seed(a, b); }

}  // namespace

void TrainConfig::validate() const {
  if (unroll < 1) throw InvalidArgument("unroll length T must be >= 1");
  if (batch < 1) throw InvalidArgument("batch size K must be >= 1");
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) throw InvalidArgument("grad_clip must be >= 0");
  if (!(norm_momentum >= 0.0 && norm_momentum <= 1.0))
    throw InvalidArgument("norm_momentum must lie in [0, 1]");
  if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
  network.validate();
}

TrainSample TrainSample::make(Demonstration demo, int image_size) {
  EnvImages images = EnvImages::from_sdf(*demo.problem.sdf, image_size);
  return {std::move(demo), std::move(images)};
}

SampleGradient sample_gradient(const Network& net, const TrainSample& sample,
                               const TrainConfig& config, const ForwardMode& mode) {
  const int t_len = config.unroll;
  SampleGradient out;
  out.caches.resize(t_len);
  const Problem& problem = sample.demo.problem;
  try {
    const PriorModel prior = build_prior(problem);
    SigmaProvider provider = [&](int it, const Trajectory& traj) {
      ForwardMode m = mode;
      m.dropout_seed = mix(mode.dropout_seed, static_cast<std::uint64_t>(it));
      // The call after the last step only feeds the objective log.
      return forward_w(net, sample.images, traj, m, it < t_len ? &out.caches[it] : nullptr);
    };
    IterateLossFn loss = [&](int, const Trajectory& traj) {
      IterateLoss im = imitation_loss_grad(traj, sample.demo.expert, config.positions_only);
      IterateLoss task = task_loss_grad(traj, prior, *problem.sdf, problem.fixed, config.lambda);
      return IterateLoss{(im.value + task.value) / t_len,
                         (im.gradient + task.gradient) / t_len};
    };
    UnrollResult unroll = record_unroll(problem, provider, t_len, loss);
    for (const auto& l : unroll.tape.losses()) out.iterate_losses.push_back(l.value * t_len);
    out.loss = unroll.tape.loss();
    if (!std::isfinite(out.loss)) throw std::runtime_error("non-finite loss");

    out.grads = net.zero_gradients();
    BackwardOptions opts;
    opts.sigma_hook = [&](int step, const Eigen::VectorXd& d_log_sigma) {
      return backward_w(net, out.caches[step], d_log_sigma, out.grads);
    };
    backward(unroll.tape, 1.0, opts);
    for (const auto& g : out.grads)
      for (double v : g.data)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite gradient");
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
    out.grads.clear();
  }
  return out;
}

SigmaProvider network_provider(const Network& net, EnvImages images) {
  auto shared = std::make_shared<const EnvImages>(std::move(images));
  return [&net, shared](int, const Trajectory& traj) {
    return forward_w(net, *shared, traj, ForwardMode{});
  };
}

void Optimizer::step(Network& net, std::vector<Tensor> grads) {
  auto& params = net.params();
  if (grads.size() != params.size()) throw InvalidArgument("gradient layout mismatch");
  if (config_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads)
      for (double v : g.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip) {
      const double s = config_.grad_clip / norm;
      for (auto& g : grads)
        for (double& v : g.data) v *= s;
    }
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.data.size(), 0.0);
      v_.emplace_back(p.data.size(), 0.0);
    }
  }
  ++t_;
  const double lr = config_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data;
    const auto& g = grads[k].data;
    if (g.size() != p.size()) throw InvalidArgument("gradient shape mismatch for " + params[k].name);
    if (config_.optimizer == OptimizerKind::kSgdMomentum) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[k][i] = config_.momentum * m_[k][i] + g[i];
        p[i] -= lr * m_[k][i];
      }
    } else {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (std::size_t i = 0; i < p.size(); ++i) {
        m_[k][i] = b1 * m_[k][i] + (1.0 - b1) * g[i];
        v_[k][i] = b2 * v_[k][i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps);
      }
    }
  }
}

namespace {

void validate_epoch(const Network& net, const std::vector<TrainSample>& validation,
                    const PlannerConfig& planner, int jobs, EpochLog& row) {
  if (validation.empty()) return;
  std::vector<eval::ProblemRecord> recs(validation.size());
  eval::PlannerVariant variant;
  variant.name = "val";
  // Non-owning: the network outlives this call.
  variant.network = std::shared_ptr<const Network>(&net, [](const Network*) {});
  parallel_for(static_cast<int>(validation.size()), jobs, [&](int i) {
    const eval::EvalProblem p{std::to_string(i), EnvKind::kForest, validation[i].demo.problem};
    try {
      recs[i] = eval::evaluate_problem(p, variant, planner);
    } catch (const std::exception& e) {
      recs[i].variant = variant.name;
      recs[i].kind = to_string(p.kind);
      recs[i].failure = e.what();
    }
  });
  const auto agg = eval::aggregate(recs, variant.name, "mixed");
  row.val_success = agg.success;
  row.val_gp_mse = agg.gp_mse;
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& validation, const TrainConfig& config,
                  const PlannerConfig& val_planner,
                  const std::function<void(const EpochLog&, const Network&)>& on_epoch) {
  config.validate();
  if (train_set.empty()) throw InvalidArgument("training set is empty");
  for (const auto& s : train_set) {
    if (s.demo.problem.n_states != config.network.n_states)
      throw InvalidArgument("demonstration state count differs from the network spec");
    if (s.images.size != config.network.image_size)
      throw InvalidArgument("sample images differ from the network image size");
  }

  TrainResult result{Network(config.network, config.seed), {}};
  Network& net = result.network;
  Optimizer opt(config);
  std::mt19937_64 order_rng(mix(config.seed, 1));
  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t batch_counter = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochLog row;
    row.epoch = epoch;
    double loss_sum = 0.0;
    int loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const int k = static_cast<int>(std::min<std::size_t>(config.batch, order.size() - start));
      const std::uint64_t batch_seed = mix(config.seed, ++batch_counter + 2);
      std::vector<SampleGradient> parts(k);
      parallel_for(k, config.jobs, [&](int e) {
        ForwardMode mode{true, mix(batch_seed, static_cast<std::uint64_t>(e))};
        parts[e] = sample_gradient(net, train_set[order[start + e]], config, mode);
      });

      std::vector<Tensor> grads = net.zero_gradients();
      std::vector<const ForwardCache*> calls;
      int ok = 0;
      for (const auto& p : parts) {
        if (!p.ok) {
          ++row.skipped;
          continue;
        }
        ++ok;
        loss_sum += p.loss;
        ++loss_count;
        for (std::size_t t = 0; t < grads.size(); ++t)
          for (std::size_t i = 0; i < grads[t].data.size(); ++i)
            grads[t].data[i] += p.grads[t].data[i];
        for (const auto& c : p.caches) calls.push_back(&c);
      }
      if (ok == 0) continue;
      for (auto& g : grads)
        for (double& v : g.data) v /= ok;
      opt.step(net, std::move(grads));
      net.update_running_stats(calls, config.norm_momentum);
    }
    row.train_loss = loss_count > 0 ? loss_sum / loss_count : std::nan("");
    validate_epoch(net, validation, val_planner, config.jobs, row);
    result.log.push_back(row);
    if (on_epoch) on_epoch(row, net);
  }
  return result;
}

void write_log_csv_header(std::ostream& os) {
  os << "epoch,train_loss,val_success,val_gp_mse\n";
}

void write_log_csv_row(std::ostream& os, const EpochLog& row) {
  const auto old = os.precision(17);
  os << row.epoch << ',' << row.train_loss << ',' << row.val_success << ',' << row.val_gp_mse
     << '\n';
  os.precision(old);
}

}  // namespace dgpmp::learn
