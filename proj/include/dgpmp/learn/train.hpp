#pragma once

#include "dgpmp/diff.hpp"
#include "dgpmp/learn/loss.hpp"
#include "dgpmp/learn/network.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dgpmp::learn {

enum class OptimizerKind { kSgdMomentum, kAdam };

struct TrainConfig {
  int unroll = 10;  // T
  int batch = 8;    // K
  int epochs = 20;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
  double grad_clip = 10.0;  // global norm, 0 disables
  double lambda = 1.0;
  bool positions_only = false;
  double norm_momentum = 0.1;
  std::uint64_t seed = 0;
  int jobs = 1;
  NetworkSpec network;

  void validate() const;
};

/// A demonstration with its precomputed network input images.
struct TrainSample {
  Demonstration demo;
  EnvImages images;

  static TrainSample make(Demonstration demo, int image_size);
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_success = 0.0;
  double val_gp_mse = 0.0;
  int skipped = 0;
};

/// Loss and gradients of one unrolled demonstration.
struct SampleGradient {
  bool ok = false;
  std::string error;
  double loss = 0.0;                     // (1/T) sum over iterates 1..T
  std::vector<double> iterate_losses;    // T entries
  std::vector<Tensor> grads;             // d loss / d params
  std::vector<ForwardCache> caches;      // per network call, steps 0..T-1
};

/// Unrolls T planner steps with sigma from the network at every step and
/// backpropagates L = L_imitation + L_plan summed over iterates 1..T,
/// scaled by 1/T.
SampleGradient sample_gradient(const Network& net, const TrainSample& sample,
                               const TrainConfig& config, const ForwardMode& mode);

/// Eval-mode sigma provider backed by a network.
SigmaProvider network_provider(const Network& net, EnvImages images);

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& config) : config_(config) {}
  /// One update. Gradients are clipped to config.grad_clip first.
  void step(Network& net, std::vector<Tensor> grads);

 private:
  TrainConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long long t_ = 0;
};

struct TrainResult {
  Network network;
  std::vector<EpochLog> log;
};

/// BPTT training over `train`; `validation` problems are planned to
/// convergence after every epoch with the eval-mode network. Elements whose
/// unroll fails are skipped and counted.
TrainResult train(const std::vector<TrainSample>& train_set,
                  const std::vector<TrainSample>& validation, const TrainConfig& config,
                  const PlannerConfig& val_planner = {},
                  const std::function<void(const EpochLog&, const Network&)>& on_epoch = nullptr);

void write_log_csv_header(std::ostream& os);
void write_log_csv_row(std::ostream& os, const EpochLog& row);

}  // namespace dgpmp::learn
