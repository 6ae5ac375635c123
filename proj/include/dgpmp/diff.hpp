#pragma once

#include "dgpmp/planner.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace dgpmp {

/// Value and flat-trajectory gradient of a loss evaluated on one iterate.
struct IterateLoss {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// Called for iterates 1..T of an unroll.
using IterateLossFn = std::function<IterateLoss(int iteration, const Trajectory& traj)>;

/// Forward values of one Gauss-Newton step that its adjoint needs.
struct StepRecord {
  Trajectory input;
  Eigen::VectorXd sigma;
  StepWork work;
  Trajectory output;
};

/// Recorded T-step unroll. Steps are stored in execution order; the loss
/// terms are attached to the outputs of steps 1..T.
class Tape {
 public:
  Tape(Problem problem, PriorModel prior, Trajectory theta0, double step_scale)
      : problem_(std::move(problem)), prior_(std::move(prior)),
        theta0_(std::move(theta0)), step_scale_(step_scale) {}

  const Problem& problem() const { return problem_; }
  const PriorModel& prior() const { return prior_; }
  const Trajectory& theta0() const { return theta0_; }
  double step_scale() const { return step_scale_; }
  const std::vector<StepRecord>& steps() const { return steps_; }
  const std::vector<IterateLoss>& losses() const { return losses_; }
  int unroll_length() const { return static_cast<int>(steps_.size()); }
  bool complete() const { return complete_; }
  /// Sum of the recorded per-iterate losses.
  double loss() const;

  /// Number of doubles held in cached forward values. Linear in T and N.
  std::size_t cached_values() const;

  void push_step(StepRecord rec) { steps_.push_back(std::move(rec)); }
  void push_loss(IterateLoss l) { losses_.push_back(std::move(l)); }
  void mark_complete() { complete_ = true; }

 private:
  Problem problem_;
  PriorModel prior_;
  Trajectory theta0_;
  double step_scale_;
  std::vector<StepRecord> steps_;
  std::vector<IterateLoss> losses_;
  bool complete_ = false;
};

struct UnrollResult {
  PlanResult plan;
  Tape tape;
};

/// Runs exactly `steps` Gauss-Newton iterations, recording everything the
/// backward pass needs. Without a loss the tape is left incomplete.
UnrollResult record_unroll(const Problem& problem, const SigmaProvider& provider, int steps,
                           const IterateLossFn& loss = nullptr,
                           std::optional<Trajectory> init = std::nullopt,
                           double step_scale = 1.0);

/// Recomputes every step from theta0 with the recorded sigmas.
std::vector<Trajectory> replay(const Tape& tape);

struct GradientReport {
  Eigen::MatrixXd d_log_sigma;  // N x T, column t is the sigma used by step t
  Eigen::MatrixXd d_sigma;      // N x T
  Eigen::VectorXd d_theta0;     // 4N
  std::optional<Mat2> d_qc;     // symmetric part; planner path only
};

/// Receives d loss / d log sigma for the sigma used by step t and returns an
/// additional adjoint for that step's input trajectory (zero if sigma does
/// not depend on it). Called for t = T-1 down to 0.
using SigmaAdjointHook =
    std::function<Eigen::VectorXd(int step, const Eigen::VectorXd& d_log_sigma)>;

struct BackwardOptions {
  bool with_qc = false;
  SigmaAdjointHook sigma_hook;
};

/// Reverse-mode pass through the recorded unroll scaled by `seed`. Throws
/// std::logic_error if the tape is incomplete.
GradientReport backward(const Tape& tape, double seed = 1.0, const BackwardOptions& opts = {});

}  // namespace dgpmp
