#include "dgpmp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dgpmp {

void PlannerConfig::validate() const {
  if (t_max < 1) throw InvalidArgument("t_max must be >= 1");
  if (tol_rel_err < 0.0 || tol_update < 0.0) throw InvalidArgument("tolerances must be >= 0");
  if (fixed_unroll && *fixed_unroll < 0) throw InvalidArgument("fixed_unroll must be >= 0");
  if (!(step_scale > 0.0)) throw InvalidArgument("step_scale must be > 0");
  if (max_backtracks < 0) throw InvalidArgument("max_backtracks must be >= 0");
}

SigmaProvider constant_sigma(double sigma) {
  return [sigma](int, const Trajectory& traj) {
    return LearnedParams::uniform(traj.size(), sigma);
  };
}

StepWork linearize_and_solve(const Trajectory& traj, const Problem& problem,
                             const PriorModel& prior, const LearnedParams& learned,
                             double fallback_damping) {
  if (!problem.sdf) throw InvalidArgument("problem has no signed distance field");
  StepWork work;
  work.likelihood = stack_likelihood(traj, *problem.sdf, problem.fixed, learned);
  work.system = assemble(prior, traj, work.likelihood);
  try {
    work.factor.emplace(work.system);
  } catch (const SingularSystemError&) {
    if (fallback_damping <= 0.0) throw;
    work.factor.emplace(work.system, fallback_damping);
    work.damping = fallback_damping;
  }
  work.delta = work.factor->solve(work.system.rhs);
  return work;
}

Trajectory step(const Trajectory& traj, const Problem& problem, const PriorModel& prior,
                const LearnedParams& learned, const PlannerConfig& config) {
  const StepWork work =
      linearize_and_solve(traj, problem, prior, learned, config.fallback_damping);
  return Trajectory(traj.flat() + config.step_scale * work.delta, traj.total_time());
}

Trajectory step(const Trajectory& traj, const Problem& problem, const LearnedParams& learned) {
  return step(traj, problem, build_prior(problem), learned);
}

double objective(const PriorModel& prior, const Trajectory& traj, const Problem& problem,
                 const LearnedParams& learned) {
  const auto lik = stack_likelihood(traj, *problem.sdf, problem.fixed, learned);
  return gp_energy(prior, traj) + lik.energy();
}

PlanResult plan(const Problem& problem, const SigmaProvider& provider,
                const PlannerConfig& config) {
  return plan_from(problem, straight_line_init(problem), provider, config);
}

PlanResult plan_from(const Problem& problem, const Trajectory& init,
                     const SigmaProvider& provider, const PlannerConfig& config) {
  config.validate();
  const PriorModel prior = build_prior(problem);
  if (init.size() != prior.size()) throw InvalidArgument("initial trajectory size mismatch");

  PlanResult result{init, {init}, 0, false, {}, std::nullopt};
  Trajectory current = init;
  LearnedParams sigma = provider(0, current);
  double obj = objective(prior, current, problem, sigma);
  result.objectives.push_back(obj);

  const int limit = config.fixed_unroll ? *config.fixed_unroll : config.t_max;
  for (int it = 0; it < limit; ++it) {
    Eigen::VectorXd delta;
    try {
      delta = config.step_scale *
              linearize_and_solve(current, problem, prior, sigma, config.fallback_damping).delta;
    } catch (const SingularSystemError& e) {
      result.error = e.what();
      break;
    }
    Trajectory next(current.flat() + delta, current.total_time());
    if (!config.fixed_unroll) {
      for (int k = 0; k < config.max_backtracks; ++k) {
        const double trial = objective(prior, next, problem, sigma);
        if (std::isfinite(trial) && trial <= obj) break;
        delta *= 0.5;
        next = Trajectory(current.flat() + delta, current.total_time());
      }
    }
    current = std::move(next);
    result.iterates.push_back(current);
    ++result.iterations_used;

    sigma = provider(it + 1, current);
    const double next_obj = objective(prior, current, problem, sigma);
    result.objectives.push_back(next_obj);
    if (!std::isfinite(next_obj) || !current.flat().allFinite()) {
      result.error = "non-finite iterate";
      break;
    }
    if (!config.fixed_unroll) {
      const double floor = std::numeric_limits<double>::min();
      const double rel = std::abs(next_obj - obj) / std::max(obj, floor);
      if (delta.lpNorm<Eigen::Infinity>() < config.tol_update || rel < config.tol_rel_err) {
        result.converged = true;
        obj = next_obj;
        break;
      }
    }
    obj = next_obj;
  }
  result.final = current;
  return result;
}

}  // namespace dgpmp
