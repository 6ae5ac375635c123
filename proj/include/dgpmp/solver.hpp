#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/factors.hpp"
#include "dgpmp/gp_prior.hpp"

#include <stdexcept>
#include <vector>

namespace dgpmp {

/// Symmetric block-tridiagonal normal equations M x = rhs with 4x4 blocks.
/// lower[i] holds M(i+1, i); the upper blocks are its transposes.
struct LinearizedSystem {
  std::vector<Mat4> diag;
  std::vector<Mat4> lower;
  Eigen::VectorXd rhs;

  int blocks() const { return static_cast<int>(diag.size()); }
  Eigen::MatrixXd dense() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
};

class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(int block, const std::string& what)
      : std::runtime_error(what), block_(block) {}
  int block() const { return block_; }

 private:
  int block_;
};

/// (K^-1 + H^T Sigma^-1 H) dtheta = -K^-1 (theta - mu) - H^T Sigma^-1 h, with the
/// prior term accumulated factor by factor.
LinearizedSystem assemble(const PriorModel& prior, const Trajectory& traj,
                          const StackedLikelihood& likelihood);

/// Block Cholesky factor L of a block-tridiagonal SPD matrix: diagonal blocks
/// are lower triangular, sub-diagonal blocks dense.
class BlockCholesky {
 public:
  /// Throws SingularSystemError with the failing block on a non-positive pivot.
  /// `damping` adds damping * I to every diagonal block before factoring.
  explicit BlockCholesky(const LinearizedSystem& system, double damping = 0.0);

  /// Forward and back substitution. Adds the number of 4x4 block operations
  /// to *ops when given.
  Eigen::VectorXd solve(const Eigen::VectorXd& b, long long* ops = nullptr) const;
  int blocks() const { return static_cast<int>(diag_.size()); }
  /// 4x4 block operations spent in the factorization.
  long long factor_ops() const { return ops_; }

 private:
  std::vector<Mat4> diag_;   // lower triangular L(i, i)
  std::vector<Mat4> lower_;  // L(i+1, i)
  long long ops_ = 0;
};

struct SolveOptions {
  /// Diagonal damping applied only when the undamped factorization fails.
  double fallback_damping = 0.0;
};

/// Solves system for x = M^-1 rhs. Throws SingularSystemError unless the
/// fallback damping rescues the factorization.
Eigen::VectorXd solve(const LinearizedSystem& system, const SolveOptions& opts = {});

}  // namespace dgpmp
