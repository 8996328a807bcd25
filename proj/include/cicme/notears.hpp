#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cicme/lbfgsb.hpp"
#include "cicme/mlp.hpp"

namespace cicme {

// Augmented-Lagrangian schedule wrapped around the box-constrained inner
// solver.  The dual loop enforces acyclicity: minimize, escalate the
// quadratic weight tenfold whenever the constraint shrinks by less than a
// factor of four, update the multiplier, and stop once the constraint is
// met or the weight is exhausted.
struct SolverConfig {
  double rho_init = 1.0;
  double rho_max = 1e16;
  double h_tol = 1e-8;
  double progress_ratio = 0.25;  // required shrink of h per dual step
  int max_dual_steps = 100;
  LbfgsbOptions inner;

  void validate() const;
};

// Pulls the estimated adjacency toward a target on masked entries:
// gamma * sum(mask o (W - target)^2) / sum(mask).
struct StructurePenalty {
  double gamma = 10.0;
  Eigen::MatrixXd target;
  Eigen::MatrixXd mask;
};

struct FitResult {
  ModelSet models;
  Eigen::MatrixXd w;       // extracted adjacency
  double h = 0.0;          // acyclicity residual at the solution
  double loss = 0.0;       // squared loss + l1 score (no constraint terms)
  bool converged = false;  // h <= h_tol on exit
  int dual_steps = 0;
  long evaluations = 0;
};

// Mean squared reconstruction error (1/n) sum_j 0.5 ||x_j - f_j(X)||^2.
// When grad is non-null it receives d loss / d params in model shape.
double reconstruction_loss(const ModelSet& m, const Eigen::MatrixXd& X,
                           ModelSet* grad = nullptr);

// l1 norm of all first-layer weights.
double first_layer_l1(const ModelSet& m);

// Masked mean squared difference between two adjacencies; zero when the
// mask selects nothing.
double common_structure_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& target,
                             const Eigen::MatrixXd& mask);

// Fits one network per variable on X under the acyclicity constraint.
//  - init supplies the starting parameters and the model configuration;
//  - freeze[j] pins variable j's network to its init values exactly;
//  - penalty, when present, adds the masked structure pull to the score.
// Self-influence is excluded: column j of model j's first layer is held at
// zero.  Deterministic in its arguments.
FitResult notears_fit(const Eigen::MatrixXd& X, const ModelSet& init,
                      const SolverConfig& solver,
                      const std::vector<char>& freeze = {},
                      const StructurePenalty* penalty = nullptr);

namespace detail {

// The exact function the inner solver minimizes, in its split coordinates
// (per variable: positive half, negative half, hidden biases, output
// weights, output bias).  Exposed so finite differences can check the
// analytic gradient on the real code path.
Eigen::Index split_size(int d, int hidden);
double split_objective(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                       const Eigen::MatrixXd& X, int hidden, double lambda1,
                       double lambda2, double rho, double alpha,
                       const StructurePenalty* penalty = nullptr);

}  // namespace detail

}  // namespace cicme
