#pragma once

#include <Eigen/Dense>
#include <functional>

namespace cicme {

// Objective for box-constrained minimization: writes the gradient into the
// second argument and returns the function value.
using BoxObjective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsbOptions {
  int memory = 10;        // correction pairs kept
  int max_iters = 15000;
  double pgtol = 1e-5;    // inf-norm of the projected gradient
  double ftol = 2.220446049250313e-9;  // relative objective decrease
  int max_evals_per_search = 30;

  void validate() const;
};

enum class LbfgsbStatus {
  converged_grad,   // projected gradient below pgtol
  converged_ftol,   // relative decrease below ftol
  max_iters,
  line_search_failed,
};

struct LbfgsbResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  LbfgsbStatus status = LbfgsbStatus::max_iters;
  int iterations = 0;
  long evaluations = 0;
};

// Bound-constrained limited-memory BFGS (Byrd, Lu, Nocedal, Zhu 1995):
// each iteration walks the projected-gradient path of the quadratic model
// to its generalized Cauchy point, minimizes the model over the free
// variables through the compact inverse representation, and line-searches
// the resulting direction under the strong Wolfe conditions.  Components
// with lower(i) == upper(i) stay fixed at that value.
LbfgsbResult lbfgsb_minimize(const BoxObjective& objective,
                             const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper,
                             const LbfgsbOptions& opts = {});

}  // namespace cicme
