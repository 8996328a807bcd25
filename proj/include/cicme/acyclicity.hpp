#pragma once

#include <Eigen/Dense>

namespace cicme {

struct AcyclicityResult {
  double h = 0.0;          // tr(exp(W o W)) - d; zero iff W is a DAG
  Eigen::MatrixXd grad;    // dh/dW = exp(W o W)^T o 2W
};

// Smooth acyclicity measure of a weighted graph.  Throws if the matrix
// exponential overflows to non-finite values.
AcyclicityResult acyclicity(const Eigen::MatrixXd& w);

// Same quantity parameterized by the squared-weight matrix s = W o W:
// returns tr(exp(s)) - d and writes d tr(exp(s)) / ds = exp(s)^T.  The
// solver works in this parameterization because squared column norms are
// cheaper to differentiate than the norms themselves.
double trace_expm_h(const Eigen::MatrixXd& s, Eigen::MatrixXd& dh_ds);

}  // namespace cicme
