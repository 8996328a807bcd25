#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cicme {

struct ModelConfig {
  int hidden_units = 10;
  double lambda1 = 0.01;  // l1 weight on first-layer coefficients
  double lambda2 = 0.01;  // l2 weight on layer weights; pins the scale split
                          // between the layers so edge strengths stay readable

  void validate() const;
};

// One regression network x_j ~ f(X): a single sigmoid hidden layer followed
// by an affine scalar output.  The first-layer weight matrix has one column
// per input variable, so a zero column k certifies that variable k has no
// influence on the prediction.
struct MlpParams {
  Eigen::MatrixXd w1;  // hidden x d
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  void validate() const;
};

// One network per variable; together they induce a weighted graph.
struct ModelSet {
  std::vector<MlpParams> models;
  ModelConfig config;

  int dim() const { return static_cast<int>(models.size()); }
  void validate() const;
};

// f_j(X) for every row of X.
Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& X);

// Residuals x_j - f_j(X) for every variable, as an n x d matrix.
Eigen::MatrixXd residual_matrix(const ModelSet& m, const Eigen::MatrixXd& X);

// W(k, j) = l2 norm of column k of model j's first-layer weights: the
// strength of candidate edge k -> j.
Eigen::MatrixXd extract_adjacency(const ModelSet& m);

// All weights and biases i.i.d. Uniform[-0.1, 0.1].
MlpParams random_mlp(int d, int hidden, std::uint64_t seed);
ModelSet random_model_set(int d, const ModelConfig& config, std::uint64_t seed);

}  // namespace cicme
