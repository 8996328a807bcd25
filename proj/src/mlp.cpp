#include "cicme/mlp.hpp"

#include <stdexcept>

#include "cicme/rng.hpp"

namespace cicme {

void ModelConfig::validate() const {
  if (hidden_units < 1) throw std::invalid_argument("ModelConfig: hidden_units must be >= 1");
  if (lambda1 < 0.0) throw std::invalid_argument("ModelConfig: lambda1 must be >= 0");
  if (lambda2 < 0.0) throw std::invalid_argument("ModelConfig: lambda2 must be >= 0");
}

void MlpParams::validate() const {
  if (w1.rows() < 1 || w1.cols() < 1)
    throw std::invalid_argument("MlpParams: empty first layer");
  if (b1.size() != w1.rows() || w2.size() != w1.rows())
    throw std::invalid_argument("MlpParams: layer shape mismatch");
  if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !std::isfinite(b2))
    throw std::invalid_argument("MlpParams: non-finite parameter");
}

void ModelSet::validate() const {
  config.validate();
  if (models.empty()) throw std::invalid_argument("ModelSet: empty");
  int d = dim();
  for (const MlpParams& p : models) {
    p.validate();
    if (p.input_dim() != d)
      throw std::invalid_argument("ModelSet: input dim must equal model count");
    if (p.hidden_dim() != config.hidden_units)
      throw std::invalid_argument("ModelSet: hidden dim mismatch");
  }
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& X) {
  if (X.cols() != p.input_dim())
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  Eigen::MatrixXd z = (X * p.w1.transpose()).rowwise() + p.b1.transpose();
  Eigen::MatrixXd h = (1.0 + (-z.array()).exp()).inverse();
  return (h * p.w2).array() + p.b2;
}

Eigen::MatrixXd residual_matrix(const ModelSet& m, const Eigen::MatrixXd& X) {
  m.validate();
  Eigen::MatrixXd r(X.rows(), m.dim());
  for (int j = 0; j < m.dim(); ++j)
    r.col(j) = X.col(j) - mlp_forward(m.models[j], X);
  return r;
}

Eigen::MatrixXd extract_adjacency(const ModelSet& m) {
  m.validate();
  int d = m.dim();
  Eigen::MatrixXd w(d, d);
  for (int j = 0; j < d; ++j)
    w.col(j) = m.models[j].w1.colwise().norm();
  return w;
}

MlpParams random_mlp(int d, int hidden, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  p.w1.resize(hidden, d);
  for (int k = 0; k < d; ++k)
    for (int m = 0; m < hidden; ++m) p.w1(m, k) = rng.uniform(-0.1, 0.1);
  p.b1.resize(hidden);
  for (int m = 0; m < hidden; ++m) p.b1(m) = rng.uniform(-0.1, 0.1);
  p.w2.resize(hidden);
  for (int m = 0; m < hidden; ++m) p.w2(m) = rng.uniform(-0.1, 0.1);
  p.b2 = rng.uniform(-0.1, 0.1);
  return p;
}

ModelSet random_model_set(int d, const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  if (d < 1) throw std::invalid_argument("random_model_set: d must be >= 1");
  ModelSet m;
  m.config = config;
  m.models.reserve(d);
  // Each variable gets its own derived stream, so one model's parameters do
  // not depend on how many other variables are initialized alongside it.
  for (int j = 0; j < d; ++j)
    m.models.push_back(random_mlp(d, config.hidden_units,
                                  derive_seed(seed, {static_cast<std::uint64_t>(j)})));
  return m;
}

}  // namespace cicme
