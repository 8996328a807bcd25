#include "cicme/notears.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cicme/acyclicity.hpp"

namespace cicme {

void SolverConfig::validate() const {
  if (!(rho_init > 0.0) || !(rho_max > rho_init))
    throw std::invalid_argument("SolverConfig: need 0 < rho_init < rho_max");
  if (!(h_tol > 0.0)) throw std::invalid_argument("SolverConfig: h_tol must be > 0");
  if (!(progress_ratio > 0.0 && progress_ratio < 1.0))
    throw std::invalid_argument("SolverConfig: progress_ratio must be in (0,1)");
  if (max_dual_steps < 1)
    throw std::invalid_argument("SolverConfig: max_dual_steps must be >= 1");
  inner.validate();
}

double reconstruction_loss(const ModelSet& m, const Eigen::MatrixXd& X, ModelSet* grad) {
  m.validate();
  if (X.cols() != m.dim())
    throw std::invalid_argument("reconstruction_loss: dimension mismatch");
  auto n = X.rows();
  if (n < 1) throw std::invalid_argument("reconstruction_loss: empty sample");
  if (grad) {
    *grad = m;  // shapes only; values overwritten below
  }
  double total = 0.0;
  for (int j = 0; j < m.dim(); ++j) {
    const MlpParams& p = m.models[j];
    Eigen::MatrixXd z = (X * p.w1.transpose()).rowwise() + p.b1.transpose();
    Eigen::MatrixXd hm = (1.0 + (-z.array()).exp()).inverse();
    Eigen::VectorXd r = (hm * p.w2).array() + p.b2 - X.col(j).array();
    total += 0.5 / static_cast<double>(n) * r.squaredNorm();
    if (grad) {
      MlpParams& g = grad->models[j];
      Eigen::VectorXd dpred = r / static_cast<double>(n);
      g.w2.noalias() = hm.transpose() * dpred;
      g.b2 = dpred.sum();
      Eigen::MatrixXd dz =
          (dpred * p.w2.transpose()).array() * hm.array() * (1.0 - hm.array());
      g.w1.noalias() = dz.transpose() * X;
      g.b1 = dz.colwise().sum();
    }
  }
  return total;
}

double first_layer_l1(const ModelSet& m) {
  double total = 0.0;
  for (const MlpParams& p : m.models) total += p.w1.cwiseAbs().sum();
  return total;
}

double common_structure_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& target,
                             const Eigen::MatrixXd& mask) {
  if (w.rows() != target.rows() || w.cols() != target.cols() ||
      w.rows() != mask.rows() || w.cols() != mask.cols())
    throw std::invalid_argument("common_structure_loss: shape mismatch");
  double count = mask.sum();
  if (count <= 0.0) return 0.0;
  return (mask.array() * (w - target).array().square()).sum() / count;
}

namespace {

// Flat layout of all d networks for the box-constrained solver.  Each
// first-layer weight is split into nonnegative halves (value = pos - neg)
// so the l1 term becomes a linear function under bound constraints.
// Per-variable block: [pos (h*d), neg (h*d), b1 (h), w2 (h), b2 (1)],
// matrices stored column-major.
struct Packing {
  int d, h;
  Eigen::Index per_var, total;

  Packing(int d_, int h_) : d(d_), h(h_) {
    per_var = static_cast<Eigen::Index>(2 * h * d + 2 * h + 1);
    total = per_var * d;
  }
  Eigen::Index base(int j) const { return per_var * j; }
  Eigen::Index pos(int j) const { return base(j); }
  Eigen::Index neg(int j) const { return base(j) + static_cast<Eigen::Index>(h) * d; }
  Eigen::Index b1(int j) const { return base(j) + 2ll * h * d; }
  Eigen::Index w2(int j) const { return b1(j) + h; }
  Eigen::Index b2(int j) const { return w2(j) + h; }
};

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using MutMap = Eigen::Map<Eigen::MatrixXd>;

Eigen::VectorXd pack(const ModelSet& m, const Packing& pk) {
  Eigen::VectorXd x(pk.total);
  for (int j = 0; j < pk.d; ++j) {
    const MlpParams& p = m.models[j];
    MutMap pos(x.data() + pk.pos(j), pk.h, pk.d);
    MutMap neg(x.data() + pk.neg(j), pk.h, pk.d);
    pos = p.w1.cwiseMax(0.0);
    neg = (-p.w1).cwiseMax(0.0);
    x.segment(pk.b1(j), pk.h) = p.b1;
    x.segment(pk.w2(j), pk.h) = p.w2;
    x(pk.b2(j)) = p.b2;
  }
  return x;
}

ModelSet unpack(const Eigen::VectorXd& x, const Packing& pk, const ModelConfig& config) {
  ModelSet m;
  m.config = config;
  m.models.resize(pk.d);
  for (int j = 0; j < pk.d; ++j) {
    ConstMap pos(x.data() + pk.pos(j), pk.h, pk.d);
    ConstMap neg(x.data() + pk.neg(j), pk.h, pk.d);
    MlpParams& p = m.models[j];
    p.w1 = pos - neg;
    p.b1 = x.segment(pk.b1(j), pk.h);
    p.w2 = x.segment(pk.w2(j), pk.h);
    p.b2 = x(pk.b2(j));
  }
  return m;
}

// Squared column norms of every first layer: ssq(k, j) = W(k, j)^2.
Eigen::MatrixXd squared_adjacency(const Eigen::VectorXd& x, const Packing& pk) {
  Eigen::MatrixXd ssq(pk.d, pk.d);
  for (int j = 0; j < pk.d; ++j) {
    ConstMap pos(x.data() + pk.pos(j), pk.h, pk.d);
    ConstMap neg(x.data() + pk.neg(j), pk.h, pk.d);
    ssq.col(j) = (pos - neg).colwise().squaredNorm().transpose();
  }
  return ssq;
}

// Full augmented-Lagrangian objective and gradient at multiplier state
// (rho, alpha).  Scratch matrices live in the caller so repeated
// evaluations do not allocate.
struct EvalScratch {
  Eigen::MatrixXd a1, z, hm, dz, da1, dh_ds, ssq, w_abs;
  Eigen::VectorXd r, dpred;
};

// Pinned networks never move, so their reconstruction and regularization
// terms and their squared-norm columns are computed once and reused per
// evaluation.
struct FrozenCache {
  std::vector<char> mask;
  double ls = 0.0, l1 = 0.0, l2 = 0.0;
  Eigen::MatrixXd ssq_cols;
};

double eval_objective(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                      const Eigen::MatrixXd& X, const Packing& pk, double lambda1,
                      double lambda2, double rho, double alpha,
                      const StructurePenalty* penalty, const FrozenCache* frozen,
                      EvalScratch& sc) {
  auto n = X.rows();
  double inv_n = 1.0 / static_cast<double>(n);
  grad.setZero(pk.total);
  sc.ssq.resize(pk.d, pk.d);

  double ls = frozen ? frozen->ls : 0.0;
  double l1 = frozen ? frozen->l1 : 0.0;
  double l2 = frozen ? frozen->l2 : 0.0;
  for (int j = 0; j < pk.d; ++j) {
    if (frozen && frozen->mask[static_cast<size_t>(j)]) {
      sc.ssq.col(j) = frozen->ssq_cols.col(j);
      continue;  // gradient block stays zero; the variables are pinned anyway
    }
    ConstMap pos(x.data() + pk.pos(j), pk.h, pk.d);
    ConstMap neg(x.data() + pk.neg(j), pk.h, pk.d);
    auto b1 = x.segment(pk.b1(j), pk.h);
    auto w2 = x.segment(pk.w2(j), pk.h);
    double b2 = x(pk.b2(j));

    sc.a1 = pos - neg;
    sc.ssq.col(j) = sc.a1.colwise().squaredNorm().transpose();
    sc.z.noalias() = X * sc.a1.transpose();
    sc.z.rowwise() += b1.transpose();
    sc.hm = (1.0 + (-sc.z.array()).exp()).inverse();
    sc.r.noalias() = sc.hm * w2;
    sc.r.array() += b2;
    sc.r -= X.col(j);
    ls += 0.5 * inv_n * sc.r.squaredNorm();
    l1 += pos.sum() + neg.sum();
    l2 += sc.ssq.col(j).sum() + w2.squaredNorm();

    sc.dpred = inv_n * sc.r;
    MutMap gpos(grad.data() + pk.pos(j), pk.h, pk.d);
    MutMap gneg(grad.data() + pk.neg(j), pk.h, pk.d);
    grad.segment(pk.w2(j), pk.h).noalias() = sc.hm.transpose() * sc.dpred;
    grad.segment(pk.w2(j), pk.h) += lambda2 * w2;
    grad(pk.b2(j)) = sc.dpred.sum();
    sc.dz.noalias() = sc.dpred * w2.transpose();
    sc.dz.array() *= sc.hm.array() * (1.0 - sc.hm.array());
    sc.da1.noalias() = sc.dz.transpose() * X;
    grad.segment(pk.b1(j), pk.h) = sc.dz.colwise().sum();
    gpos = (sc.da1.array() + lambda2 * sc.a1.array() + lambda1).matrix();
    gneg = (-sc.da1.array() - lambda2 * sc.a1.array() + lambda1).matrix();
  }

  double h_val = trace_expm_h(sc.ssq, sc.dh_ds);
  double coeff = alpha + rho * h_val;
  double value = ls + lambda1 * l1 + 0.5 * lambda2 * l2 + alpha * h_val +
                 0.5 * rho * h_val * h_val;

  double pen_value = 0.0;
  double mask_count = 0.0;
  if (penalty) {
    mask_count = penalty->mask.sum();
    if (mask_count > 0.0) {
      sc.w_abs = sc.ssq.cwiseMax(0.0).cwiseSqrt();
      pen_value = penalty->gamma *
                  (penalty->mask.array() *
                   (sc.w_abs - penalty->target).array().square()).sum() / mask_count;
      value += pen_value;
    }
  }

  for (int j = 0; j < pk.d; ++j) {
    if (frozen && frozen->mask[static_cast<size_t>(j)]) continue;
    ConstMap pos(x.data() + pk.pos(j), pk.h, pk.d);
    ConstMap neg(x.data() + pk.neg(j), pk.h, pk.d);
    MutMap gpos(grad.data() + pk.pos(j), pk.h, pk.d);
    MutMap gneg(grad.data() + pk.neg(j), pk.h, pk.d);
    for (int k = 0; k < pk.d; ++k) {
      // d h / d a1(m, k) = 2 * expm(ssq)(j, k) * a1(m, k)
      double c = 2.0 * coeff * sc.dh_ds(k, j);
      if (penalty && mask_count > 0.0 && penalty->mask(k, j) != 0.0) {
        double w_kj = sc.w_abs(k, j);
        if (w_kj > 1e-12) {
          // d pen / d a1(m, k) = 2 gamma mask (w - t) / count * a1(m, k) / w
          c += 2.0 * penalty->gamma * (w_kj - penalty->target(k, j)) /
               (mask_count * w_kj);
        }
      }
      if (c != 0.0) {
        auto col = (pos.col(k) - neg.col(k)) * c;
        gpos.col(k) += col;
        gneg.col(k) -= col;
      }
    }
  }
  return value;
}

}  // namespace

FitResult notears_fit(const Eigen::MatrixXd& X, const ModelSet& init,
                      const SolverConfig& solver, const std::vector<char>& freeze,
                      const StructurePenalty* penalty) {
  init.validate();
  solver.validate();
  int d = init.dim();
  if (X.cols() != d) throw std::invalid_argument("notears_fit: dimension mismatch");
  if (X.rows() < 1) throw std::invalid_argument("notears_fit: empty sample");
  if (!X.allFinite()) throw std::invalid_argument("notears_fit: non-finite data");
  if (!freeze.empty() && static_cast<int>(freeze.size()) != d)
    throw std::invalid_argument("notears_fit: freeze mask size mismatch");
  if (penalty) {
    if (penalty->target.rows() != d || penalty->target.cols() != d ||
        penalty->mask.rows() != d || penalty->mask.cols() != d)
      throw std::invalid_argument("notears_fit: penalty shape mismatch");
    if (!(penalty->gamma >= 0.0))
      throw std::invalid_argument("notears_fit: penalty gamma must be >= 0");
  }

  Packing pk(d, init.config.hidden_units);
  Eigen::VectorXd x = pack(init, pk);

  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lower = Eigen::VectorXd::Constant(pk.total, -inf);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(pk.total, inf);
  for (int j = 0; j < d; ++j) {
    bool pinned = !freeze.empty() && freeze[j];
    if (pinned) {
      lower.segment(pk.base(j), pk.per_var) = x.segment(pk.base(j), pk.per_var);
      upper.segment(pk.base(j), pk.per_var) = x.segment(pk.base(j), pk.per_var);
      continue;
    }
    lower.segment(pk.pos(j), 2ll * pk.h * d).setZero();
    // No self-influence: both halves of column j stay at zero.
    auto pin_column = [&](Eigen::Index start) {
      lower.segment(start, pk.h).setZero();
      upper.segment(start, pk.h).setZero();
      x.segment(start, pk.h).setZero();
    };
    pin_column(pk.pos(j) + static_cast<Eigen::Index>(j) * pk.h);
    pin_column(pk.neg(j) + static_cast<Eigen::Index>(j) * pk.h);
  }

  EvalScratch scratch;
  double lambda1 = init.config.lambda1;
  double lambda2 = init.config.lambda2;

  FrozenCache cache;
  const FrozenCache* frozen = nullptr;
  if (!freeze.empty() && std::any_of(freeze.begin(), freeze.end(), [](char c) { return c; })) {
    cache.mask = freeze;
    cache.ssq_cols.setZero(d, d);
    double inv_n = 1.0 / static_cast<double>(X.rows());
    Eigen::MatrixXd a1, z, hm;
    Eigen::VectorXd r;
    for (int j = 0; j < d; ++j) {
      if (!freeze[static_cast<size_t>(j)]) continue;
      ConstMap pos(x.data() + pk.pos(j), pk.h, pk.d);
      ConstMap neg(x.data() + pk.neg(j), pk.h, pk.d);
      a1 = pos - neg;
      cache.ssq_cols.col(j) = a1.colwise().squaredNorm().transpose();
      z.noalias() = X * a1.transpose();
      z.rowwise() += x.segment(pk.b1(j), pk.h).transpose();
      hm = (1.0 + (-z.array()).exp()).inverse();
      r.noalias() = hm * x.segment(pk.w2(j), pk.h);
      r.array() += x(pk.b2(j));
      r -= X.col(j);
      cache.ls += 0.5 * inv_n * r.squaredNorm();
      cache.l1 += pos.sum() + neg.sum();
      cache.l2 += cache.ssq_cols.col(j).sum() + x.segment(pk.w2(j), pk.h).squaredNorm();
    }
    frozen = &cache;
  }

  auto objective = [&](double rho, double alpha) {
    return [&, rho, alpha](const Eigen::VectorXd& xx, Eigen::VectorXd& gg) {
      return eval_objective(xx, gg, X, pk, lambda1, lambda2, rho, alpha, penalty,
                            frozen, scratch);
    };
  };

  FitResult out;
  double rho = solver.rho_init, alpha = 0.0;
  double h_prev = inf, h_cur = inf;
  for (int step = 0; step < solver.max_dual_steps; ++step) {
    LbfgsbResult sol;
    for (;;) {
      sol = lbfgsb_minimize(objective(rho, alpha), x, lower, upper, solver.inner);
      out.evaluations += sol.evaluations;
      Eigen::MatrixXd dh_unused;
      h_cur = trace_expm_h(squared_adjacency(sol.x, pk), dh_unused);
      if (h_cur > solver.progress_ratio * h_prev) {
        rho *= 10.0;
        if (rho < solver.rho_max) continue;  // retry from the same warm start
      }
      break;
    }
    x = sol.x;
    h_prev = h_cur;
    alpha += rho * h_cur;
    ++out.dual_steps;
    if (h_cur <= solver.h_tol || rho >= solver.rho_max) break;
  }

  out.models = unpack(x, pk, init.config);
  // Pinned networks must come back bit-identical, not reconstructed from
  // the split representation.
  for (int j = 0; j < d; ++j)
    if (!freeze.empty() && freeze[j]) out.models.models[j] = init.models[j];
  out.w = extract_adjacency(out.models);
  out.h = h_cur;
  out.converged = h_cur <= solver.h_tol;
  double l2 = 0.0;
  for (const MlpParams& p : out.models.models)
    l2 += p.w1.squaredNorm() + p.w2.squaredNorm();
  out.loss = reconstruction_loss(out.models, X) + lambda1 * first_layer_l1(out.models) +
             0.5 * lambda2 * l2;
  return out;
}

namespace detail {

Eigen::Index split_size(int d, int hidden) { return Packing(d, hidden).total; }

double split_objective(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                       const Eigen::MatrixXd& X, int hidden, double lambda1,
                       double lambda2, double rho, double alpha,
                       const StructurePenalty* penalty) {
  Packing pk(static_cast<int>(X.cols()), hidden);
  if (x.size() != pk.total) throw std::invalid_argument("split_objective: bad size");
  EvalScratch scratch;
  return eval_objective(x, grad, X, pk, lambda1, lambda2, rho, alpha, penalty, nullptr,
                        scratch);
}

}  // namespace detail

}  // namespace cicme
