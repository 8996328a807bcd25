#include "cicme/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cicme {

namespace {

constexpr double kEps = 2.220446049250313e-16;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Compact representation of the limited-memory Hessian approximation
// B = theta*I - W*M*W^T with W = [Y, theta*S] and
// M^{-1} = [[-D, L^T], [L, theta*S^T S]], D = diag(s_i.y_i),
// L(i,j) = s_i.y_j for i > j (Byrd-Lu-Nocedal-Zhu eq. 3.4).
class CorrectionMemory {
 public:
  explicit CorrectionMemory(int capacity) : capacity_(capacity) {}

  int pairs() const { return static_cast<int>(s_hist_.size()); }
  double theta() const { return theta_; }
  const Eigen::MatrixXd& w() const { return w_; }

  void clear() {
    s_hist_.clear();
    y_hist_.clear();
    theta_ = 1.0;
    w_.resize(0, 0);
  }

  // Accepts the pair only under the curvature condition that keeps B
  // positive definite.
  bool offer(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    double sy = s.dot(y);
    if (!(sy > kEps * y.squaredNorm())) return false;
    s_hist_.push_back(s);
    y_hist_.push_back(y);
    if (pairs() > capacity_) {
      s_hist_.pop_front();
      y_hist_.pop_front();
    }
    theta_ = y.squaredNorm() / sy;
    rebuild();
    return true;
  }

  // M*v, computed by solving with the factored M^{-1}.
  Eigen::VectorXd apply_m(const Eigen::VectorXd& v) const { return m_inv_lu_.solve(v); }
  Eigen::MatrixXd apply_m(const Eigen::MatrixXd& v) const { return m_inv_lu_.solve(v); }

 private:
  void rebuild() {
    int k = pairs();
    auto n = s_hist_[0].size();
    Eigen::MatrixXd s_mat(n, k), y_mat(n, k);
    for (int i = 0; i < k; ++i) {
      s_mat.col(i) = s_hist_[i];
      y_mat.col(i) = y_hist_[i];
    }
    Eigen::MatrixXd sy = s_mat.transpose() * y_mat;  // sy(i,j) = s_i.y_j
    Eigen::MatrixXd m_inv = Eigen::MatrixXd::Zero(2 * k, 2 * k);
    m_inv.topLeftCorner(k, k) = -sy.diagonal().asDiagonal().toDenseMatrix();
    Eigen::MatrixXd l = sy.triangularView<Eigen::StrictlyLower>();
    m_inv.topRightCorner(k, k) = l.transpose();
    m_inv.bottomLeftCorner(k, k) = l;
    m_inv.bottomRightCorner(k, k) = theta_ * (s_mat.transpose() * s_mat);
    m_inv_lu_.compute(m_inv);
    w_.resize(n, 2 * k);
    w_.leftCols(k) = y_mat;
    w_.rightCols(k) = theta_ * s_mat;
  }

  int capacity_;
  std::deque<Eigen::VectorXd> s_hist_, y_hist_;
  double theta_ = 1.0;
  Eigen::MatrixXd w_;
  Eigen::PartialPivLU<Eigen::MatrixXd> m_inv_lu_;
};

Eigen::VectorXd clamp_to_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                             const Eigen::VectorXd& up) {
  return x.cwiseMax(lo).cwiseMin(up);
}

double projected_gradient_inf_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                   const Eigen::VectorXd& lo, const Eigen::VectorXd& up) {
  return (clamp_to_box(x - g, lo, up) - x).cwiseAbs().maxCoeff();
}

// Generalized Cauchy point: minimizer of the quadratic model along the
// piecewise-linear projected steepest-descent path (algorithm CP of the
// reference, with the Fortran implementation's curvature guard).
struct CauchyPoint {
  Eigen::VectorXd x;          // the Cauchy point itself
  Eigen::VectorXd c;          // W^T (x_cp - x_k), reused by the subspace step
  std::vector<char> at_bound; // hit its bound during the path walk
};

CauchyPoint cauchy_point(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& up,
                         const CorrectionMemory& mem) {
  auto n = x.size();
  int two_k = static_cast<int>(mem.w().cols());
  double theta = mem.theta();

  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd breakpoint(n);
  CauchyPoint cp;
  cp.at_bound.assign(static_cast<size_t>(n), 0);
  std::vector<Eigen::Index> moving;  // coordinates with a strictly positive breakpoint
  for (Eigen::Index i = 0; i < n; ++i) {
    double t;
    if (g(i) < 0.0)
      t = (x(i) - up(i)) / g(i);
    else if (g(i) > 0.0)
      t = (x(i) - lo(i)) / g(i);
    else
      t = kInf;
    breakpoint(i) = t;
    if (t > 0.0) {
      d(i) = -g(i);
      if (t < kInf) moving.push_back(i);
    } else {
      cp.at_bound[static_cast<size_t>(i)] = 1;
    }
  }
  std::sort(moving.begin(), moving.end(),
            [&](Eigen::Index a, Eigen::Index b) { return breakpoint(a) < breakpoint(b); });

  Eigen::VectorXd p = mem.w().transpose() * d;  // W^T d
  cp.c = Eigen::VectorXd::Zero(two_k);
  double f1 = -d.squaredNorm();                     // model slope along d
  double f2 = -theta * f1;                          // model curvature
  double f2_org = std::max(f2, kEps);
  if (two_k > 0) f2 -= p.dot(mem.apply_m(p));
  f2 = std::max(f2, kEps * f2_org);
  double dt_min = -f1 / f2;
  double t_old = 0.0;

  cp.x = x;
  size_t idx = 0;
  for (; idx < moving.size(); ++idx) {
    Eigen::Index b = moving[idx];
    double t_b = breakpoint(b);
    double dt = t_b - t_old;
    if (dt_min < dt) break;  // minimizer lies inside this segment

    // Coordinate b reaches its bound: fix it there and update the
    // directional derivatives of the model.
    double gb = g(b);
    double xb_new = gb < 0.0 ? up(b) : lo(b);
    double zb = xb_new - x(b);
    cp.x(b) = xb_new;
    cp.at_bound[static_cast<size_t>(b)] = 1;
    if (two_k > 0) cp.c += dt * p;
    f1 += dt * f2 + gb * gb + theta * gb * zb;
    f2 -= theta * gb * gb;
    if (two_k > 0) {
      Eigen::VectorXd wb = mem.w().row(b).transpose();
      Eigen::VectorXd m_wb = mem.apply_m(wb);
      f1 -= gb * m_wb.dot(cp.c);
      f2 -= 2.0 * gb * m_wb.dot(p) + gb * gb * m_wb.dot(wb);
      p += gb * wb;
    }
    d(b) = 0.0;
    f2 = std::max(f2, kEps * f2_org);
    if (f1 >= 0.0) {  // model already increasing: stop at this breakpoint
      dt_min = 0.0;
      t_old = t_b;
      ++idx;
      break;
    }
    dt_min = -f1 / f2;
    t_old = t_b;
  }

  dt_min = std::max(dt_min, 0.0);
  double t_cp = t_old + dt_min;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i) != 0.0 && breakpoint(i) > t_old)
      cp.x(i) = std::clamp(x(i) - t_cp * g(i), lo(i), up(i));
  }
  if (two_k > 0) cp.c += dt_min * p;
  return cp;
}

struct SearchOutcome {
  bool ok = false;
  double step = 0.0;
  double f = 0.0;
  Eigen::VectorXd x, g;
  long evals = 0;
};

// Strong Wolfe line search (bracket + zoom), capped at step_max.  The cap
// is the largest feasible step along d, so every trial point stays in the
// box.  If the objective keeps decreasing all the way to the cap, the
// capped point is accepted on sufficient decrease alone.
SearchOutcome wolfe_search(const BoxObjective& objective, const Eigen::VectorXd& x0,
                           double f0, const Eigen::VectorXd& g0, const Eigen::VectorXd& d,
                           double step0, double step_max, int max_evals) {
  constexpr double c1 = 1e-4, c2 = 0.9;
  SearchOutcome out;
  double dphi0 = g0.dot(d);
  if (!(dphi0 < 0.0)) return out;

  Eigen::VectorXd x_try, g_try(x0.size());
  auto eval = [&](double a, double& f, double& dphi) {
    x_try = x0 + a * d;
    f = objective(x_try, g_try);
    dphi = g_try.dot(d);
    ++out.evals;
  };
  auto armijo = [&](double a, double f) { return f <= f0 + c1 * a * dphi0; };
  auto accept = [&](double a, double f) {
    out.ok = true;
    out.step = a;
    out.f = f;
    out.x = x_try;
    out.g = g_try;
  };

  // Safeguarded quadratic interpolation inside [a_lo, a_hi].
  auto interpolate = [](double a_lo, double f_lo, double d_lo, double a_hi, double f_hi) {
    double dt = a_hi - a_lo;
    double denom = 2.0 * (f_hi - f_lo - d_lo * dt);
    double a = (denom != 0.0) ? a_lo - d_lo * dt * dt / denom : a_lo + 0.5 * dt;
    double lo = std::min(a_lo, a_hi), hi = std::max(a_lo, a_hi);
    double pad = 0.1 * (hi - lo);
    if (!(a > lo + pad) || !(a < hi - pad)) a = a_lo + 0.5 * dt;
    return a;
  };

  double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
  double a = std::min(step0, step_max);
  double a_lo = -1.0, f_lo = 0.0, d_lo = 0.0, a_hi = 0.0, f_hi = 0.0;
  bool bracketed = false;

  for (int iter = 0; out.evals < max_evals; ++iter) {
    double f, dphi;
    eval(a, f, dphi);
    if (!std::isfinite(f)) {  // overshot into an overflow region: shrink
      a = a_prev + 0.25 * (a - a_prev);
      continue;
    }
    if (!armijo(a, f) || (iter > 0 && f >= f_prev)) {
      a_lo = a_prev; f_lo = f_prev; d_lo = d_prev;
      a_hi = a; f_hi = f;
      bracketed = true;
      break;
    }
    if (std::abs(dphi) <= -c2 * dphi0) {
      accept(a, f);
      return out;
    }
    if (dphi >= 0.0) {
      a_lo = a; f_lo = f; d_lo = dphi;
      a_hi = a_prev; f_hi = f_prev;
      bracketed = true;
      break;
    }
    if (a >= step_max * (1.0 - 1e-12)) {
      // Still descending at the feasible cap.
      if (armijo(a, f)) accept(a, f);
      return out;
    }
    a_prev = a; f_prev = f; d_prev = dphi;
    a = std::min(2.0 * a, step_max);
  }
  if (!bracketed) return out;

  while (out.evals < max_evals) {
    double a_j = interpolate(a_lo, f_lo, d_lo, a_hi, f_hi);
    double span = std::abs(a_hi - a_lo);
    if (span < 1e-14 * std::max(1.0, std::abs(a_lo))) break;
    double f, dphi;
    eval(a_j, f, dphi);
    if (!std::isfinite(f)) f = kInf;
    if (!armijo(a_j, f) || f >= f_lo) {
      a_hi = a_j; f_hi = f;
    } else {
      if (std::abs(dphi) <= -c2 * dphi0) {
        accept(a_j, f);
        return out;
      }
      if (dphi * (a_hi - a_lo) >= 0.0) {
        a_hi = a_lo; f_hi = f_lo;
      }
      a_lo = a_j; f_lo = f; d_lo = dphi;
    }
  }
  // Curvature never certified; fall back to the best sufficient-decrease
  // point so the outer loop can still make progress.
  if (a_lo > 0.0) {
    double f, dphi;
    eval(a_lo, f, dphi);
    if (std::isfinite(f) && armijo(a_lo, f)) accept(a_lo, f);
  }
  return out;
}

}  // namespace

void LbfgsbOptions::validate() const {
  if (memory < 1) throw std::invalid_argument("LbfgsbOptions: memory must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("LbfgsbOptions: max_iters must be >= 1");
  if (pgtol < 0.0 || ftol < 0.0)
    throw std::invalid_argument("LbfgsbOptions: tolerances must be >= 0");
  if (max_evals_per_search < 4)
    throw std::invalid_argument("LbfgsbOptions: max_evals_per_search too small");
}

LbfgsbResult lbfgsb_minimize(const BoxObjective& objective, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const LbfgsbOptions& opts) {
  opts.validate();
  auto n = x0.size();
  if (lower.size() != n || upper.size() != n)
    throw std::invalid_argument("lbfgsb_minimize: bound size mismatch");
  if ((lower.array() > upper.array()).any())
    throw std::invalid_argument("lbfgsb_minimize: lower bound exceeds upper bound");

  LbfgsbResult res;
  res.x = clamp_to_box(x0, lower, upper);
  res.grad.resize(n);
  res.f = objective(res.x, res.grad);
  res.evaluations = 1;
  if (!std::isfinite(res.f))
    throw std::runtime_error("lbfgsb_minimize: objective not finite at start");

  CorrectionMemory mem(opts.memory);
  bool failed_once = false;

  for (res.iterations = 0; res.iterations < opts.max_iters; ++res.iterations) {
    if (projected_gradient_inf_norm(res.x, res.grad, lower, upper) <= opts.pgtol) {
      res.status = LbfgsbStatus::converged_grad;
      return res;
    }

    CauchyPoint cp = cauchy_point(res.x, res.grad, lower, upper, mem);

    std::vector<Eigen::Index> free_set;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!cp.at_bound[static_cast<size_t>(i)] && upper(i) > lower(i))
        free_set.push_back(i);

    // Minimize the quadratic model over the free coordinates (direct primal
    // method): d_F = -B_FF^{-1} r_F via the Sherman-Morrison-Woodbury form
    // of the compact representation.
    Eigen::VectorXd x_bar = cp.x;
    if (!free_set.empty()) {
      double theta = mem.theta();
      Eigen::VectorXd r_full = res.grad + theta * (cp.x - res.x);
      if (mem.pairs() > 0) r_full -= mem.w() * mem.apply_m(cp.c);
      auto nf = static_cast<Eigen::Index>(free_set.size());
      Eigen::VectorXd r_f(nf);
      for (Eigen::Index i = 0; i < nf; ++i) r_f(i) = r_full(free_set[static_cast<size_t>(i)]);

      Eigen::VectorXd d_f = -r_f / theta;
      if (mem.pairs() > 0) {
        int two_k = static_cast<int>(mem.w().cols());
        Eigen::MatrixXd w_f(nf, two_k);
        for (Eigen::Index i = 0; i < nf; ++i)
          w_f.row(i) = mem.w().row(free_set[static_cast<size_t>(i)]);
        Eigen::MatrixXd wtw = w_f.transpose() * w_f;
        Eigen::VectorXd wtr = w_f.transpose() * r_f;
        Eigen::MatrixXd k_mat =
            Eigen::MatrixXd::Identity(two_k, two_k) - mem.apply_m(wtw) / theta;
        Eigen::VectorXd v = k_mat.partialPivLu().solve(mem.apply_m(wtr));
        d_f -= (w_f * v) / (theta * theta);
      }

      // Longest model step that stays inside the box.
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < nf; ++i) {
        Eigen::Index ix = free_set[static_cast<size_t>(i)];
        double delta = d_f(i);
        if (delta > 0.0)
          alpha = std::min(alpha, (upper(ix) - x_bar(ix)) / delta);
        else if (delta < 0.0)
          alpha = std::min(alpha, (lower(ix) - x_bar(ix)) / delta);
      }
      alpha = std::max(alpha, 0.0);
      for (Eigen::Index i = 0; i < nf; ++i)
        x_bar(free_set[static_cast<size_t>(i)]) += alpha * d_f(i);
      x_bar = clamp_to_box(x_bar, lower, upper);
    }

    Eigen::VectorXd dir = x_bar - res.x;
    double dir_norm = dir.cwiseAbs().maxCoeff();
    double descent = res.grad.dot(dir);
    if (dir_norm < 1e-15 || !(descent < 0.0)) {
      // The model proposes no usable move.  With stale curvature, drop it
      // and retry as projected steepest descent; otherwise stop.
      if (mem.pairs() > 0 && !failed_once) {
        mem.clear();
        failed_once = true;
        --res.iterations;
        continue;
      }
      res.status = LbfgsbStatus::converged_grad;
      return res;
    }

    double step_max = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dir(i) > 0.0)
        step_max = std::min(step_max, (upper(i) - res.x(i)) / dir(i));
      else if (dir(i) < 0.0)
        step_max = std::min(step_max, (lower(i) - res.x(i)) / dir(i));
    }
    step_max = std::min(std::max(step_max, 1.0), 1e10);
    double step0 = 1.0;
    if (res.iterations == 0 && mem.pairs() == 0)
      step0 = std::min(1.0 / std::max(dir.norm(), 1e-12), step_max);

    SearchOutcome ls = wolfe_search(objective, res.x, res.f, res.grad, dir, step0,
                                    step_max, opts.max_evals_per_search);
    res.evaluations += ls.evals;
    if (!ls.ok) {
      if (mem.pairs() > 0 && !failed_once) {
        mem.clear();
        failed_once = true;
        --res.iterations;
        continue;
      }
      res.status = LbfgsbStatus::line_search_failed;
      return res;
    }
    failed_once = false;

    Eigen::VectorXd s = ls.x - res.x;
    Eigen::VectorXd y = ls.g - res.grad;
    double f_old = res.f;
    res.x = ls.x;
    res.f = ls.f;
    res.grad = ls.g;
    mem.offer(s, y);

    // First-order check outranks the decrease test when both hold.
    if (projected_gradient_inf_norm(res.x, res.grad, lower, upper) <= opts.pgtol) {
      res.status = LbfgsbStatus::converged_grad;
      return res;
    }
    if (f_old - res.f <= opts.ftol * std::max({std::abs(f_old), std::abs(res.f), 1.0})) {
      res.status = LbfgsbStatus::converged_ftol;
      return res;
    }
  }
  res.status = LbfgsbStatus::max_iters;
  return res;
}

}  // namespace cicme
