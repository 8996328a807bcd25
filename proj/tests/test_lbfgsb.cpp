#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "cicme/lbfgsb.hpp"
#include "cicme/rng.hpp"

using namespace cicme;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd free_vec(int n, double v) { return Eigen::VectorXd::Constant(n, v); }

// Slow but trustworthy oracle for box-constrained convex quadratics:
// projected gradient descent run far past convergence.
Eigen::VectorXd projected_gradient_qp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                      const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                      Eigen::VectorXd x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  double step = 1.0 / es.eigenvalues().maxCoeff();
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd g = A * x - b;
    x = (x - step * g).cwiseMax(lower).cwiseMin(upper);
  }
  return x;
}

// Inf-norm of the projected gradient: the first-order measure the solver
// itself drives to zero; at a KKT point it vanishes.
double kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                    const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double pg = x(i) - g(i);
    pg = std::min(std::max(pg, lower(i)), upper(i)) - x(i);
    r = std::max(r, std::abs(pg));
  }
  return r;
}

}  // namespace

TEST_CASE("unconstrained quadratic lands on the exact minimizer") {
  const int n = 6;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = 1.0 + i;
    b(i) = std::pow(-1, i) * (i + 1);
  }
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
  LbfgsbResult r = lbfgsb_minimize(f, Eigen::VectorXd::Zero(n), free_vec(n, -kInf),
                                   free_vec(n, kInf));
  Eigen::VectorXd expect = A.ldlt().solve(b);
  CHECK(r.status == LbfgsbStatus::converged_grad);
  CHECK((r.x - expect).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("active bounds clip the quadratic minimizer") {
  // Minimize 0.5*||x - c||^2 with c outside the box: solution is the
  // projection of c.
  Eigen::VectorXd c(3);
  c << 5.0, -7.0, 0.25;
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = x - c;
    return 0.5 * (x - c).squaredNorm();
  };
  Eigen::VectorXd lower = free_vec(3, -1.0), upper = free_vec(3, 1.0);
  LbfgsbResult r = lbfgsb_minimize(f, Eigen::VectorXd::Zero(3), lower, upper);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(-1.0));
  CHECK(r.x(2) == doctest::Approx(0.25));
}

TEST_CASE("coupled box quadratics match a projected-gradient oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 5;
    Eigen::MatrixXd M(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) M(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::MatrixXd A = M.transpose() * M + 0.1 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(n), lower(n), upper(n), x0(n);
    for (int i = 0; i < n; ++i) {
      b(i) = rng.uniform(-2.0, 2.0);
      lower(i) = rng.uniform(-1.0, -0.2);
      upper(i) = rng.uniform(0.2, 1.0);
      x0(i) = rng.uniform(lower(i), upper(i));
    }
    auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      g = A * x - b;
      return 0.5 * x.dot(A * x) - b.dot(x);
    };
    LbfgsbResult r = lbfgsb_minimize(f, x0, lower, upper);
    Eigen::VectorXd oracle = projected_gradient_qp(A, b, lower, upper, x0);
    CHECK((r.x - oracle).cwiseAbs().maxCoeff() < 1e-4);
    CHECK(kkt_residual(r.x, r.grad, lower, upper) < 1e-4);
  }
}

TEST_CASE("rosenbrock in 2 and 8 dimensions") {
  auto rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    double f = 0.0;
    g.setZero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      double a = x(i + 1) - x(i) * x(i), b = 1.0 - x(i);
      f += 100.0 * a * a + b * b;
      g(i) += -400.0 * a * x(i) - 2.0 * b;
      g(i + 1) += 200.0 * a;
    }
    return f;
  };
  for (int n : {2, 8}) {
    Eigen::VectorXd x0 = free_vec(n, -1.2);
    LbfgsbResult r = lbfgsb_minimize(rosen, x0, free_vec(n, -kInf), free_vec(n, kInf));
    CHECK((r.x.array() - 1.0).abs().maxCoeff() < 1e-4);
    CHECK(r.f < 1e-8);
  }
}

TEST_CASE("rosenbrock with a bound cutting off the minimum") {
  auto rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    double a = x(1) - x(0) * x(0), b = 1.0 - x(0);
    g.resize(2);
    g(0) = -400.0 * a * x(0) - 2.0 * b;
    g(1) = 200.0 * a;
    return 100.0 * a * a + b * b;
  };
  Eigen::VectorXd lower(2), upper(2), x0(2);
  lower << -kInf, -kInf;
  upper << 0.5, kInf;  // x(0) <= 0.5 < 1
  x0 << -1.0, 1.0;
  LbfgsbResult r = lbfgsb_minimize(rosen, x0, lower, upper);
  // Constrained optimum sits on the bound with the curve tracked exactly.
  CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(r.x(1) == doctest::Approx(0.25).epsilon(1e-4));
  CHECK(kkt_residual(r.x, r.grad, lower, upper) < 1e-4);
}

TEST_CASE("equal bounds pin variables exactly") {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  };
  Eigen::VectorXd lower(3), upper(3), x0(3);
  lower << 2.0, -kInf, -1.0;
  upper << 2.0, kInf, 1.0;
  x0 << 2.0, 3.0, 0.5;
  LbfgsbResult r = lbfgsb_minimize(f, x0, lower, upper);
  CHECK(r.x(0) == 2.0);  // bitwise: never moved
  CHECK(std::abs(r.x(1)) < 1e-6);
  CHECK(std::abs(r.x(2)) < 1e-6);
}

TEST_CASE("start at a corner with the descent direction blocked") {
  // Gradient pushes outward at the corner; the solver must recognize the
  // stationary point rather than looping.
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g << 1.0, 1.0;  // constant slope away from the corner
    return x(0) + x(1);
  };
  Eigen::VectorXd lower(2), upper(2), x0(2);
  lower << 0.0, 0.0;
  upper << 1.0, 1.0;
  x0 << 0.0, 0.0;
  LbfgsbResult r = lbfgsb_minimize(f, x0, lower, upper);
  CHECK(r.x(0) == 0.0);
  CHECK(r.x(1) == 0.0);
  CHECK(r.status == LbfgsbStatus::converged_grad);
}

TEST_CASE("nonconvex scalar objective still reaches a stationary point") {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    g(0) = std::cos(x(0)) + 0.2 * x(0);
    return std::sin(x(0)) + 0.1 * x(0) * x(0);
  };
  LbfgsbResult r = lbfgsb_minimize(f, free_vec(1, 2.0), free_vec(1, -kInf), free_vec(1, kInf));
  Eigen::VectorXd g(1);
  f(r.x, g);
  CHECK(std::abs(g(0)) < 1e-5);
}

TEST_CASE("ill-conditioned quadratic converges with limited memory") {
  const int n = 10;
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) diag(i) = std::pow(10.0, i % 5);  // condition 1e4
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = diag.asDiagonal() * x;
    return 0.5 * x.dot(g);
  };
  LbfgsbOptions opts;
  opts.memory = 5;
  LbfgsbResult r = lbfgsb_minimize(f, free_vec(n, 1.0), free_vec(n, -kInf),
                                   free_vec(n, kInf), opts);
  CHECK(r.f < 1e-9);
}

TEST_CASE("invalid boxes and options are rejected") {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = x;
    return 0.5 * x.squaredNorm();
  };
  Eigen::VectorXd lower(2), upper(2), x0(2);
  lower << 0.0, 0.0;
  upper << -1.0, 1.0;  // crossed bounds
  x0 << 0.0, 0.0;
  CHECK_THROWS(lbfgsb_minimize(f, x0, lower, upper));
  CHECK_THROWS(lbfgsb_minimize(f, x0, lower.head(1), upper.head(1)));  // size mismatch

  LbfgsbOptions bad;
  bad.memory = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("start outside the box is clamped into it") {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = x;
    return 0.5 * x.squaredNorm();
  };
  Eigen::VectorXd lower = free_vec(2, 1.0), upper = free_vec(2, 3.0);
  LbfgsbResult r = lbfgsb_minimize(f, free_vec(2, 10.0), lower, upper);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(1.0));
}
