#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "cicme/acyclicity.hpp"
#include "cicme/rng.hpp"

using namespace cicme;

namespace {

// tr(exp(S)) via the power series, high enough order to be exact in double
// precision for the small matrices used here.
double series_trace_exp(const Eigen::MatrixXd& s, int terms = 40) {
  int d = static_cast<int>(s.rows());
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(d, d);
  double tr = static_cast<double>(d);
  for (int k = 1; k < terms; ++k) {
    acc = (acc * s) / static_cast<double>(k);
    tr += acc.trace();
  }
  return tr;
}

Eigen::MatrixXd random_band_matrix(int d, Rng& rng) {
  Eigen::MatrixXd w(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) w(i, j) = rng.uniform(-1.0, 1.0);
  return w;
}

}  // namespace

TEST_CASE("zero matrix has zero measure and zero gradient") {
  AcyclicityResult r = acyclicity(Eigen::MatrixXd::Zero(4, 4));
  CHECK(r.h == doctest::Approx(0.0));
  CHECK(r.grad.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("two-cycle value is 2 cosh(1) - 2") {
  Eigen::MatrixXd w(2, 2);
  w << 0, 1,
       1, 0;
  AcyclicityResult r = acyclicity(w);
  CHECK(r.h == doctest::Approx(2.0 * std::cosh(1.0) - 2.0).epsilon(1e-12));
}

TEST_CASE("triangular matrices are acyclic") {
  Rng rng(5);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(5, 5);
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < j; ++i) w(i, j) = rng.uniform(-2.0, 2.0);
  AcyclicityResult r = acyclicity(w);
  CHECK(std::abs(r.h) < 1e-10);
}

TEST_CASE("cycle strength increases the measure") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(0, 1) = w(1, 2) = w(2, 0) = 0.5;
  double weak = acyclicity(w).h;
  w(0, 1) = w(1, 2) = w(2, 0) = 1.0;
  double strong = acyclicity(w).h;
  CHECK(weak > 0.0);
  CHECK(strong > weak);
}

TEST_CASE("value matches the power series on random matrices") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd w = random_band_matrix(4, rng);
    Eigen::MatrixXd s = w.cwiseProduct(w);
    double expect = series_trace_exp(s) - 4.0;
    CHECK(acyclicity(w).h == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(17);
  const double step = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd w = random_band_matrix(4, rng);
    AcyclicityResult r = acyclicity(w);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(i, j) += step;
        wm(i, j) -= step;
        double fd = (acyclicity(wp).h - acyclicity(wm).h) / (2.0 * step);
        CHECK(std::abs(fd - r.grad(i, j)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("squared parameterization reports the transposed exponential") {
  Rng rng(23);
  Eigen::MatrixXd w = random_band_matrix(3, rng);
  Eigen::MatrixXd s = w.cwiseProduct(w);
  Eigen::MatrixXd dh_ds;
  double h = trace_expm_h(s, dh_ds);
  CHECK(h == doctest::Approx(series_trace_exp(s) - 3.0).epsilon(1e-10));
  // Chain rule back to W space must agree with the direct gradient.
  Eigen::MatrixXd chained = dh_ds.cwiseProduct(2.0 * w);
  CHECK((chained - acyclicity(w).grad).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("overflowing exponentials backtrack instead of dying") {
  // A line search can probe weights far outside the representable range;
  // the value must come back huge-but-finite with a finite uphill gradient.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  s(0, 1) = 2000.0;
  s(1, 0) = 2000.0;
  Eigen::MatrixXd dh_ds;
  double h = trace_expm_h(s, dh_ds);
  CHECK(std::isfinite(h));
  CHECK(h >= 1e99);
  CHECK(dh_ds.allFinite());
  CHECK(dh_ds.maxCoeff() > 0.0);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 2);
  w(0, 1) = w(1, 0) = 50.0;  // w*w entries of 2500 overflow e^S
  AcyclicityResult r = acyclicity(w);
  CHECK(std::isfinite(r.h));
  CHECK(r.grad.allFinite());
}

TEST_CASE("rectangular input is rejected") {
  CHECK_THROWS(acyclicity(Eigen::MatrixXd::Zero(2, 3)));
}
