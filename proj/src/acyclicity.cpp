#include "cicme/acyclicity.hpp"

#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

namespace cicme {

double trace_expm_h(const Eigen::MatrixXd& s, Eigen::MatrixXd& dh_ds) {
  if (s.rows() != s.cols()) throw std::invalid_argument("trace_expm_h: matrix not square");
  Eigen::MatrixXd e = s.exp();
  if (!e.allFinite()) {
    // A line search may probe points where tr(e^S) is not representable.
    // Hand back a huge finite value so the caller backtracks on it; the
    // gradient only has to point uphill, so clamp before exponentiating.
    dh_ds = s.cwiseMin(50.0).exp().transpose();
    if (!dh_ds.allFinite()) dh_ds.setOnes();
    return 1e100;
  }
  dh_ds = e.transpose();
  return e.trace() - static_cast<double>(s.rows());
}

AcyclicityResult acyclicity(const Eigen::MatrixXd& w) {
  if (!w.allFinite()) throw std::invalid_argument("acyclicity: non-finite weights");
  Eigen::MatrixXd dh_ds;
  AcyclicityResult out;
  out.h = trace_expm_h(w.cwiseProduct(w), dh_ds);
  out.grad = dh_ds.cwiseProduct(2.0 * w);
  return out;
}

}  // namespace cicme
