#include "cicme/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cicme {

BinaryGraph threshold_graph(const Eigen::MatrixXd& w, double tau) {
  if (w.rows() != w.cols()) throw std::invalid_argument("threshold_graph: matrix not square");
  if (!w.allFinite()) throw std::invalid_argument("threshold_graph: non-finite weights");
  BinaryGraph g = (w.array() > tau).cast<int>();
  g.diagonal().setZero();
  return g;
}

namespace {

void check_same_shape(const BinaryGraph& a, const BinaryGraph& b, const char* who) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument(std::string(who) + ": graphs must be square and same size");
}

}  // namespace

int shd(const BinaryGraph& estimated, const BinaryGraph& truth) {
  check_same_shape(estimated, truth, "shd");
  int d = static_cast<int>(estimated.rows());
  int total = 0;
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      int e_ab = estimated(a, b) != 0, e_ba = estimated(b, a) != 0;
      int t_ab = truth(a, b) != 0, t_ba = truth(b, a) != 0;
      int diff = std::abs(e_ab - t_ab) + std::abs(e_ba - t_ba);
      bool reversal = diff == 2 && e_ab + e_ba == 1 && t_ab + t_ba == 1;
      total += reversal ? 1 : diff;
    }
  }
  return total;
}

int local_shd(const BinaryGraph& estimated, const BinaryGraph& truth, int j) {
  check_same_shape(estimated, truth, "local_shd");
  if (j < 0 || j >= estimated.rows())
    throw std::invalid_argument("local_shd: variable out of range");
  int count = 0;
  for (int k = 0; k < estimated.rows(); ++k)
    if ((estimated(k, j) != 0) != (truth(k, j) != 0)) ++count;
  return count;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0,1]");
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

ShdSummaryRow summarize_shd(const std::string& experiment, int n, const std::string& method,
                            const std::vector<double>& per_repeat_mean_shd) {
  if (per_repeat_mean_shd.empty())
    throw std::invalid_argument("summarize_shd: no repeats");
  ShdSummaryRow row;
  row.experiment = experiment;
  row.n = n;
  row.method = method;
  row.repeats = static_cast<int>(per_repeat_mean_shd.size());
  row.mean_shd = mean(per_repeat_mean_shd);
  row.std_shd = sample_std(per_repeat_mean_shd);
  return row;
}

StableSummaryRow summarize_stability(const std::string& experiment, int n,
                                     const std::string& variable,
                                     const std::vector<std::pair<bool, int>>& observations) {
  if (observations.empty())
    throw std::invalid_argument("summarize_stability: no repeats");
  StableSummaryRow row;
  row.experiment = experiment;
  row.n = n;
  row.variable = variable;
  row.repeats = static_cast<int>(observations.size());
  double lshd_sum = 0.0;
  for (const auto& [stable, lshd] : observations) {
    if (!stable) continue;
    ++row.stable_count;
    lshd_sum += static_cast<double>(lshd);
  }
  row.mean_lshd = row.stable_count > 0 ? lshd_sum / row.stable_count : 0.0;
  return row;
}

std::string lshd_cell(const StableSummaryRow& row) {
  if (row.stable_count == 0) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", row.mean_lshd);
  return buf;
}

}  // namespace cicme
