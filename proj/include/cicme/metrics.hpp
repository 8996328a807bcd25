#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace cicme {

using BinaryGraph = Eigen::MatrixXi;

// Keeps edges with weight strictly above tau; the diagonal is always clear.
BinaryGraph threshold_graph(const Eigen::MatrixXd& w, double tau = 0.3);

// Structural Hamming distance: additions and deletions count one each; an
// edge present in both graphs with opposite orientation counts one.
int shd(const BinaryGraph& estimated, const BinaryGraph& truth);

// Size of the symmetric difference between the estimated and true parent
// sets of variable j.
int local_shd(const BinaryGraph& estimated, const BinaryGraph& truth, int j);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);  // 0 for fewer than 2 values
// Linear-interpolation quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> v, double q);

struct ShdSummaryRow {
  std::string experiment;
  int n = 0;
  std::string method;
  int repeats = 0;
  double mean_shd = 0.0;
  double std_shd = 0.0;
};

struct StableSummaryRow {
  std::string experiment;
  int n = 0;
  std::string variable;
  int repeats = 0;
  int stable_count = 0;
  double mean_lshd = 0.0;  // over stable repeats only; meaningless when count is 0
};

ShdSummaryRow summarize_shd(const std::string& experiment, int n, const std::string& method,
                            const std::vector<double>& per_repeat_mean_shd);

// One (stable?, lshd) observation per repeat; the mean covers stable
// repeats only.
StableSummaryRow summarize_stability(const std::string& experiment, int n,
                                     const std::string& variable,
                                     const std::vector<std::pair<bool, int>>& observations);

// Table cell for the mean-LSHD column: "-" when nothing was stable.
std::string lshd_cell(const StableSummaryRow& row);

}  // namespace cicme
