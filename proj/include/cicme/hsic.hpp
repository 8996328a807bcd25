#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cicme/mlp.hpp"

namespace cicme {

struct HsicOptions {
  int permutations = 1000;       // for the fallback / oracle p-value
  std::uint64_t seed = 0;        // permutation stream
  bool force_permutation = false;

  void validate() const;
};

struct HsicResult {
  double statistic = 0.0;   // n * HSIC_b
  double p_value = 1.0;
  double bandwidth = 0.0;   // Gaussian kernel width actually used
  bool permutation_fallback = false;  // Gamma moments unusable, permuted instead
};

// Median of the pairwise absolute differences |r_i - r_j|, i < j, found by
// value bisection over the sorted sample instead of materializing all
// n(n-1)/2 gaps.
double median_abs_gap(const Eigen::VectorXd& r);

// Tests independence between a continuous residual (Gaussian kernel,
// median-heuristic bandwidth) and a categorical domain index (delta
// kernel) with the biased HSIC estimator.  The null distribution is
// approximated by a two-moment Gamma fit; when the estimated null variance
// or mean is non-positive (tiny samples), the test falls back to the
// permutation p-value and flags it.
HsicResult domain_independence_test(const Eigen::VectorXd& residuals,
                                    const Eigen::VectorXi& domain,
                                    const HsicOptions& opts = {});

// Permutation p-value for the same statistic: labels are permuted B times
// and p = (1 + #{T_perm >= T_obs}) / (B + 1).
double permutation_pvalue(const Eigen::VectorXd& residuals,
                          const Eigen::VectorXi& domain, int permutations,
                          std::uint64_t seed);

struct VariableDecision {
  double statistic = 0.0;
  double p_value = 0.0;
  double bandwidth = 0.0;
  bool stable = false;
  bool permutation_fallback = false;
  std::string error;  // non-empty when the test failed; forces unstable
};

struct StabilityReport {
  std::vector<VariableDecision> variables;
  double alpha = 0.05;

  std::vector<int> stable_set() const;  // indices with stable verdict
};

// Runs one residual-vs-domain test per variable of the pooled model.
// Verdict: stable iff p > alpha.  A per-variable numerical failure is
// recorded in the report and counts as unstable.
StabilityReport detect_stable(const ModelSet& models, const Eigen::MatrixXd& pooled_x,
                              const Eigen::VectorXi& domain, double alpha,
                              const HsicOptions& opts = {});

}  // namespace cicme
