#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cicme/hsic.hpp"
#include "cicme/mlp.hpp"
#include "cicme/notears.hpp"
#include "cicme/scm.hpp"

namespace cicme {

enum class Method { cicme_f, cicme_l, notears_pool, notears_ind };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct EngineConfig {
  ModelConfig model;
  SolverConfig solver;
  double alpha = 0.05;      // stability-test level
  double gamma = 10.0;      // structure-penalty weight
  double threshold = 0.3;   // edge-pruning cutoff
  HsicOptions hsic;
  std::uint64_t seed = 0;   // drives every initialization for this run

  void validate() const;
};

struct StepTimings {
  double step1 = 0.0;  // pooled fit, seconds
  double step2 = 0.0;  // stability tests
  double step3 = 0.0;  // per-domain fits
  double total() const { return step1 + step2 + step3; }
};

struct CicmeResult {
  Method method = Method::notears_pool;
  Eigen::MatrixXd w_pool;                    // empty when no pooled fit ran
  std::optional<ModelSet> pooled_models;
  std::optional<StabilityReport> stability;  // present for the cicme variants
  std::vector<Eigen::MatrixXd> w_domains;    // one adjacency per domain
  std::vector<ModelSet> domain_models;       // empty for notears-pool
  std::vector<char> domain_converged;
  bool pool_converged = true;
  StepTimings timings;
  long evaluations = 0;
};

// Mask whose stable columns are all ones (diagonal included), others zero.
Eigen::MatrixXd stable_mask(int d, const std::vector<int>& stable);

// Step 1: one constrained fit on the pooled sample.
FitResult step1_pool(const Eigen::MatrixXd& pooled_x, const EngineConfig& config);

// Step 3, freeze flavor: per-domain fits where stable variables' networks
// are loaded from the pooled fit and pinned; unstable ones start fresh.
std::vector<FitResult> step3_freeze(const MultiDomainDataset& ds, const ModelSet& pooled,
                                    const std::vector<int>& stable,
                                    const EngineConfig& config);

// Step 3, penalty flavor: per-domain fits from fresh initializations with
// the masked pull of stable columns toward the pooled adjacency.
std::vector<FitResult> step3_penalty(const MultiDomainDataset& ds,
                                     const Eigen::MatrixXd& w_pool,
                                     const std::vector<int>& stable,
                                     const EngineConfig& config);

// Runs one method end to end on a dataset.
CicmeResult run(const MultiDomainDataset& ds, Method method, const EngineConfig& config);

// Runs several methods on the same dataset, computing the shared pooled
// fit and stability tests once.  Each entry is bit-identical to what run()
// would produce for that method alone.
std::map<Method, CicmeResult> run_suite(const MultiDomainDataset& ds,
                                        const std::set<Method>& methods,
                                        const EngineConfig& config);

struct EvalRecord {
  std::vector<int> per_domain_shd;
  double mean_shd = 0.0;
  std::vector<int> pool_lshd;  // per variable, thresholded pooled graph vs the base graph
};

EvalRecord evaluate(const CicmeResult& result, const MultiDomainDataset& ds,
                    double threshold);

nlohmann::json cicme_result_to_json(const CicmeResult& result, double threshold);

}  // namespace cicme
