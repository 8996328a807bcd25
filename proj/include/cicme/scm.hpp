#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cicme {

struct Edge {
  int parent = 0;
  int child = 0;
  double weight = 0.0;
};

// Ground-truth data-generating process: a linear DAG over d variables where
// each variable is a weighted sum of its parents plus additive Gaussian
// noise.  A noise std of zero pins the variable's noise term to its mean,
// which models a sensor held at a constant set point.
struct FcmSpec {
  int d = 0;
  std::vector<Edge> edges;
  Eigen::VectorXd noise_mean;
  Eigen::VectorXd noise_std;
  std::vector<std::string> names;

  void validate() const;                    // throws on bad shapes, indices, cycles
  std::vector<int> topological_order() const;  // throws if the edge set is cyclic
  Eigen::MatrixXi graph() const;            // graph(k, j) == 1 iff edge k -> j with weight != 0
};

struct WeightOverride {
  int parent = 0;
  int child = 0;
  double weight = 0.0;  // zero removes the edge in this domain
};

struct NoiseOverride {
  int variable = 0;
  double mean = 0.0;
  double std = 1.0;
};

// One domain = the shared base process with domain-specific interventions.
struct DomainSpec {
  FcmSpec base;
  int k = 1;  // 1-based domain index
  std::vector<WeightOverride> weight_overrides;
  std::vector<NoiseOverride> noise_overrides;

  FcmSpec resolved() const;  // base with overrides applied
  void validate() const;
};

struct MultiDomainDataset {
  std::vector<Eigen::MatrixXd> domains;  // one n_k x d sample block per domain
  std::vector<DomainSpec> truth;         // generating process per domain

  int num_domains() const { return static_cast<int>(domains.size()); }
  int dim() const { return domains.empty() ? 0 : static_cast<int>(domains[0].cols()); }
  void validate() const;
};

enum class Experiment { E1, E2, E3, E4 };

Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);

// The four-variable benchmark process: X1 and X2 are exogenous, X3 = X1 +
// X2 + N3, and X4 = h * X3 + N4.  All noise is standard normal.
FcmSpec benchmark_fcm(double h = 1.0);

// Draws n rows from the domain's process.  Deterministic in (spec, n, seed).
Eigen::MatrixXd sample_domain(const DomainSpec& spec, int n, std::uint64_t seed);

// Builds the three-domain benchmark dataset for one experimental condition:
//   E1: the X3 -> X4 mechanism strength varies per domain,
//   E2: as E1, but one uniformly chosen domain loses the edge entirely,
//   E3: the mean of X2's noise shifts per domain,
//   E4: X2 is pinned to a per-domain constant (noise std zero).
// Per-domain parameters are (random sign) * Uniform[0.5, 2].
MultiDomainDataset make_experiment(Experiment e, int n, std::uint64_t seed);

// Row-concatenates all domains; second member maps each row to its 1-based
// domain index.  Domain blocks appear in order, so rows of one domain are
// contiguous.
std::pair<Eigen::MatrixXd, Eigen::VectorXi> pool(const MultiDomainDataset& ds);

}  // namespace cicme
