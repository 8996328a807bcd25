#include "cicme/scm.hpp"

#include <algorithm>
#include <stdexcept>

#include "cicme/rng.hpp"

namespace cicme {

void FcmSpec::validate() const {
  if (d < 1) throw std::invalid_argument("FcmSpec: d must be positive");
  if (noise_mean.size() != d || noise_std.size() != d)
    throw std::invalid_argument("FcmSpec: noise vectors must have length d");
  if (!names.empty() && static_cast<int>(names.size()) != d)
    throw std::invalid_argument("FcmSpec: names must be empty or length d");
  for (int j = 0; j < d; ++j)
    if (noise_std(j) < 0.0)
      throw std::invalid_argument("FcmSpec: negative noise std");
  for (const Edge& e : edges) {
    if (e.parent < 0 || e.parent >= d || e.child < 0 || e.child >= d)
      throw std::invalid_argument("FcmSpec: edge index out of range");
    if (e.parent == e.child)
      throw std::invalid_argument("FcmSpec: self-loop");
  }
  topological_order();  // throws on cycles
}

std::vector<int> FcmSpec::topological_order() const {
  // Kahn's algorithm over nonzero-weight edges.
  std::vector<int> indegree(d, 0);
  std::vector<std::vector<int>> children(d);
  for (const Edge& e : edges) {
    if (e.weight == 0.0) continue;
    children[e.parent].push_back(e.child);
    ++indegree[e.child];
  }
  std::vector<int> frontier, order;
  for (int j = 0; j < d; ++j)
    if (indegree[j] == 0) frontier.push_back(j);
  while (!frontier.empty()) {
    int v = frontier.back();
    frontier.pop_back();
    order.push_back(v);
    for (int c : children[v])
      if (--indegree[c] == 0) frontier.push_back(c);
  }
  if (static_cast<int>(order.size()) != d)
    throw std::invalid_argument("FcmSpec: edge set contains a cycle");
  return order;
}

Eigen::MatrixXi FcmSpec::graph() const {
  Eigen::MatrixXi g = Eigen::MatrixXi::Zero(d, d);
  for (const Edge& e : edges)
    if (e.weight != 0.0) g(e.parent, e.child) = 1;
  return g;
}

FcmSpec DomainSpec::resolved() const {
  FcmSpec fcm = base;
  for (const WeightOverride& o : weight_overrides) {
    bool found = false;
    for (Edge& e : fcm.edges) {
      if (e.parent == o.parent && e.child == o.child) {
        e.weight = o.weight;
        found = true;
        break;
      }
    }
    if (!found) fcm.edges.push_back({o.parent, o.child, o.weight});
  }
  for (const NoiseOverride& o : noise_overrides) {
    if (o.variable < 0 || o.variable >= fcm.d)
      throw std::invalid_argument("DomainSpec: noise override out of range");
    fcm.noise_mean(o.variable) = o.mean;
    fcm.noise_std(o.variable) = o.std;
  }
  return fcm;
}

void DomainSpec::validate() const {
  if (k < 1) throw std::invalid_argument("DomainSpec: domain index must be >= 1");
  resolved().validate();
}

void MultiDomainDataset::validate() const {
  if (domains.empty()) throw std::invalid_argument("dataset: no domains");
  if (truth.size() != domains.size())
    throw std::invalid_argument("dataset: truth/domain count mismatch");
  int d = dim();
  for (const Eigen::MatrixXd& X : domains) {
    if (X.cols() != d) throw std::invalid_argument("dataset: inconsistent dimension");
    if (X.rows() < 1) throw std::invalid_argument("dataset: empty domain");
    if (!X.allFinite()) throw std::invalid_argument("dataset: non-finite values");
  }
  for (const DomainSpec& t : truth) {
    t.validate();
    if (t.base.d != d) throw std::invalid_argument("dataset: truth dimension mismatch");
  }
}

Experiment parse_experiment(const std::string& name) {
  if (name == "E1") return Experiment::E1;
  if (name == "E2") return Experiment::E2;
  if (name == "E3") return Experiment::E3;
  if (name == "E4") return Experiment::E4;
  throw std::invalid_argument("unknown experiment: " + name);
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::E1: return "E1";
    case Experiment::E2: return "E2";
    case Experiment::E3: return "E3";
    case Experiment::E4: return "E4";
  }
  throw std::logic_error("unreachable");
}

FcmSpec benchmark_fcm(double h) {
  FcmSpec fcm;
  fcm.d = 4;
  fcm.edges = {{0, 2, 1.0}, {1, 2, 1.0}, {2, 3, h}};
  fcm.noise_mean = Eigen::VectorXd::Zero(4);
  fcm.noise_std = Eigen::VectorXd::Ones(4);
  fcm.names = {"X1", "X2", "X3", "X4"};
  return fcm;
}

Eigen::MatrixXd sample_domain(const DomainSpec& spec, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_domain: n must be >= 1");
  spec.validate();
  FcmSpec fcm = spec.resolved();
  std::vector<int> order = fcm.topological_order();

  Rng rng(seed);
  Eigen::MatrixXd X(n, fcm.d);
  // Noise first, in variable order, so the draw sequence does not depend on
  // the graph; then accumulate parent contributions in topological order.
  for (int j = 0; j < fcm.d; ++j) {
    double mu = fcm.noise_mean(j), sd = fcm.noise_std(j);
    if (sd == 0.0) {
      X.col(j).setConstant(mu);
    } else {
      for (int i = 0; i < n; ++i) X(i, j) = mu + sd * rng.normal();
    }
  }
  for (int j : order)
    for (const Edge& e : fcm.edges)
      if (e.child == j && e.weight != 0.0)
        X.col(j) += e.weight * X.col(e.parent);
  return X;
}

namespace {

// (fair sign) * Uniform[0.5, 2]
double draw_strength(Rng& rng) {
  double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return sign * rng.uniform(0.5, 2.0);
}

}  // namespace

MultiDomainDataset make_experiment(Experiment e, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_experiment: n must be >= 1");
  const int num_domains = 3;

  int cut_domain = 0;
  if (e == Experiment::E2) {
    Rng rng(derive_seed(seed, {seed_path::cut_choice}));
    cut_domain = static_cast<int>(rng.uniform_int(1, num_domains));
  }

  MultiDomainDataset ds;
  for (int k = 1; k <= num_domains; ++k) {
    Rng rng(derive_seed(seed, {seed_path::domain_params, static_cast<std::uint64_t>(k)}));
    DomainSpec spec;
    spec.base = benchmark_fcm();
    spec.k = k;
    switch (e) {
      case Experiment::E1:
        spec.weight_overrides.push_back({2, 3, draw_strength(rng)});
        break;
      case Experiment::E2: {
        double h = draw_strength(rng);  // drawn even when cut, to mirror E1 streams
        if (k == cut_domain) h = 0.0;
        spec.weight_overrides.push_back({2, 3, h});
        break;
      }
      case Experiment::E3:
        spec.noise_overrides.push_back({1, draw_strength(rng), 1.0});
        break;
      case Experiment::E4:
        spec.noise_overrides.push_back({1, draw_strength(rng), 0.0});
        break;
    }
    std::uint64_t sample_seed =
        derive_seed(seed, {seed_path::domain_samples, static_cast<std::uint64_t>(k)});
    ds.domains.push_back(sample_domain(spec, n, sample_seed));
    ds.truth.push_back(std::move(spec));
  }
  return ds;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXi> pool(const MultiDomainDataset& ds) {
  ds.validate();
  Eigen::Index total = 0;
  for (const Eigen::MatrixXd& X : ds.domains) total += X.rows();
  Eigen::MatrixXd pooled(total, ds.dim());
  Eigen::VectorXi domain_index(total);
  Eigen::Index row = 0;
  for (int k = 0; k < ds.num_domains(); ++k) {
    const Eigen::MatrixXd& X = ds.domains[k];
    pooled.middleRows(row, X.rows()) = X;
    domain_index.segment(row, X.rows()).setConstant(ds.truth[k].k);
    row += X.rows();
  }
  return {std::move(pooled), std::move(domain_index)};
}

}  // namespace cicme
