#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cicme/rng.hpp"
#include "cicme/scm.hpp"

using namespace cicme;

namespace {

double column_mean(const Eigen::MatrixXd& X, int j) { return X.col(j).mean(); }

double column_var(const Eigen::MatrixXd& X, int j) {
  Eigen::ArrayXd c = X.col(j).array() - X.col(j).mean();
  return c.square().sum() / static_cast<double>(X.rows() - 1);
}

double column_corr(const Eigen::MatrixXd& X, int a, int b) {
  Eigen::ArrayXd ca = X.col(a).array() - X.col(a).mean();
  Eigen::ArrayXd cb = X.col(b).array() - X.col(b).mean();
  return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

}  // namespace

TEST_CASE("benchmark graph has the three expected edges") {
  FcmSpec fcm = benchmark_fcm(0.7);
  fcm.validate();
  CHECK(fcm.d == 4);
  Eigen::MatrixXi g = fcm.graph();
  CHECK(g.sum() == 3);
  CHECK(g(0, 2) == 1);
  CHECK(g(1, 2) == 1);
  CHECK(g(2, 3) == 1);
  CHECK(g.diagonal().sum() == 0);
}

TEST_CASE("topological order respects edges") {
  FcmSpec fcm = benchmark_fcm();
  std::vector<int> order = fcm.topological_order();
  REQUIRE(order.size() == 4);
  std::vector<int> position(4);
  for (int i = 0; i < 4; ++i) position[order[i]] = i;
  CHECK(position[0] < position[2]);
  CHECK(position[1] < position[2]);
  CHECK(position[2] < position[3]);
}

TEST_CASE("cycles are rejected") {
  FcmSpec fcm;
  fcm.d = 2;
  fcm.edges = {{0, 1, 1.0}, {1, 0, 1.0}};
  fcm.noise_mean = Eigen::VectorXd::Zero(2);
  fcm.noise_std = Eigen::VectorXd::Ones(2);
  CHECK_THROWS(fcm.validate());
  // Removing one direction by zero weight makes it acyclic again.
  fcm.edges[1].weight = 0.0;
  CHECK_NOTHROW(fcm.validate());
}

TEST_CASE("self-loops and bad indices are rejected") {
  FcmSpec fcm = benchmark_fcm();
  fcm.edges.push_back({1, 1, 1.0});
  CHECK_THROWS(fcm.validate());
  fcm = benchmark_fcm();
  fcm.edges.push_back({0, 7, 1.0});
  CHECK_THROWS(fcm.validate());
  fcm = benchmark_fcm();
  fcm.noise_std(2) = -0.1;
  CHECK_THROWS(fcm.validate());
}

TEST_CASE("weight override of zero removes the edge from the graph") {
  DomainSpec spec;
  spec.base = benchmark_fcm();
  spec.k = 1;
  spec.weight_overrides.push_back({2, 3, 0.0});
  Eigen::MatrixXi g = spec.resolved().graph();
  CHECK(g(2, 3) == 0);
  CHECK(g.sum() == 2);
}

TEST_CASE("sampling is deterministic and shaped correctly") {
  DomainSpec spec;
  spec.base = benchmark_fcm();
  spec.k = 1;
  Eigen::MatrixXd a = sample_domain(spec, 50, 123);
  Eigen::MatrixXd b = sample_domain(spec, 50, 123);
  Eigen::MatrixXd c = sample_domain(spec, 50, 124);
  CHECK(a.rows() == 50);
  CHECK(a.cols() == 4);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("degenerate noise produces a constant column") {
  DomainSpec spec;
  spec.base = benchmark_fcm();
  spec.k = 1;
  spec.noise_overrides.push_back({1, 2.5, 0.0});
  Eigen::MatrixXd X = sample_domain(spec, 40, 9);
  CHECK((X.col(1).array() == 2.5).all());
  // Downstream variables still receive the constant as a parent input.
  CHECK(column_var(X, 2) > 0.5);
}

TEST_CASE("pinned columns consume no draws from the noise stream") {
  const int n = 25;
  DomainSpec spec;
  spec.base = benchmark_fcm();
  spec.k = 1;
  spec.noise_overrides.push_back({1, 2.5, 0.0});
  Eigen::MatrixXd X = sample_domain(spec, n, 77);

  // Follow the sampler's stream by hand: noise per variable in index order,
  // with the pinned variable skipped entirely.
  Rng rng(77);
  Eigen::MatrixXd noise(n, 4);
  for (int i = 0; i < n; ++i) noise(i, 0) = rng.normal();
  noise.col(1).setConstant(2.5);
  for (int i = 0; i < n; ++i) noise(i, 2) = rng.normal();
  for (int i = 0; i < n; ++i) noise(i, 3) = rng.normal();
  Eigen::VectorXd x3 = noise.col(2) + noise.col(0) + noise.col(1);
  Eigen::VectorXd x4 = noise.col(3) + x3;
  CHECK(X.col(0) == noise.col(0));
  CHECK(X.col(2) == x3);
  CHECK(X.col(3) == x4);
}

TEST_CASE("linear mechanism values follow the equations exactly") {
  DomainSpec spec;
  spec.base = benchmark_fcm(0.6);
  spec.k = 1;
  // With all noise degenerate the columns are fully determined.
  for (int j = 0; j < 4; ++j) spec.noise_overrides.push_back({j, double(j + 1), 0.0});
  Eigen::MatrixXd X = sample_domain(spec, 5, 1);
  CHECK((X.col(0).array() == 1.0).all());
  CHECK((X.col(1).array() == 2.0).all());
  CHECK((X.col(2).array() - (1.0 + 2.0 + 3.0)).abs().maxCoeff() < 1e-12);
  CHECK(X(0, 3) == doctest::Approx(0.6 * 6.0 + 4.0));
}

TEST_CASE("benchmark variances match the closed form") {
  DomainSpec spec;
  spec.base = benchmark_fcm();
  spec.k = 1;
  Eigen::MatrixXd X = sample_domain(spec, 100000, 2024);
  CHECK(std::abs(column_var(X, 0) - 1.0) < 0.05);
  CHECK(std::abs(column_var(X, 1) - 1.0) < 0.05);
  CHECK(std::abs(column_var(X, 2) - 3.0) < 0.15);
  CHECK(std::abs(column_var(X, 3) - 4.0) < 0.2);
  CHECK(std::abs(column_mean(X, 3)) < 0.05);
}

TEST_CASE("source independence and parent correlation on E1 data") {
  MultiDomainDataset ds = make_experiment(Experiment::E1, 100000, 77);
  auto [pooled, idx] = pool(ds);
  CHECK(std::abs(column_corr(pooled, 0, 1)) < 0.02);
  CHECK(std::abs(column_corr(pooled, 2, 0) - 1.0 / std::sqrt(3.0)) < 0.02);
}

TEST_CASE("E1 draws one strength per domain inside the legal band") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    MultiDomainDataset ds = make_experiment(Experiment::E1, 5, seed);
    REQUIRE(ds.num_domains() == 3);
    for (const DomainSpec& t : ds.truth) {
      REQUIRE(t.weight_overrides.size() == 1);
      double h = t.weight_overrides[0].weight;
      CHECK(std::abs(h) >= 0.5);
      CHECK(std::abs(h) <= 2.0);
    }
    // Strengths differ across domains almost surely.
    CHECK(ds.truth[0].weight_overrides[0].weight != ds.truth[1].weight_overrides[0].weight);
  }
}

TEST_CASE("E2 cuts the edge in exactly one domain") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    MultiDomainDataset ds = make_experiment(Experiment::E2, 5, seed);
    int cut = 0;
    for (const DomainSpec& t : ds.truth) {
      REQUIRE(t.weight_overrides.size() == 1);
      double h = t.weight_overrides[0].weight;
      if (h == 0.0)
        ++cut;
      else {
        CHECK(std::abs(h) >= 0.5);
        CHECK(std::abs(h) <= 2.0);
      }
    }
    CHECK(cut == 1);
  }
}

TEST_CASE("E2 cut location varies with the seed") {
  std::vector<int> hits(3, 0);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    MultiDomainDataset ds = make_experiment(Experiment::E2, 5, seed);
    for (int k = 0; k < 3; ++k)
      if (ds.truth[k].weight_overrides[0].weight == 0.0) ++hits[k];
  }
  for (int h : hits) CHECK(h > 0);
}

TEST_CASE("E2 matches E1 strengths in the uncut domains") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MultiDomainDataset e1 = make_experiment(Experiment::E1, 5, seed);
    MultiDomainDataset e2 = make_experiment(Experiment::E2, 5, seed);
    for (int k = 0; k < 3; ++k) {
      double h2 = e2.truth[k].weight_overrides[0].weight;
      if (h2 != 0.0) CHECK(h2 == e1.truth[k].weight_overrides[0].weight);
    }
  }
}

TEST_CASE("E3 shifts the second noise mean and keeps its spread") {
  MultiDomainDataset ds = make_experiment(Experiment::E3, 20000, 5);
  for (int k = 0; k < 3; ++k) {
    const DomainSpec& t = ds.truth[k];
    CHECK(t.weight_overrides.empty());
    REQUIRE(t.noise_overrides.size() == 1);
    CHECK(t.noise_overrides[0].variable == 1);
    double m = t.noise_overrides[0].mean;
    CHECK(std::abs(m) >= 0.5);
    CHECK(std::abs(m) <= 2.0);
    CHECK(t.noise_overrides[0].std == 1.0);
    CHECK(std::abs(column_mean(ds.domains[k], 1) - m) < 0.05);
    CHECK(std::abs(column_var(ds.domains[k], 1) - 1.0) < 0.05);
  }
}

TEST_CASE("E4 pins the second variable to a per-domain constant") {
  MultiDomainDataset ds = make_experiment(Experiment::E4, 100, 6);
  for (int k = 0; k < 3; ++k) {
    const DomainSpec& t = ds.truth[k];
    REQUIRE(t.noise_overrides.size() == 1);
    CHECK(t.noise_overrides[0].std == 0.0);
    double m = t.noise_overrides[0].mean;
    CHECK(std::abs(m) >= 0.5);
    CHECK(std::abs(m) <= 2.0);
    CHECK((ds.domains[k].col(1).array() == m).all());
  }
  // Constants differ across domains, so the pooled column varies.
  auto [pooled, idx] = pool(ds);
  CHECK(column_var(pooled, 1) > 0.0);
}

TEST_CASE("experiments are deterministic in the seed") {
  for (Experiment e : {Experiment::E1, Experiment::E2, Experiment::E3, Experiment::E4}) {
    MultiDomainDataset a = make_experiment(e, 30, 99);
    MultiDomainDataset b = make_experiment(e, 30, 99);
    REQUIRE(a.num_domains() == b.num_domains());
    for (int k = 0; k < a.num_domains(); ++k) CHECK(a.domains[k] == b.domains[k]);
  }
}

TEST_CASE("pooling stacks domains contiguously with 1-based labels") {
  MultiDomainDataset ds = make_experiment(Experiment::E1, 7, 3);
  auto [pooled, idx] = pool(ds);
  REQUIRE(pooled.rows() == 21);
  REQUIRE(idx.size() == 21);
  for (int k = 0; k < 3; ++k) {
    CHECK(pooled.middleRows(7 * k, 7) == ds.domains[k]);
    CHECK((idx.segment(7 * k, 7).array() == k + 1).all());
  }
}

TEST_CASE("experiment names round-trip") {
  for (Experiment e : {Experiment::E1, Experiment::E2, Experiment::E3, Experiment::E4})
    CHECK(parse_experiment(to_string(e)) == e);
  CHECK_THROWS(parse_experiment("E5"));
}
