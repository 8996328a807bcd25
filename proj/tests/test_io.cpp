#include <doctest.h>

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "cicme/io.hpp"
#include "cicme/scm.hpp"

using namespace cicme;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cicme_io_test_" + std::to_string(std::rand()) + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("text files round-trip atomically") {
  TempDir tmp;
  fs::path p = tmp.path / "note.txt";
  write_text_atomic(p, "line one\nline two\n");
  CHECK(read_text(p) == "line one\nline two\n");
  write_text_atomic(p, "replaced");
  CHECK(read_text(p) == "replaced");
  // No temp leftovers after the rename.
  int entries = 0;
  for (auto& e : fs::directory_iterator(tmp.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  CHECK_THROWS(read_text(tmp.path / "missing.txt"));
}

TEST_CASE("json helpers preserve structure") {
  TempDir tmp;
  fs::path p = tmp.path / "doc.json";
  nlohmann::json j{{"a", 1}, {"b", {1, 2, 3}}, {"c", "text"}};
  write_json_atomic(p, j);
  CHECK(read_json(p) == j);
}

TEST_CASE("matrices survive json round-trips bit-exactly") {
  Eigen::MatrixXd m(2, 3);
  m << 1.0, -2.5, 1e-17,
       3.14159265358979, 0.1, -7e300;
  Eigen::MatrixXd back = matrix_from_json(matrix_to_json(m));
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 3);
  CHECK(back == m);
}

TEST_CASE("csv matrices round-trip with headers") {
  TempDir tmp;
  fs::path p = tmp.path / "m.csv";
  Eigen::MatrixXd m(3, 2);
  m << 0.1, -2.0,
       1e-16, 5.5,
       123456.789, -0.25;
  write_matrix_csv(p, m, {"alpha", "beta"});
  std::vector<std::string> header;
  Eigen::MatrixXd back = read_matrix_csv(p, &header);
  REQUIRE(header.size() == 2);
  CHECK(header[0] == "alpha");
  CHECK(header[1] == "beta");
  CHECK(back == m);  // %.17g preserves doubles exactly
}

TEST_CASE("headerless csv is read as pure numbers") {
  TempDir tmp;
  fs::path p = tmp.path / "raw.csv";
  write_text_atomic(p, "1,2\n3,4\n");
  Eigen::MatrixXd m = read_matrix_csv(p);
  REQUIRE(m.rows() == 2);
  CHECK(m(1, 1) == 4.0);
}

TEST_CASE("domain specs serialize with their overrides") {
  DomainSpec spec;
  spec.base = benchmark_fcm();
  spec.k = 2;
  spec.weight_overrides.push_back({2, 3, -1.25});
  spec.noise_overrides.push_back({1, 0.5, 0.0});
  nlohmann::json j = spec;
  DomainSpec back = j.get<DomainSpec>();
  CHECK(back.k == 2);
  CHECK(back.base.d == 4);
  CHECK(back.base.names == spec.base.names);
  REQUIRE(back.weight_overrides.size() == 1);
  CHECK(back.weight_overrides[0].weight == -1.25);
  REQUIRE(back.noise_overrides.size() == 1);
  CHECK(back.noise_overrides[0].std == 0.0);
  CHECK(back.resolved().graph() == spec.resolved().graph());
}

TEST_CASE("stability reports serialize verdicts as words") {
  StabilityReport rep;
  rep.alpha = 0.05;
  VariableDecision a;
  a.p_value = 0.7;
  a.stable = true;
  VariableDecision b;
  b.p_value = 0.001;
  b.stable = false;
  b.error = "boom";
  rep.variables = {a, b};
  nlohmann::json j = rep;
  CHECK(j["variables"][0]["verdict"] == "stable");
  CHECK(j["variables"][1]["verdict"] == "unstable");
  StabilityReport back = j.get<StabilityReport>();
  CHECK(back.alpha == 0.05);
  CHECK(back.variables[0].stable);
  CHECK(!back.variables[1].stable);
  CHECK(back.variables[1].error == "boom");
  CHECK(back.variables[0].p_value == 0.7);
}

TEST_CASE("datasets round-trip through a directory bundle") {
  TempDir tmp;
  MultiDomainDataset ds = make_experiment(Experiment::E2, 12, 31);
  write_dataset(ds, tmp.path / "data", 31);
  CHECK(fs::exists(tmp.path / "data" / "domain1.csv"));
  CHECK(fs::exists(tmp.path / "data" / "domain3.csv"));
  CHECK(fs::exists(tmp.path / "data" / "pooled.csv"));
  CHECK(fs::exists(tmp.path / "data" / "truth.json"));

  MultiDomainDataset back = read_dataset(tmp.path / "data");
  REQUIRE(back.num_domains() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(back.domains[k] == ds.domains[k]);
    CHECK(back.truth[k].k == ds.truth[k].k);
    CHECK(back.truth[k].resolved().graph() == ds.truth[k].resolved().graph());
  }

  // Pooled file carries the domain column.
  std::vector<std::string> header;
  Eigen::MatrixXd pooled = read_matrix_csv(tmp.path / "data" / "pooled.csv", &header);
  CHECK(header.back() == "domain");
  CHECK(pooled.rows() == 36);
  CHECK(pooled(35, pooled.cols() - 1) == 3.0);
}

TEST_CASE("model sets round-trip bit-exactly") {
  TempDir tmp;
  ModelSet m = random_model_set(3, {5, 0.02}, 41);
  fs::path p = tmp.path / "models.json";
  write_model_set(p, m);
  ModelSet back = read_model_set(p);
  REQUIRE(back.dim() == 3);
  CHECK(back.config.hidden_units == 5);
  CHECK(back.config.lambda1 == 0.02);
  for (int j = 0; j < 3; ++j) {
    CHECK(back.models[j].w1 == m.models[j].w1);
    CHECK(back.models[j].b1 == m.models[j].b1);
    CHECK(back.models[j].w2 == m.models[j].w2);
    CHECK(back.models[j].b2 == m.models[j].b2);
  }
}
