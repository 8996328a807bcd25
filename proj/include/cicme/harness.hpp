#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cicme/engine.hpp"
#include "cicme/scm.hpp"

namespace cicme {

struct RunPlan {
  std::vector<Experiment> experiments;
  std::vector<int> sizes{10, 100, 1000};
  int repeats = 100;
  std::vector<Method> methods{Method::cicme_f, Method::cicme_l, Method::notears_pool,
                              Method::notears_ind};
  std::uint64_t master_seed = 0;
  std::filesystem::path out_dir;
  int jobs = 1;
  EngineConfig engine;

  void validate() const;
};

struct MethodOutcome {
  EvalRecord eval;
  StepTimings timings;
  bool pool_converged = true;
  std::vector<char> domain_converged;
  std::optional<StabilityReport> stability;
  Eigen::MatrixXd w_pool;                  // empty when the method has none
  std::vector<Eigen::MatrixXd> w_domains;
  long evaluations = 0;
};

struct RunRecord {
  Experiment experiment = Experiment::E1;
  int n = 0;
  int repeat = 0;
  std::uint64_t seed = 0;  // regenerates the dataset and every initialization
  std::string error;       // non-empty marks a failed coordinate
  std::map<Method, MethodOutcome> methods;
};

nlohmann::json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

// Derived per-coordinate seed; both the dataset and the engine draw their
// streams from it through disjoint salt paths.
std::uint64_t coordinate_seed(std::uint64_t master, Experiment e, int n, int repeat);

// Runs the plan: one dataset per (experiment, n, repeat), all selected
// methods on that same dataset, records written atomically under
// out_dir/records/ and reused on re-execution (coordinates whose records
// already cover the requested methods are skipped).  A failing coordinate
// is recorded with its error and the sweep continues.  Finishes by writing
// the report files.  Returns all records, sorted by coordinate.
std::vector<RunRecord> execute(const RunPlan& plan);

std::vector<RunRecord> load_records(const std::filesystem::path& out_dir);

// Emits stable_counts.csv, shd_summary.csv, timings.csv, summary.md, and
// runs.jsonl into out_dir from the given records.
void write_report(const std::vector<RunRecord>& records,
                  const std::filesystem::path& out_dir);

}  // namespace cicme
