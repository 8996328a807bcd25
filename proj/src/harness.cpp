#include "cicme/harness.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cicme/io.hpp"
#include "cicme/metrics.hpp"
#include "cicme/rng.hpp"

namespace cicme {

namespace fs = std::filesystem;
using nlohmann::json;

void RunPlan::validate() const {
  if (experiments.empty()) throw std::invalid_argument("RunPlan: no experiments selected");
  if (sizes.empty()) throw std::invalid_argument("RunPlan: no sample sizes selected");
  for (int n : sizes)
    if (n < 1) throw std::invalid_argument("RunPlan: sample sizes must be >= 1");
  if (repeats < 1) throw std::invalid_argument("RunPlan: repeats must be >= 1");
  if (methods.empty()) throw std::invalid_argument("RunPlan: no methods selected");
  if (out_dir.empty()) throw std::invalid_argument("RunPlan: output directory required");
  if (jobs < 1) throw std::invalid_argument("RunPlan: jobs must be >= 1");
  engine.validate();
}

std::uint64_t coordinate_seed(std::uint64_t master, Experiment e, int n, int repeat) {
  return derive_seed(master, {seed_path::dataset, static_cast<std::uint64_t>(e) + 1,
                              static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(repeat)});
}

namespace {

json eval_to_json(const EvalRecord& e) {
  return json{{"per_domain_shd", e.per_domain_shd},
              {"mean_shd", e.mean_shd},
              {"pool_lshd", e.pool_lshd}};
}

EvalRecord eval_from_json(const json& j) {
  EvalRecord e;
  j.at("per_domain_shd").get_to(e.per_domain_shd);
  j.at("mean_shd").get_to(e.mean_shd);
  j.at("pool_lshd").get_to(e.pool_lshd);
  return e;
}

json timings_to_json(const StepTimings& t) {
  return json{{"step1", t.step1}, {"step2", t.step2}, {"step3", t.step3},
              {"total", t.total()}};
}

StepTimings timings_from_json(const json& j) {
  StepTimings t;
  j.at("step1").get_to(t.step1);
  j.at("step2").get_to(t.step2);
  j.at("step3").get_to(t.step3);
  return t;
}

json outcome_to_json(const MethodOutcome& o) {
  json j{{"eval", eval_to_json(o.eval)},
         {"timings", timings_to_json(o.timings)},
         {"pool_converged", o.pool_converged},
         {"evaluations", o.evaluations}};
  json conv = json::array();
  for (char c : o.domain_converged) conv.push_back(static_cast<bool>(c));
  j["domain_converged"] = std::move(conv);
  if (o.stability) j["stability"] = *o.stability;
  if (o.w_pool.size() > 0) j["w_pool"] = matrix_to_json(o.w_pool);
  json ws = json::array();
  for (const Eigen::MatrixXd& w : o.w_domains) ws.push_back(matrix_to_json(w));
  j["w_domains"] = std::move(ws);
  return j;
}

MethodOutcome outcome_from_json(const json& j) {
  MethodOutcome o;
  o.eval = eval_from_json(j.at("eval"));
  o.timings = timings_from_json(j.at("timings"));
  j.at("pool_converged").get_to(o.pool_converged);
  j.at("evaluations").get_to(o.evaluations);
  for (const json& c : j.at("domain_converged"))
    o.domain_converged.push_back(c.get<bool>() ? 1 : 0);
  if (j.contains("stability")) o.stability = j.at("stability").get<StabilityReport>();
  if (j.contains("w_pool")) o.w_pool = matrix_from_json(j.at("w_pool"));
  for (const json& w : j.at("w_domains")) o.w_domains.push_back(matrix_from_json(w));
  return o;
}

std::string record_filename(Experiment e, int n, int repeat) {
  std::ostringstream name;
  name << to_string(e) << "_n" << n << "_r" << repeat << ".json";
  return name.str();
}

MethodOutcome outcome_from_result(const CicmeResult& result, const MultiDomainDataset& ds,
                                  double threshold) {
  MethodOutcome o;
  o.eval = evaluate(result, ds, threshold);
  o.timings = result.timings;
  o.pool_converged = result.pool_converged;
  o.domain_converged = result.domain_converged;
  o.stability = result.stability;
  o.w_pool = result.w_pool;
  o.w_domains = result.w_domains;
  o.evaluations = result.evaluations;
  return o;
}

}  // namespace

json run_record_to_json(const RunRecord& r) {
  json methods = json::object();
  for (const auto& [m, outcome] : r.methods)
    methods[to_string(m)] = outcome_to_json(outcome);
  return json{{"schema", 1},
              {"experiment", to_string(r.experiment)},
              {"n", r.n},
              {"repeat", r.repeat},
              {"seed", r.seed},
              {"error", r.error},
              {"methods", std::move(methods)}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.experiment = parse_experiment(j.at("experiment").get<std::string>());
  j.at("n").get_to(r.n);
  j.at("repeat").get_to(r.repeat);
  j.at("seed").get_to(r.seed);
  j.at("error").get_to(r.error);
  for (const auto& [name, oj] : j.at("methods").items())
    r.methods.emplace(parse_method(name), outcome_from_json(oj));
  return r;
}

std::vector<RunRecord> execute(const RunPlan& plan) {
  plan.validate();
  fs::path records_dir = plan.out_dir / "records";
  fs::create_directories(records_dir);

  {  // manifest: what this sweep is, for audit and resumption checks
    json manifest{{"schema", 1},
                  {"master_seed", plan.master_seed},
                  {"repeats", plan.repeats},
                  {"jobs", plan.jobs},
                  {"alpha", plan.engine.alpha},
                  {"gamma", plan.engine.gamma},
                  {"threshold", plan.engine.threshold},
                  {"lambda1", plan.engine.model.lambda1},
                  {"hidden_units", plan.engine.model.hidden_units}};
    json exps = json::array(), sizes = json::array(), methods = json::array();
    for (Experiment e : plan.experiments) exps.push_back(to_string(e));
    for (int n : plan.sizes) sizes.push_back(n);
    for (Method m : plan.methods) methods.push_back(to_string(m));
    manifest["experiments"] = std::move(exps);
    manifest["sizes"] = std::move(sizes);
    manifest["methods"] = std::move(methods);
    write_json_atomic(plan.out_dir / "manifest.json", manifest);
  }

  struct Coordinate {
    Experiment e;
    int n;
    int repeat;
  };
  std::vector<Coordinate> coords;
  for (Experiment e : plan.experiments)
    for (int n : plan.sizes)
      for (int r = 0; r < plan.repeats; ++r) coords.push_back({e, n, r});

  std::vector<RunRecord> records(coords.size());
  std::atomic<size_t> next{0};
  std::mutex io_mutex;

  auto work = [&]() {
    for (;;) {
      size_t at = next.fetch_add(1);
      if (at >= coords.size()) return;
      const Coordinate& c = coords[at];
      fs::path file = records_dir / record_filename(c.e, c.n, c.repeat);

      RunRecord rec;
      rec.experiment = c.e;
      rec.n = c.n;
      rec.repeat = c.repeat;
      rec.seed = coordinate_seed(plan.master_seed, c.e, c.n, c.repeat);

      bool have_existing = false;
      if (fs::exists(file)) {
        try {
          RunRecord old = run_record_from_json(read_json(file));
          if (old.error.empty() && old.seed == rec.seed) {
            rec = std::move(old);
            have_existing = true;
          }
        } catch (const std::exception&) {
          // unreadable record: recompute it
        }
      }

      std::set<Method> missing;
      for (Method m : plan.methods)
        if (!rec.methods.count(m)) missing.insert(m);

      if (!missing.empty()) {
        try {
          EngineConfig cfg = plan.engine;
          cfg.seed = rec.seed;
          MultiDomainDataset ds = make_experiment(c.e, c.n, rec.seed);
          std::map<Method, CicmeResult> results = run_suite(ds, missing, cfg);
          for (auto& [m, result] : results)
            rec.methods[m] = outcome_from_result(result, ds, cfg.threshold);
          rec.error.clear();
        } catch (const std::exception& ex) {
          rec.error = ex.what();
        }
        std::lock_guard<std::mutex> lock(io_mutex);
        write_json_atomic(file, run_record_to_json(rec));
      } else if (!have_existing) {
        std::lock_guard<std::mutex> lock(io_mutex);
        write_json_atomic(file, run_record_to_json(rec));
      }
      records[at] = std::move(rec);
    }
  };

  if (plan.jobs == 1) {
    work();
  } else {
    std::vector<std::thread> pool_threads;
    for (int t = 0; t < plan.jobs; ++t) pool_threads.emplace_back(work);
    for (std::thread& t : pool_threads) t.join();
  }

  write_report(records, plan.out_dir);
  return records;
}

std::vector<RunRecord> load_records(const fs::path& out_dir) {
  fs::path records_dir = out_dir / "records";
  if (!fs::exists(records_dir))
    throw std::runtime_error("no records directory under " + out_dir.string());
  std::vector<RunRecord> records;
  for (const auto& entry : fs::directory_iterator(records_dir)) {
    if (entry.path().extension() != ".json") continue;
    records.push_back(run_record_from_json(read_json(entry.path())));
  }
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tuple(to_string(a.experiment), a.n, a.repeat) <
           std::tuple(to_string(b.experiment), b.n, b.repeat);
  });
  return records;
}

namespace {

// Stability tables come from one cicme record per coordinate (both
// variants share steps 1-2, so their reports agree; prefer the freeze
// variant when present).
const MethodOutcome* stability_outcome(const RunRecord& rec) {
  for (Method m : {Method::cicme_f, Method::cicme_l}) {
    auto it = rec.methods.find(m);
    if (it != rec.methods.end() && it->second.stability) return &it->second;
  }
  return nullptr;
}

std::string variable_name(int j, int d) {
  (void)d;
  return "X" + std::to_string(j + 1);
}

}  // namespace

void write_report(const std::vector<RunRecord>& records, const fs::path& out_dir) {
  if (records.empty()) throw std::invalid_argument("write_report: no records");
  fs::create_directories(out_dir);

  std::vector<const RunRecord*> good;
  for (const RunRecord& r : records)
    if (r.error.empty()) good.push_back(&r);

  // --- runs.jsonl: one line per (coordinate, method) ---------------------
  {
    std::ostringstream out;
    for (const RunRecord& r : records) {
      if (!r.error.empty()) {
        json line{{"experiment", to_string(r.experiment)}, {"n", r.n},
                  {"repeat", r.repeat}, {"seed", r.seed}, {"error", r.error}};
        out << line.dump() << "\n";
        continue;
      }
      for (const auto& [m, o] : r.methods) {
        json line{{"experiment", to_string(r.experiment)},
                  {"n", r.n},
                  {"repeat", r.repeat},
                  {"seed", r.seed},
                  {"method", to_string(m)},
                  {"mean_shd", o.eval.mean_shd},
                  {"per_domain_shd", o.eval.per_domain_shd},
                  {"step1", o.timings.step1},
                  {"step2", o.timings.step2},
                  {"step3", o.timings.step3},
                  {"total", o.timings.total()},
                  {"pool_converged", o.pool_converged}};
        if (o.stability) {
          json stable = json::array(), pvals = json::array();
          for (const VariableDecision& v : o.stability->variables) {
            stable.push_back(v.stable);
            pvals.push_back(v.p_value);
          }
          line["stable"] = std::move(stable);
          line["p_values"] = std::move(pvals);
        }
        out << line.dump() << "\n";
      }
    }
    write_text_atomic(out_dir / "runs.jsonl", out.str());
  }

  // --- shd_summary.csv ---------------------------------------------------
  std::map<std::tuple<std::string, int, std::string>, std::vector<double>> shd_groups;
  for (const RunRecord* r : good)
    for (const auto& [m, o] : r->methods)
      shd_groups[{to_string(r->experiment), r->n, to_string(m)}].push_back(o.eval.mean_shd);
  std::vector<ShdSummaryRow> shd_rows;
  for (const auto& [key, values] : shd_groups)
    shd_rows.push_back(summarize_shd(std::get<0>(key), std::get<1>(key), std::get<2>(key),
                                     values));
  {
    std::ostringstream out;
    out << "experiment,n,method,repeats,mean_shd,std_shd\n";
    for (const ShdSummaryRow& row : shd_rows) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6g,%.6g", row.mean_shd, row.std_shd);
      out << row.experiment << "," << row.n << "," << row.method << "," << row.repeats
          << "," << buf << "\n";
    }
    write_text_atomic(out_dir / "shd_summary.csv", out.str());
  }

  // --- stable_counts.csv -------------------------------------------------
  std::map<std::tuple<std::string, int, int>, std::vector<std::pair<bool, int>>> stab_groups;
  std::map<std::tuple<std::string, int>, int> dims;
  for (const RunRecord* r : good) {
    const MethodOutcome* o = stability_outcome(*r);
    if (!o) continue;
    int d = static_cast<int>(o->stability->variables.size());
    dims[{to_string(r->experiment), r->n}] = d;
    for (int j = 0; j < d; ++j) {
      bool stable = o->stability->variables[static_cast<size_t>(j)].stable;
      int lshd = j < static_cast<int>(o->eval.pool_lshd.size())
                     ? o->eval.pool_lshd[static_cast<size_t>(j)]
                     : 0;
      stab_groups[{to_string(r->experiment), r->n, j}].push_back({stable, lshd});
    }
  }
  std::vector<StableSummaryRow> stab_rows;
  for (const auto& [key, obs] : stab_groups) {
    int d = dims[{std::get<0>(key), std::get<1>(key)}];
    stab_rows.push_back(summarize_stability(std::get<0>(key), std::get<1>(key),
                                            variable_name(std::get<2>(key), d), obs));
  }
  {
    std::ostringstream out;
    out << "experiment,n,variable,repeats,stable_count,mean_lshd\n";
    for (const StableSummaryRow& row : stab_rows) {
      out << row.experiment << "," << row.n << "," << row.variable << "," << row.repeats
          << "," << row.stable_count << ",";
      if (row.stable_count == 0)
        out << "NA";
      else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", row.mean_lshd);
        out << buf;
      }
      out << "\n";
    }
    write_text_atomic(out_dir / "stable_counts.csv", out.str());
  }

  // --- timings.csv -------------------------------------------------------
  std::map<std::tuple<std::string, int, std::string>, std::vector<StepTimings>> time_groups;
  for (const RunRecord* r : good)
    for (const auto& [m, o] : r->methods)
      time_groups[{to_string(r->experiment), r->n, to_string(m)}].push_back(o.timings);
  {
    std::ostringstream out;
    out << "experiment,n,method,step,median_seconds,q1_seconds,q3_seconds\n";
    for (const auto& [key, ts] : time_groups) {
      auto emit = [&](const char* step, auto pick) {
        std::vector<double> v;
        v.reserve(ts.size());
        for (const StepTimings& t : ts) v.push_back(pick(t));
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g", quantile(v, 0.5),
                      quantile(v, 0.25), quantile(v, 0.75));
        out << std::get<0>(key) << "," << std::get<1>(key) << "," << std::get<2>(key)
            << "," << step << "," << buf << "\n";
      };
      emit("step1", [](const StepTimings& t) { return t.step1; });
      emit("step2", [](const StepTimings& t) { return t.step2; });
      emit("step3", [](const StepTimings& t) { return t.step3; });
      emit("total", [](const StepTimings& t) { return t.total(); });
    }
    write_text_atomic(out_dir / "timings.csv", out.str());
  }

  // --- summary.md --------------------------------------------------------
  {
    std::ostringstream out;
    out << "# Sweep summary\n\n";
    int failed = static_cast<int>(records.size()) - static_cast<int>(good.size());
    out << records.size() << " coordinates";
    if (failed > 0) out << " (" << failed << " failed, excluded from tables)";
    out << "\n\n";

    if (!stab_rows.empty()) {
      out << "## Stable variables and local errors\n\n";
      out << "Stable count = repeats (out of the column total) in which the "
             "residual test judged the variable domain-invariant; LSHD is the "
             "pooled graph's local error, averaged over those repeats only.\n\n";
      out << "| experiment | n | variable | stable count | repeats | mean LSHD |\n";
      out << "|---|---|---|---|---|---|\n";
      for (const StableSummaryRow& row : stab_rows)
        out << "| " << row.experiment << " | " << row.n << " | " << row.variable
            << " | " << row.stable_count << " | " << row.repeats << " | "
            << lshd_cell(row) << " |\n";
      out << "\n";
    }

    out << "## SHD by method\n\n";
    out << "| experiment | n | method | repeats | mean SHD | std |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const ShdSummaryRow& row : shd_rows) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f | %.3f", row.mean_shd, row.std_shd);
      out << "| " << row.experiment << " | " << row.n << " | " << row.method << " | "
          << row.repeats << " | " << buf << " |\n";
    }
    out << "\n";

    out << "## Median step times (seconds)\n\n";
    out << "| experiment | n | method | step1 | step2 | step3 | total |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& [key, ts] : time_groups) {
      auto med = [&](auto pick) {
        std::vector<double> v;
        v.reserve(ts.size());
        for (const StepTimings& t : ts) v.push_back(pick(t));
        return quantile(v, 0.5);
      };
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.4g | %.4g | %.4g | %.4g",
                    med([](const StepTimings& t) { return t.step1; }),
                    med([](const StepTimings& t) { return t.step2; }),
                    med([](const StepTimings& t) { return t.step3; }),
                    med([](const StepTimings& t) { return t.total(); }));
      out << "| " << std::get<0>(key) << " | " << std::get<1>(key) << " | "
          << std::get<2>(key) << " | " << buf << " |\n";
    }
    out << "\n";
    write_text_atomic(out_dir / "summary.md", out.str());
  }
}

}  // namespace cicme
