#include "cicme/engine.hpp"

#include <chrono>
#include <stdexcept>

#include "cicme/io.hpp"
#include "cicme/metrics.hpp"
#include "cicme/rng.hpp"

namespace cicme {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t domain_init_seed(const EngineConfig& config, int k) {
  return derive_seed(config.seed, {seed_path::domain_init, static_cast<std::uint64_t>(k)});
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "cicme-f") return Method::cicme_f;
  if (name == "cicme-l") return Method::cicme_l;
  if (name == "notears-pool") return Method::notears_pool;
  if (name == "notears-ind") return Method::notears_ind;
  throw std::invalid_argument("unknown method: " + name);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::cicme_f: return "cicme-f";
    case Method::cicme_l: return "cicme-l";
    case Method::notears_pool: return "notears-pool";
    case Method::notears_ind: return "notears-ind";
  }
  throw std::logic_error("unreachable");
}

void EngineConfig::validate() const {
  model.validate();
  solver.validate();
  hsic.validate();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("EngineConfig: alpha must be in (0,1)");
  if (!(gamma >= 0.0)) throw std::invalid_argument("EngineConfig: gamma must be >= 0");
  if (!(threshold >= 0.0)) throw std::invalid_argument("EngineConfig: threshold must be >= 0");
}

Eigen::MatrixXd stable_mask(int d, const std::vector<int>& stable) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (int j : stable) {
    if (j < 0 || j >= d) throw std::invalid_argument("stable_mask: variable out of range");
    m.col(j).setOnes();
  }
  return m;
}

FitResult step1_pool(const Eigen::MatrixXd& pooled_x, const EngineConfig& config) {
  config.validate();
  int d = static_cast<int>(pooled_x.cols());
  ModelSet init = random_model_set(d, config.model,
                                   derive_seed(config.seed, {seed_path::pooled_init}));
  return notears_fit(pooled_x, init, config.solver);
}

std::vector<FitResult> step3_freeze(const MultiDomainDataset& ds, const ModelSet& pooled,
                                    const std::vector<int>& stable,
                                    const EngineConfig& config) {
  config.validate();
  pooled.validate();
  int d = ds.dim();
  std::vector<char> freeze(static_cast<size_t>(d), 0);
  for (int j : stable) {
    if (j < 0 || j >= d) throw std::invalid_argument("step3_freeze: variable out of range");
    freeze[static_cast<size_t>(j)] = 1;
  }
  std::vector<FitResult> fits;
  fits.reserve(static_cast<size_t>(ds.num_domains()));
  for (int k = 0; k < ds.num_domains(); ++k) {
    ModelSet init = random_model_set(d, config.model,
                                     domain_init_seed(config, ds.truth[static_cast<size_t>(k)].k));
    for (int j : stable) init.models[static_cast<size_t>(j)] = pooled.models[static_cast<size_t>(j)];
    fits.push_back(notears_fit(ds.domains[static_cast<size_t>(k)], init, config.solver, freeze));
  }
  return fits;
}

std::vector<FitResult> step3_penalty(const MultiDomainDataset& ds,
                                     const Eigen::MatrixXd& w_pool,
                                     const std::vector<int>& stable,
                                     const EngineConfig& config) {
  config.validate();
  int d = ds.dim();
  if (w_pool.rows() != d || w_pool.cols() != d)
    throw std::invalid_argument("step3_penalty: pooled adjacency shape mismatch");
  StructurePenalty penalty;
  penalty.gamma = config.gamma;
  penalty.target = w_pool;
  penalty.mask = stable_mask(d, stable);
  std::vector<FitResult> fits;
  fits.reserve(static_cast<size_t>(ds.num_domains()));
  for (int k = 0; k < ds.num_domains(); ++k) {
    ModelSet init = random_model_set(d, config.model,
                                     domain_init_seed(config, ds.truth[static_cast<size_t>(k)].k));
    fits.push_back(notears_fit(ds.domains[static_cast<size_t>(k)], init, config.solver, {},
                               &penalty));
  }
  return fits;
}

namespace {

std::vector<FitResult> fit_independent(const MultiDomainDataset& ds,
                                       const EngineConfig& config) {
  std::vector<FitResult> fits;
  fits.reserve(static_cast<size_t>(ds.num_domains()));
  for (int k = 0; k < ds.num_domains(); ++k) {
    ModelSet init = random_model_set(ds.dim(), config.model,
                                     domain_init_seed(config, ds.truth[static_cast<size_t>(k)].k));
    fits.push_back(notears_fit(ds.domains[static_cast<size_t>(k)], init, config.solver));
  }
  return fits;
}

void absorb_domain_fits(CicmeResult& out, std::vector<FitResult>&& fits) {
  for (FitResult& f : fits) {
    out.w_domains.push_back(std::move(f.w));
    out.domain_models.push_back(std::move(f.models));
    out.domain_converged.push_back(f.converged ? 1 : 0);
    out.evaluations += f.evaluations;
  }
}

// Shared state across the methods of one suite call.
struct SharedSteps {
  bool have_pool = false;
  FitResult pool;
  double step1_seconds = 0.0;
  bool have_stability = false;
  StabilityReport stability;
  double step2_seconds = 0.0;
};

void ensure_pool(SharedSteps& shared, const MultiDomainDataset& ds,
                 const EngineConfig& config) {
  if (shared.have_pool) return;
  auto t0 = std::chrono::steady_clock::now();
  auto [pooled_x, domain_index] = pool(ds);
  shared.pool = step1_pool(pooled_x, config);
  shared.step1_seconds = seconds_since(t0);
  shared.have_pool = true;
}

void ensure_stability(SharedSteps& shared, const MultiDomainDataset& ds,
                      const EngineConfig& config) {
  if (shared.have_stability) return;
  ensure_pool(shared, ds, config);
  auto t0 = std::chrono::steady_clock::now();
  auto [pooled_x, domain_index] = pool(ds);
  shared.stability = detect_stable(shared.pool.models, pooled_x, domain_index,
                                   config.alpha, config.hsic);
  shared.step2_seconds = seconds_since(t0);
  shared.have_stability = true;
}

CicmeResult run_with_shared(const MultiDomainDataset& ds, Method method,
                            const EngineConfig& config, SharedSteps& shared) {
  CicmeResult out;
  out.method = method;

  if (method == Method::notears_ind) {
    auto t0 = std::chrono::steady_clock::now();
    absorb_domain_fits(out, fit_independent(ds, config));
    out.timings.step3 = seconds_since(t0);
    return out;
  }

  ensure_pool(shared, ds, config);
  out.w_pool = shared.pool.w;
  out.pooled_models = shared.pool.models;
  out.pool_converged = shared.pool.converged;
  out.evaluations += shared.pool.evaluations;
  out.timings.step1 = shared.step1_seconds;

  if (method == Method::notears_pool) {
    // The pooled graph stands in for every domain.
    for (int k = 0; k < ds.num_domains(); ++k) {
      out.w_domains.push_back(shared.pool.w);
      out.domain_converged.push_back(shared.pool.converged ? 1 : 0);
    }
    return out;
  }

  ensure_stability(shared, ds, config);
  out.stability = shared.stability;
  out.timings.step2 = shared.step2_seconds;
  std::vector<int> stable = shared.stability.stable_set();

  auto t0 = std::chrono::steady_clock::now();
  if (method == Method::cicme_f)
    absorb_domain_fits(out, step3_freeze(ds, shared.pool.models, stable, config));
  else
    absorb_domain_fits(out, step3_penalty(ds, shared.pool.w, stable, config));
  out.timings.step3 = seconds_since(t0);
  return out;
}

}  // namespace

CicmeResult run(const MultiDomainDataset& ds, Method method, const EngineConfig& config) {
  ds.validate();
  config.validate();
  SharedSteps shared;
  return run_with_shared(ds, method, config, shared);
}

std::map<Method, CicmeResult> run_suite(const MultiDomainDataset& ds,
                                        const std::set<Method>& methods,
                                        const EngineConfig& config) {
  ds.validate();
  config.validate();
  if (methods.empty()) throw std::invalid_argument("run_suite: no methods selected");
  SharedSteps shared;
  std::map<Method, CicmeResult> out;
  for (Method m : methods) out.emplace(m, run_with_shared(ds, m, config, shared));
  return out;
}

EvalRecord evaluate(const CicmeResult& result, const MultiDomainDataset& ds,
                    double threshold) {
  if (static_cast<int>(result.w_domains.size()) != ds.num_domains())
    throw std::invalid_argument("evaluate: domain count mismatch");
  EvalRecord rec;
  double total = 0.0;
  for (int k = 0; k < ds.num_domains(); ++k) {
    BinaryGraph est = threshold_graph(result.w_domains[static_cast<size_t>(k)], threshold);
    BinaryGraph truth = ds.truth[static_cast<size_t>(k)].resolved().graph();
    int s = shd(est, truth);
    rec.per_domain_shd.push_back(s);
    total += s;
  }
  rec.mean_shd = total / static_cast<double>(ds.num_domains());

  if (result.w_pool.size() > 0) {
    BinaryGraph pool_graph = threshold_graph(result.w_pool, threshold);
    BinaryGraph base = ds.truth[0].base.graph();
    for (int j = 0; j < ds.dim(); ++j)
      rec.pool_lshd.push_back(local_shd(pool_graph, base, j));
  }
  return rec;
}

nlohmann::json cicme_result_to_json(const CicmeResult& result, double threshold) {
  nlohmann::json j;
  j["method"] = to_string(result.method);
  j["pool_converged"] = result.pool_converged;
  j["evaluations"] = result.evaluations;
  j["timings"] = {{"step1", result.timings.step1},
                  {"step2", result.timings.step2},
                  {"step3", result.timings.step3},
                  {"total", result.timings.total()}};
  if (result.w_pool.size() > 0) {
    j["w_pool"] = matrix_to_json(result.w_pool);
    j["w_pool_thresholded"] =
        matrix_to_json(threshold_graph(result.w_pool, threshold).cast<double>());
  }
  if (result.stability) j["stability"] = *result.stability;
  if (result.pooled_models) j["pooled_models"] = model_set_to_json(*result.pooled_models);
  nlohmann::json domains = nlohmann::json::array();
  for (size_t k = 0; k < result.w_domains.size(); ++k) {
    nlohmann::json dj;
    dj["w"] = matrix_to_json(result.w_domains[k]);
    dj["w_thresholded"] =
        matrix_to_json(threshold_graph(result.w_domains[k], threshold).cast<double>());
    dj["converged"] = static_cast<bool>(result.domain_converged[k]);
    if (k < result.domain_models.size() && result.domain_models[k].dim() > 0)
      dj["models"] = model_set_to_json(result.domain_models[k]);
    domains.push_back(std::move(dj));
  }
  j["domains"] = std::move(domains);
  return j;
}

}  // namespace cicme
