#include "cicme/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cicme {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  return json::parse(read_text(path));
}

void write_json_atomic(const fs::path& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  auto rows = j.at("rows").get<Eigen::Index>();
  auto cols = j.at("cols").get<Eigen::Index>();
  auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("matrix_from_json: payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  size_t at = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[at++];
  return m;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != m.cols())
    throw std::invalid_argument("write_matrix_csv: header width mismatch");
  std::ostringstream out;
  for (size_t c = 0; c < header.size(); ++c)
    out << (c ? "," : "") << header[c];
  if (!header.empty()) out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << (c ? "," : "") << format_double(m(i, c));
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path, std::vector<std::string>* header) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  bool first = true;
  Eigen::Index width = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    if (first) {
      first = false;
      // A header line is one whose first field does not parse as a number.
      char* end = nullptr;
      std::strtod(fields[0].c_str(), &end);
      bool numeric = end != fields[0].c_str() && *end == '\0';
      if (!numeric) {
        if (header) *header = fields;
        width = static_cast<Eigen::Index>(fields.size());
        continue;
      }
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& f : fields) row.push_back(std::stod(f));
    if (width == 0) width = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != width)
      throw std::runtime_error("read_matrix_csv: ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), width);
  for (size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index c = 0; c < width; ++c) m(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<size_t>(c)];
  return m;
}

void to_json(json& j, const Edge& e) {
  j = json{{"parent", e.parent}, {"child", e.child}, {"weight", e.weight}};
}
void from_json(const json& j, Edge& e) {
  j.at("parent").get_to(e.parent);
  j.at("child").get_to(e.child);
  j.at("weight").get_to(e.weight);
}

void to_json(json& j, const WeightOverride& o) {
  j = json{{"parent", o.parent}, {"child", o.child}, {"weight", o.weight}};
}
void from_json(const json& j, WeightOverride& o) {
  j.at("parent").get_to(o.parent);
  j.at("child").get_to(o.child);
  j.at("weight").get_to(o.weight);
}

void to_json(json& j, const NoiseOverride& o) {
  j = json{{"variable", o.variable}, {"mean", o.mean}, {"std", o.std}};
}
void from_json(const json& j, NoiseOverride& o) {
  j.at("variable").get_to(o.variable);
  j.at("mean").get_to(o.mean);
  j.at("std").get_to(o.std);
}

void to_json(json& j, const FcmSpec& f) {
  j = json{{"d", f.d},
           {"edges", f.edges},
           {"noise_mean", std::vector<double>(f.noise_mean.data(), f.noise_mean.data() + f.noise_mean.size())},
           {"noise_std", std::vector<double>(f.noise_std.data(), f.noise_std.data() + f.noise_std.size())},
           {"names", f.names}};
}
void from_json(const json& j, FcmSpec& f) {
  j.at("d").get_to(f.d);
  j.at("edges").get_to(f.edges);
  auto mean = j.at("noise_mean").get<std::vector<double>>();
  auto std_ = j.at("noise_std").get<std::vector<double>>();
  f.noise_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  f.noise_std = Eigen::Map<const Eigen::VectorXd>(std_.data(), static_cast<Eigen::Index>(std_.size()));
  j.at("names").get_to(f.names);
}

void to_json(json& j, const DomainSpec& s) {
  j = json{{"base", s.base},
           {"k", s.k},
           {"weight_overrides", s.weight_overrides},
           {"noise_overrides", s.noise_overrides}};
}
void from_json(const json& j, DomainSpec& s) {
  j.at("base").get_to(s.base);
  j.at("k").get_to(s.k);
  j.at("weight_overrides").get_to(s.weight_overrides);
  j.at("noise_overrides").get_to(s.noise_overrides);
}

void to_json(json& j, const VariableDecision& d) {
  j = json{{"statistic", d.statistic},
           {"p_value", d.p_value},
           {"bandwidth", d.bandwidth},
           {"verdict", d.stable ? "stable" : "unstable"},
           {"permutation_fallback", d.permutation_fallback},
           {"error", d.error}};
}
void from_json(const json& j, VariableDecision& d) {
  j.at("statistic").get_to(d.statistic);
  j.at("p_value").get_to(d.p_value);
  j.at("bandwidth").get_to(d.bandwidth);
  d.stable = j.at("verdict").get<std::string>() == "stable";
  j.at("permutation_fallback").get_to(d.permutation_fallback);
  j.at("error").get_to(d.error);
}

void to_json(json& j, const StabilityReport& r) {
  j = json{{"alpha", r.alpha}, {"variables", r.variables}};
}
void from_json(const json& j, StabilityReport& r) {
  j.at("alpha").get_to(r.alpha);
  j.at("variables").get_to(r.variables);
}

void write_dataset(const MultiDomainDataset& ds, const fs::path& dir, std::uint64_t seed) {
  ds.validate();
  fs::create_directories(dir);
  std::vector<std::string> names = ds.truth[0].base.names;
  if (names.empty())
    for (int j = 0; j < ds.dim(); ++j) names.push_back("X" + std::to_string(j + 1));

  for (int k = 0; k < ds.num_domains(); ++k)
    write_matrix_csv(dir / ("domain" + std::to_string(ds.truth[static_cast<size_t>(k)].k) + ".csv"),
                     ds.domains[static_cast<size_t>(k)], names);

  auto [pooled, domain_index] = pool(ds);
  Eigen::MatrixXd with_domain(pooled.rows(), pooled.cols() + 1);
  with_domain.leftCols(pooled.cols()) = pooled;
  with_domain.rightCols(1) = domain_index.cast<double>();
  std::vector<std::string> pooled_names = names;
  pooled_names.push_back("domain");
  write_matrix_csv(dir / "pooled.csv", with_domain, pooled_names);

  json truth{{"seed", seed}, {"domains", ds.truth}};
  write_json_atomic(dir / "truth.json", truth);
}

MultiDomainDataset read_dataset(const fs::path& dir) {
  json truth = read_json(dir / "truth.json");
  MultiDomainDataset ds;
  truth.at("domains").get_to(ds.truth);
  for (const DomainSpec& spec : ds.truth) {
    fs::path file = dir / ("domain" + std::to_string(spec.k) + ".csv");
    ds.domains.push_back(read_matrix_csv(file));
  }
  ds.validate();
  return ds;
}

json model_set_to_json(const ModelSet& m) {
  json models = json::array();
  for (const MlpParams& p : m.models) {
    models.push_back(json{{"w1", matrix_to_json(p.w1)},
                          {"b1", std::vector<double>(p.b1.data(), p.b1.data() + p.b1.size())},
                          {"w2", std::vector<double>(p.w2.data(), p.w2.data() + p.w2.size())},
                          {"b2", p.b2}});
  }
  return json{{"hidden_units", m.config.hidden_units},
              {"lambda1", m.config.lambda1},
              {"lambda2", m.config.lambda2},
              {"models", models}};
}

ModelSet model_set_from_json(const json& j) {
  ModelSet m;
  j.at("hidden_units").get_to(m.config.hidden_units);
  j.at("lambda1").get_to(m.config.lambda1);
  j.at("lambda2").get_to(m.config.lambda2);
  for (const json& pj : j.at("models")) {
    MlpParams p;
    p.w1 = matrix_from_json(pj.at("w1"));
    auto b1 = pj.at("b1").get<std::vector<double>>();
    auto w2 = pj.at("w2").get<std::vector<double>>();
    p.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<Eigen::Index>(b1.size()));
    p.w2 = Eigen::Map<const Eigen::VectorXd>(w2.data(), static_cast<Eigen::Index>(w2.size()));
    pj.at("b2").get_to(p.b2);
    m.models.push_back(std::move(p));
  }
  m.validate();
  return m;
}

void write_model_set(const fs::path& path, const ModelSet& m) {
  write_json_atomic(path, model_set_to_json(m));
}

ModelSet read_model_set(const fs::path& path) {
  return model_set_from_json(read_json(path));
}

}  // namespace cicme
