#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cicme/hsic.hpp"
#include "cicme/mlp.hpp"
#include "cicme/scm.hpp"

namespace cicme {

// --- generic files -------------------------------------------------------

std::string read_text(const std::filesystem::path& path);
// Writes via a sibling temp file + rename, so readers never observe a
// partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

// --- matrices and CSV ----------------------------------------------------

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  // row-major payload
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path,
                                std::vector<std::string>* header = nullptr);

// --- domain-model structures --------------------------------------------

void to_json(nlohmann::json& j, const Edge& e);
void from_json(const nlohmann::json& j, Edge& e);
void to_json(nlohmann::json& j, const WeightOverride& o);
void from_json(const nlohmann::json& j, WeightOverride& o);
void to_json(nlohmann::json& j, const NoiseOverride& o);
void from_json(const nlohmann::json& j, NoiseOverride& o);
void to_json(nlohmann::json& j, const FcmSpec& f);
void from_json(const nlohmann::json& j, FcmSpec& f);
void to_json(nlohmann::json& j, const DomainSpec& s);
void from_json(const nlohmann::json& j, DomainSpec& s);
void to_json(nlohmann::json& j, const VariableDecision& d);
void from_json(const nlohmann::json& j, VariableDecision& d);
void to_json(nlohmann::json& j, const StabilityReport& r);
void from_json(const nlohmann::json& j, StabilityReport& r);

// --- dataset bundle ------------------------------------------------------

// Writes one CSV per domain (domain1.csv, ...), a pooled CSV with a
// trailing integer `domain` column, and truth.json with the generating
// specs and the seed.
void write_dataset(const MultiDomainDataset& ds, const std::filesystem::path& dir,
                   std::uint64_t seed);
MultiDomainDataset read_dataset(const std::filesystem::path& dir);

// --- model checkpoints ---------------------------------------------------

void write_model_set(const std::filesystem::path& path, const ModelSet& m);
ModelSet read_model_set(const std::filesystem::path& path);
nlohmann::json model_set_to_json(const ModelSet& m);
ModelSet model_set_from_json(const nlohmann::json& j);

}  // namespace cicme
