#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace stylemetric {

inline constexpr int kSchemaVersion = 1;

struct FeatureVector {
  std::string model_id;
  std::string object_type;
  std::string cluster;
  std::string config_hash;
  Eigen::VectorXd values;
  std::vector<std::string> flags;  // e.g. "no-appearance", "surface-voxels"
};

/// Ordered by model id, which fixes iteration order everywhere.
using FeatureMap = std::map<std::string, FeatureVector>;

/// A feature file: vectors plus the config that produced them.
struct FeatureSet {
  std::string config_hash;
  nlohmann::ordered_json config;  // serialized FeatureConfig (or experiment description)
  FeatureMap vectors;

  /// Model ids of one object type, sorted.
  std::vector<std::string> ids_of_type(const std::string& object_type) const;
  std::vector<std::string> types() const;
};

void write_feature_set(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet read_feature_set(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Exact JSON encoding of Eigen data (shortest round-trip doubles).
nlohmann::ordered_json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j);

}  // namespace stylemetric
