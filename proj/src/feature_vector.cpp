#include "stylemetric/feature_vector.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "stylemetric/error.hpp"

namespace stylemetric {

std::vector<std::string> FeatureSet::ids_of_type(const std::string& object_type) const {
  std::vector<std::string> ids;
  for (const auto& [id, fv] : vectors)
    if (fv.object_type == object_type) ids.push_back(id);
  return ids;
}

std::vector<std::string> FeatureSet::types() const {
  std::set<std::string> t;
  for (const auto& [id, fv] : vectors) t.insert(fv.object_type);
  return {t.begin(), t.end()};
}

nlohmann::ordered_json to_json(const Eigen::VectorXd& v) {
  auto arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) throw InvalidArgument("non-finite value cannot be serialized");
    arr.push_back(v(i));
  }
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array()) throw IoError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::ordered_json to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array()) throw IoError("expected an array of rows");
  if (j.empty()) return {};
  const auto cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != cols) throw IoError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
  }
  return m;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_feature_set(const std::filesystem::path& path, const FeatureSet& set) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "features";
  j["config_hash"] = set.config_hash;
  j["config"] = set.config;
  auto models = nlohmann::ordered_json::array();
  for (const auto& [id, fv] : set.vectors) {
    if (fv.config_hash != set.config_hash)
      throw ConfigMismatch("feature vector '" + id + "' has config hash " + fv.config_hash +
                           ", file has " + set.config_hash);
    nlohmann::ordered_json m;
    m["id"] = fv.model_id;
    m["type"] = fv.object_type;
    m["cluster"] = fv.cluster;
    m["flags"] = fv.flags;
    m["values"] = to_json(fv.values);
    models.push_back(std::move(m));
  }
  j["models"] = std::move(models);
  write_text_atomic(path, j.dump() + "\n");
}

FeatureSet read_feature_set(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad feature file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("kind").get<std::string>() != "features") throw IoError(path.string() + " is not a feature file");
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw IoError("unsupported feature schema version in " + path.string());
    FeatureSet set;
    set.config_hash = j.at("config_hash").get<std::string>();
    set.config = j.at("config");
    for (const auto& m : j.at("models")) {
      FeatureVector fv;
      fv.model_id = m.at("id").get<std::string>();
      fv.object_type = m.at("type").get<std::string>();
      fv.cluster = m.at("cluster").get<std::string>();
      fv.flags = m.at("flags").get<std::vector<std::string>>();
      fv.config_hash = set.config_hash;
      fv.values = vector_from_json(m.at("values"));
      if (set.vectors.count(fv.model_id)) throw IoError("duplicate model id '" + fv.model_id + "'");
      set.vectors.emplace(fv.model_id, std::move(fv));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad feature file " + path.string() + ": " + e.what());
  }
}

}  // namespace stylemetric
