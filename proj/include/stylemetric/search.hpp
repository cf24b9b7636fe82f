#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stylemetric/feature_vector.hpp"
#include "stylemetric/metric.hpp"

namespace stylemetric {

struct SearchHit {
  std::string model_id;
  double distance;
};

struct SearchResult {
  std::string query_id;
  std::string target_type;
  std::vector<SearchHit> ranked;  // every model of target_type except the query
};

/// Ranks all models of `target_type` by distance to the query; ties by id.
/// Throws NotFound for an unknown query, ConfigMismatch across configs.
SearchResult search(const FeatureMap& features, const WeightMatrix& w, const std::string& query_id,
                    const std::string& target_type);

/// The first k hits (all when k <= 0).
std::vector<SearchHit> top_k(const SearchResult& r, int k);

nlohmann::ordered_json to_json(const SearchResult& r, int k = 0);

}  // namespace stylemetric
