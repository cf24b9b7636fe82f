#include "stylemetric/search.hpp"

#include <algorithm>

#include "stylemetric/error.hpp"

namespace stylemetric {

SearchResult search(const FeatureMap& features, const WeightMatrix& w, const std::string& query_id,
                    const std::string& target_type) {
  auto q = features.find(query_id);
  if (q == features.end()) throw NotFound("unknown query model '" + query_id + "'");
  SearchResult r;
  r.query_id = query_id;
  r.target_type = target_type;
  for (const auto& [id, fv] : features) {
    if (fv.object_type != target_type || id == query_id) continue;
    r.ranked.push_back({id, distance(q->second, fv, w)});
  }
  std::sort(r.ranked.begin(), r.ranked.end(), [](const SearchHit& a, const SearchHit& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.model_id < b.model_id);
  });
  return r;
}

std::vector<SearchHit> top_k(const SearchResult& r, int k) {
  if (k <= 0 || static_cast<std::size_t>(k) >= r.ranked.size()) return r.ranked;
  return {r.ranked.begin(), r.ranked.begin() + k};
}

nlohmann::ordered_json to_json(const SearchResult& r, int k) {
  nlohmann::ordered_json j;
  j["query_id"] = r.query_id;
  j["target_type"] = r.target_type;
  j["total"] = r.ranked.size();
  auto ranked = nlohmann::ordered_json::array();
  for (const auto& h : top_k(r, k)) ranked.push_back({{"id", h.model_id}, {"distance", h.distance}});
  j["ranked"] = std::move(ranked);
  return j;
}

}  // namespace stylemetric
