#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylemetric/extract.hpp"
#include "stylemetric/feature_vector.hpp"
#include "stylemetric/metric.hpp"
#include "stylemetric/triplet_record.hpp"

namespace stylemetric {

inline constexpr const char* kCatalogEnv = "STYLEMETRIC_CATALOG";
inline constexpr const char* kIdentityMetric = "identity";

struct ModelEntry {
  std::string id;
  std::string object_type;
  std::string cluster;
  std::string mesh;       // source OBJ, may be empty
  std::string thumbnail;  // relative to the catalog root, empty when none
  bool has_features = false;
};

struct MetricEntry {
  std::string id;
  std::string file;  // relative to the catalog root
  std::string base;  // crowd | user | combined | imported
  std::vector<std::string> triplet_sets;
  std::string shape;
  std::string config_hash;
};

struct TripletSetEntry {
  std::string id;
  std::string file;
  std::string source;  // crowd | user | simulated
  std::string label;   // client-supplied user label
  std::size_t count = 0;
};

/// Renders the canonical-view grey thumbnail of a normalized model.
void render_thumbnail(const Model& normalized, const std::filesystem::path& path, int size = 128);

/// A catalog directory: catalog.json manifest, features.json, metrics/,
/// triplets/ and thumbnails/. Every write goes through a temp-file rename.
/// Methods are safe to call concurrently; writers are serialized.
/// Triplet-set ids must match [A-Za-z0-9_.-]+.
class Catalog {
public:
  /// Creates a catalog around a feature set; thumbnails are rendered for
  /// corpus entries whose meshes load.
  static Catalog create(const std::filesystem::path& root, const FeatureSet& features,
                        const std::vector<CorpusEntry>& corpus = {}, const ProfileTable& profiles = {});
  static Catalog open(const std::filesystem::path& root);

  Catalog(Catalog&& other) noexcept;

  const std::filesystem::path& root() const { return root_; }
  const FeatureSet& features() const { return features_; }

  std::vector<ModelEntry> models(const std::string& object_type = "") const;
  std::optional<ModelEntry> model(const std::string& id) const;

  std::vector<MetricEntry> metrics() const;
  /// The metric record; "identity" is always available. Throws NotFound.
  WeightMatrix metric(const std::string& id) const;
  std::string add_metric(const WeightMatrix& w, const std::string& base, const std::vector<std::string>& sets);

  std::vector<TripletSetEntry> triplet_sets() const;
  TripletSetEntry triplet_set_entry(const std::string& id) const;
  std::vector<TripletRecord> triplet_set(const std::string& id) const;
  /// New set with a fresh id.
  std::string add_triplet_set(const std::vector<TripletRecord>& triplets, const std::string& source,
                              const std::string& label);
  /// Appends to the named set, creating it when missing. Returns the new size.
  std::size_t append_triplets(const std::string& id, const std::vector<TripletRecord>& triplets,
                              const std::string& source, const std::string& label);

private:
  explicit Catalog(std::filesystem::path root);
  void load();
  void save_locked() const;
  std::string next_id(const std::string& prefix);

  std::filesystem::path root_;
  FeatureSet features_;
  std::map<std::string, ModelEntry> models_;
  std::map<std::string, MetricEntry> metrics_;
  std::map<std::string, TripletSetEntry> sets_;
  std::map<std::string, int> counters_;
  mutable std::map<std::string, WeightMatrix> metric_cache_;
  mutable std::shared_mutex mu_;
  mutable std::mutex cache_mu_;
};

}  // namespace stylemetric
