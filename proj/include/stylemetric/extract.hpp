#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stylemetric/feature_layout.hpp"
#include "stylemetric/feature_vector.hpp"
#include "stylemetric/mesh_io.hpp"

namespace stylemetric {

struct Extraction {
  FeatureVector features;
  std::vector<std::string> warnings;
  double seconds = 0;
};

/// Normalizes a raw model with its type profile and computes all 2728 values.
Extraction extract_features(const Model& raw, const TypeProfile& profile, const FeatureConfig& cfg = {});

/// One model file of a corpus directory laid out as DIR/<type>/.../<id>.obj.
struct CorpusEntry {
  std::filesystem::path path;
  std::string id;
  std::string object_type;
  std::string cluster;
};

/// Finds every OBJ below `dir`; the first directory level names the type.
/// Optional DIR/clusters.json maps type -> cluster. Ids must be unique.
std::vector<CorpusEntry> discover_corpus(const std::filesystem::path& dir);

/// Profiles from DIR/profiles.json when present, else defaults.
ProfileTable corpus_profiles(const std::filesystem::path& dir);

struct CorpusExtraction {
  FeatureSet features;
  std::map<std::string, std::vector<std::string>> warnings;  // per model
  std::map<std::string, std::string> failures;               // model -> error
};

/// Extracts every model; a failing model is reported, not fatal.
CorpusExtraction extract_corpus(const std::vector<CorpusEntry>& entries, const ProfileTable& profiles,
                                const FeatureConfig& cfg = {}, int threads = 1);

}  // namespace stylemetric
