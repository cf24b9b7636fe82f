#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stylemetric/feature_vector.hpp"
#include "stylemetric/metric.hpp"

namespace stylemetric {

/// Gaussian feature corpus with a hidden sparse diagonal metric.
struct SyntheticSpec {
  std::vector<std::string> types{"chair", "table"};
  std::map<std::string, std::string> clusters;  // type -> cluster, defaults to the type
  int models_per_type = 60;
  int dim = 200;
  int informative = 20;
  std::vector<int> support;  // explicit informative dims; drawn at random when empty
  double weight_min = 0.5;
  double weight_max = 1.5;
  std::uint64_t seed = 1;
  std::string config_hash = "synthetic";
};

struct SyntheticCorpus {
  FeatureSet features;
  WeightMatrix w_star;
  std::vector<int> support;  // sorted
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

/// Small procedural OBJ/MTL/PNG corpus: DIR/<type>/<id>.obj with materials and
/// a texture per model, plus clusters.json and profiles.json at the root.
struct ProceduralSpec {
  int models_per_type = 4;
  std::uint64_t seed = 7;
  int texture_side = 128;
};

/// Returns the written OBJ paths.
std::vector<std::filesystem::path> write_procedural_corpus(const std::filesystem::path& dir,
                                                           const ProceduralSpec& spec = {});

}  // namespace stylemetric
