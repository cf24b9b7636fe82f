#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace stylemetric {

struct BlockSpec {
  std::string_view name;
  int size;
  std::string_view group;  // plotting group; the four curvature blocks share one
};

/// Fixed block order of the per-model feature vector: 16 geometric blocks,
/// then 5 appearance blocks.
inline constexpr std::array<BlockSpec, 21> kFeatureBlocks{{
    {"shape_distribution", 128, "shape_distribution"},
    {"curvature_gauss", 128, "curvature"},
    {"curvature_mean", 128, "curvature"},
    {"curvature_max", 128, "curvature"},
    {"curvature_min", 128, "curvature"},
    {"shape_diameter", 128, "shape_diameter"},
    {"light_field", 470, "light_field"},
    {"voxel_gradient", 192, "voxel_gradient"},
    {"voxel_gradient_direction", 128, "voxel_gradient_direction"},
    {"sil_centroid_distances", 192, "sil_centroid_distances"},
    {"sil_fourier", 57, "sil_fourier"},
    {"sil_zernike", 108, "sil_zernike"},
    {"sil_d2", 192, "sil_d2"},
    {"sil_gradient", 192, "sil_gradient"},
    {"sil_gradient_direction", 96, "sil_gradient_direction"},
    {"shape_histogram", 192, "shape_histogram"},
    {"dominant_hsv", 3, "dominant_hsv"},
    {"hue_histogram", 32, "hue_histogram"},
    {"saturation_histogram", 32, "saturation_histogram"},
    {"value_histogram", 32, "value_histogram"},
    {"lbp", 42, "lbp"},
}};

inline constexpr int kGeometryBlockCount = 16;
inline constexpr int kGeometryDims = 2587;
inline constexpr int kAppearanceDims = 141;
inline constexpr int kFeatureDims = kGeometryDims + kAppearanceDims;

constexpr int block_offset(std::size_t block) {
  int offset = 0;
  for (std::size_t b = 0; b < block; ++b) offset += kFeatureBlocks[b].size;
  return offset;
}

/// Index of the named block; throws InvalidArgument for unknown names.
std::size_t block_index(std::string_view name);

static_assert(block_offset(kGeometryBlockCount) == kGeometryDims);
static_assert(block_offset(kFeatureBlocks.size()) == kFeatureDims);
static_assert(kFeatureDims == 2728);

/// Every tunable constant of descriptor extraction. Serialized next to the
/// features; vectors are only comparable under an identical config hash.
struct FeatureConfig {
  // Surface sampling and mesh-level descriptors.
  std::uint64_t seed = 20160601;
  int surface_samples = 4096;
  int d2_bins = 128;
  int d2_pairs = 524288;  // 1024^2 / 2
  int curvature_bins = 128;
  double curvature_low_percentile = 1.0;
  double curvature_high_percentile = 99.0;
  int sdf_bins = 128;
  int sdf_samples = 1024;
  int sdf_rays = 30;
  double sdf_cone_degrees = 60.0;  // full opening angle
  int lfd_views = 10;
  int lfd_image_size = 256;
  int lfd_zernike_order = 10;  // 35 magnitudes without the (0,0) term
  int lfd_fourier = 12;
  int shape_hist_shells = 8;
  int shape_hist_sectors = 24;
  double shape_hist_max_radius = 0.8660254037844386;  // half diagonal of the unit box

  // Voxel and silhouette descriptors.
  int voxel_resolution = 300;
  int voxel_blur = 3;
  int voxel_gradient_bins = 192;
  int voxel_direction_bins = 128;
  int sil_contour_samples = 64;
  int sil_fourier = 19;
  int sil_zernike_order = 10;  // 36 magnitudes
  int sil_d2_bins = 64;
  int sil_d2_pairs = 20000;
  int sil_gradient_bins = 64;
  int sil_orientation_bins = 32;

  // Appearance.
  int kmeans_k = 5;
  int kmeans_iterations = 20;
  int hsv_bins = 32;

  nlohmann::ordered_json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
  /// 16 hex digits of FNV-1a over the canonical JSON dump.
  std::string hash() const;
  /// Throws InvalidArgument when derived block sizes disagree with kFeatureBlocks.
  void validate() const;
};

}  // namespace stylemetric
