#include "stylemetric/feature_layout.hpp"

#include <cstdio>

#include "stylemetric/error.hpp"
#include "stylemetric/rng.hpp"
#include "stylemetric/shape2d.hpp"

namespace stylemetric {

#define STYLEMETRIC_CONFIG_FIELDS(X)                                                              \
  X(seed) X(surface_samples) X(d2_bins) X(d2_pairs) X(curvature_bins) X(curvature_low_percentile) \
  X(curvature_high_percentile) X(sdf_bins) X(sdf_samples) X(sdf_rays) X(sdf_cone_degrees)         \
  X(lfd_views) X(lfd_image_size) X(lfd_zernike_order) X(lfd_fourier) X(shape_hist_shells)         \
  X(shape_hist_sectors) X(shape_hist_max_radius) X(voxel_resolution) X(voxel_blur)                \
  X(voxel_gradient_bins) X(voxel_direction_bins) X(sil_contour_samples) X(sil_fourier)            \
  X(sil_zernike_order) X(sil_d2_bins) X(sil_d2_pairs) X(sil_gradient_bins)                        \
  X(sil_orientation_bins) X(kmeans_k) X(kmeans_iterations) X(hsv_bins)

std::size_t block_index(std::string_view name) {
  for (std::size_t b = 0; b < kFeatureBlocks.size(); ++b)
    if (kFeatureBlocks[b].name == name) return b;
  throw InvalidArgument("unknown feature block '" + std::string(name) + "'");
}

nlohmann::ordered_json FeatureConfig::to_json() const {
  nlohmann::ordered_json j;
#define X(field) j[#field] = field;
  STYLEMETRIC_CONFIG_FIELDS(X)
#undef X
  return j;
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  FeatureConfig c;
  try {
#define X(field) \
  if (j.contains(#field)) j.at(#field).get_to(c.field);
    STYLEMETRIC_CONFIG_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad feature config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string FeatureConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_string(to_json().dump())));
  return buf;
}

void FeatureConfig::validate() const {
  auto expect = [](std::string_view block, long actual) {
    const int want = kFeatureBlocks[block_index(block)].size;
    if (actual != want)
      throw InvalidArgument("config gives " + std::string(block) + " size " + std::to_string(actual) +
                            ", layout requires " + std::to_string(want));
  };
  expect("shape_distribution", d2_bins);
  expect("curvature_gauss", curvature_bins);
  expect("shape_diameter", sdf_bins);
  expect("light_field", static_cast<long>(lfd_views) * (zernike_count(lfd_zernike_order) - 1 + lfd_fourier));
  expect("voxel_gradient", voxel_gradient_bins);
  expect("voxel_gradient_direction", voxel_direction_bins);
  expect("sil_centroid_distances", 3L * sil_contour_samples);
  expect("sil_fourier", 3L * sil_fourier);
  expect("sil_zernike", 3L * zernike_count(sil_zernike_order));
  expect("sil_d2", 3L * sil_d2_bins);
  expect("sil_gradient", 3L * sil_gradient_bins);
  expect("sil_gradient_direction", 3L * sil_orientation_bins);
  expect("shape_histogram", static_cast<long>(shape_hist_shells) * shape_hist_sectors);
  expect("hue_histogram", hsv_bins);
  if (lfd_views != 10) throw InvalidArgument("light field uses the 10 half-dodecahedron views");
  if (voxel_resolution < 8) throw InvalidArgument("voxel_resolution must be >= 8");
  if (surface_samples < 2 || sdf_samples < 1 || sdf_rays < 1 || kmeans_k < 1)
    throw InvalidArgument("sample counts must be positive");
  if (sil_fourier > sil_contour_samples || lfd_fourier > sil_contour_samples)
    throw InvalidArgument("Fourier coefficient count exceeds contour samples");
}

}  // namespace stylemetric
