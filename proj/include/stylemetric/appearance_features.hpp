#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "stylemetric/feature_layout.hpp"
#include "stylemetric/mesh_io.hpp"

namespace stylemetric {

/// Multi-scale riu2 LBP configurations (P, R); bins per scale are P + 2.
inline constexpr std::array<std::array<int, 2>, 3> kLbpScales{{{8, 1}, {12, 2}, {16, 3}}};

struct AppearanceBlocks {
  Eigen::Vector3d dominant_hsv = Eigen::Vector3d::Zero();  // H in [0,1), S, V in [0,1]
  Eigen::VectorXd hue, saturation, value;                  // hsv_bins each
  Eigen::VectorXd lbp;                                     // 42, each scale sums to 1

  /// 141 values in layout order.
  Eigen::VectorXd concat() const;
};

/// RGB in [0,1] -> HSV with H in [0,1); achromatic colours get H = 0.
Eigen::Vector3d rgb_to_hsv(const Eigen::Vector3d& rgb);

/// Weighted circular mean of hues in [0,1); zero resultant -> 0.
double circular_hue_mean(std::span<const double> hues, std::span<const double> weights);

/// k-means (k-means++ init, fixed seed) in RGB; pixel-count weighted mean of
/// the cluster centres converted to HSV, hue averaged on the circle.
Eigen::Vector3d compute_dominant_hsv(const RgbImage& image, const FeatureConfig& cfg = {});

/// Hue (saturation-weighted), saturation and value histograms, concatenated.
Eigen::VectorXd compute_hsv_histograms(const RgbImage& image, const FeatureConfig& cfg = {});

/// Rotation-invariant uniform LBP at the three kLbpScales, per-scale normalized.
Eigen::VectorXd compute_lbp(const RgbImage& image);

AppearanceBlocks compute_appearance(const RgbImage& image, const FeatureConfig& cfg = {});

/// Weighted average of per-texture blocks, each histogram re-normalized.
/// Empty weights mean uniform. Throws InvalidArgument on an empty list.
AppearanceBlocks combine_textures(std::span<const AppearanceBlocks> blocks, std::vector<double> weights = {});

/// Solid mid-grey block: S = 0, V = 0.5.
AppearanceBlocks neutral_appearance(const FeatureConfig& cfg = {});

/// Textured-surface-area fraction per texture; uniform when no face uses one.
std::vector<double> texture_coverage(const Model& m);

struct ModelAppearance {
  AppearanceBlocks blocks;
  bool no_appearance = false;
};

/// Appearance of a model: combined textures, else its material colour as a
/// solid texture, else the neutral block flagged as no-appearance.
ModelAppearance compute_model_appearance(const Model& m, const FeatureConfig& cfg = {});

}  // namespace stylemetric
