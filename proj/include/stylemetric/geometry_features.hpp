#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stylemetric/feature_layout.hpp"
#include "stylemetric/mesh_io.hpp"
#include "stylemetric/raster.hpp"

namespace stylemetric {

/// Histogram with its value range; bins are uniform on [lo, hi].
struct RangedHistogram {
  Eigen::VectorXd mass;
  double lo = 0.0;
  double hi = 1.0;

  int bin_of(double v) const;
  double bin_center(int b) const;
  /// Total mass of bins whose centres fall in [a, b].
  double mass_between(double a, double b) const;
};

// ---------------------------------------------------------------- D2

/// Upper end of the D2 range: twice the largest distance from the sample
/// centroid (rotation invariant, bounds every pairwise distance).
double shape_distribution_range(const PointSample& s);

/// Histogram of distances between random point pairs, L1-normalized.
Eigen::VectorXd compute_shape_distribution(const PointSample& s, const FeatureConfig& cfg = {});

// ---------------------------------------------------------- curvature

struct VertexCurvatures {
  Eigen::VectorXd gauss, mean, kmax, kmin;
  std::vector<bool> valid;  // false for boundary and isolated vertices
  std::size_t isolated = 0;
};

/// Angle-deficit Gaussian and cotangent-Laplacian mean curvature with mixed
/// Voronoi areas; principal curvatures H +- sqrt(max(H^2 - K, 0)).
VertexCurvatures compute_vertex_curvatures(const Model& m);

struct CurvatureHistograms {
  RangedHistogram gauss, mean, kmax, kmin;
};

/// Each curvature histogrammed over its [p_low, p_high] percentile range,
/// out-of-range values winsorized into the end bins.
CurvatureHistograms compute_curvature_histograms(const Model& m, const FeatureConfig& cfg = {});

/// Percentile range histogram used by the curvature blocks.
RangedHistogram robust_histogram(const std::vector<double>& values, int bins, double low_pct, double high_pct);

// ------------------------------------------------------ shape diameter

struct ConeRay {
  Vec3 direction;
  double weight;
};

/// Rays uniformly spread in solid angle over a cone of the configured
/// opening angle around -normal, weighted by the inverse angle to the axis.
/// The spiral starts along spin_hint projected off the axis, so a hint that
/// moves with the model (the direction to its centroid) keeps the rays
/// rotation-equivariant; a hint parallel to the axis falls back to a fixed frame.
std::vector<ConeRay> sdf_cone(const Vec3& normal, const FeatureConfig& cfg = {},
                              const Vec3& spin_hint = Vec3::Zero());

/// Smallest value whose cumulative weight reaches half the total.
double weighted_median(std::vector<double> values, std::vector<double> weights);

struct ShapeDiameter {
  RangedHistogram histogram;        // [0, max bounding-box extent]
  std::vector<double> per_sample;   // NaN where no ray hit
  double ray_hit_fraction = 0.0;
};

/// Throws GeometryError when fewer than half the rays hit the mesh.
ShapeDiameter compute_shape_diameter(const Model& m, const PointSample& s, const FeatureConfig& cfg = {});

// ------------------------------------------------------- light field

/// Ten half-dodecahedron camera frames. Frames are images of the first one
/// under rotations of the icosahedral group, so a shape with that symmetry
/// renders identically from all of them.
std::vector<ViewFrame> light_field_views();

Eigen::VectorXd compute_light_field(const Model& m, const FeatureConfig& cfg = {});

// ------------------------------------------------------------- voxels

/// n near-uniform unit directions on the sphere (Fibonacci lattice).
std::vector<Vec3> fibonacci_directions(int n);
/// Index of the lattice direction with the largest dot product.
int nearest_direction(const std::vector<Vec3>& lattice, const Vec3& d);

struct VoxelDescriptors {
  Eigen::VectorXd gradient;   // magnitude histogram on boundary voxels
  Eigen::VectorXd direction;  // magnitude-weighted nearest-direction histogram
};

VoxelDescriptors compute_voxel_descriptors(const VoxelGrid& g, const FeatureConfig& cfg = {});

// -------------------------------------------------------- silhouettes

struct SilhouetteDescriptors {
  Eigen::VectorXd centroid, fourier, zernike, d2, gradient, gradient_direction;
  std::vector<std::string> warnings;
};

SilhouetteDescriptors compute_silhouette_descriptors(const std::array<Silhouette, 3>& sils,
                                                     const FeatureConfig& cfg = {});

// ----------------------------------------------------- shape histogram

/// Shell x sector histogram around the origin.
Eigen::VectorXd compute_shape_histogram(const PointSample& s, const FeatureConfig& cfg = {});

// ---------------------------------------------------------- assembly

struct GeometryBlocks {
  Eigen::VectorXd shape_distribution;
  Eigen::VectorXd curvature_gauss, curvature_mean, curvature_max, curvature_min;
  Eigen::VectorXd shape_diameter;
  Eigen::VectorXd light_field;
  Eigen::VectorXd voxel_gradient, voxel_gradient_direction;
  Eigen::VectorXd sil_centroid_distances, sil_fourier, sil_zernike, sil_d2, sil_gradient,
      sil_gradient_direction;
  Eigen::VectorXd shape_histogram;

  /// Blocks in layout order.
  std::array<const Eigen::VectorXd*, kGeometryBlockCount> ordered() const;
};

/// Concatenates the blocks; throws InvalidArgument naming a block of wrong length.
Eigen::VectorXd assemble_geometry(const GeometryBlocks& blocks);

struct GeometryResult {
  GeometryBlocks blocks;
  bool solid_voxels = false;
  std::vector<std::string> warnings;
};

/// All geometric descriptors of a normalized model.
GeometryResult compute_geometry(const Model& normalized, const FeatureConfig& cfg = {});

}  // namespace stylemetric
