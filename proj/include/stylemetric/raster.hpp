#pragma once

#include <optional>
#include <vector>

#include "stylemetric/mesh_io.hpp"

namespace stylemetric {

/// Orthographic camera: image x follows `right`, image y follows `up`
/// (rows grow downward), rays travel along -`toward` where `toward` is the
/// unit vector from the object to the camera.
struct ViewFrame {
  Vec3 right = Vec3::UnitX();
  Vec3 up = Vec3::UnitY();
  Vec3 toward = Vec3::UnitZ();
};

/// Binary coverage of the projected model at pixel centres. The window
/// [-half_extent, half_extent]^2 maps onto the size x size image.
Mask render_silhouette(const Model& m, const ViewFrame& frame, int size, double half_extent);

/// Grey thumbnail: silhouette with Lambert-like shading by face normal.
std::vector<std::uint8_t> render_shaded(const Model& m, const ViewFrame& frame, int size,
                                        double half_extent);

struct RayHit {
  double t = 0.0;
  Eigen::Index face = -1;
};

/// Bounding-volume hierarchy over a model's triangles for closest-hit queries.
class TriangleBvh {
public:
  explicit TriangleBvh(const Model& m);

  /// Closest intersection with t in (t_min, inf); direction need not be unit.
  std::optional<RayHit> closest_hit(const Vec3& origin, const Vec3& direction, double t_min) const;

private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };
  int build(int begin, int end);

  std::vector<Vec3> a_, b_, c_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
};

}  // namespace stylemetric
