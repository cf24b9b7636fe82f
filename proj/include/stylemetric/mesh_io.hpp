#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "stylemetric/image_io.hpp"

namespace stylemetric {

using Scalar = double;
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
using Vertices = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline constexpr int kTextureSide = 512;
inline constexpr int kDefaultVoxelResolution = 300;

struct TextureImage {
  std::string id;
  RgbImage pixels;  // kTextureSide x kTextureSide after ingestion
};

struct Material {
  std::string name;
  std::optional<Vec3> diffuse;  // Kd in [0,1]^3
  int texture = -1;             // index into Model::textures
};

struct Model {
  std::string id;
  std::string object_type;
  std::string cluster;
  Vertices vertices;
  Faces faces;
  std::vector<TextureImage> textures;
  std::vector<Material> materials;
  std::vector<int> face_material;  // per face, -1 when unassigned
  std::optional<Vec3> material_color;
  std::vector<std::string> warnings;

  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index face_count() const { return faces.rows(); }
  std::vector<std::string> texture_refs() const;
  Vec3 vertex(Eigen::Index i) const { return vertices.row(i).transpose(); }
};

struct LoadOptions {
  std::string id;           // defaults to the file stem
  std::string object_type;  // defaults to the parent directory name
  std::string cluster;      // defaults to object_type
};

/// Loads an OBJ mesh together with its MTL materials and image textures.
/// Polygons are fan-triangulated from their first vertex, so quads split
/// along (v0, v2). An unreadable texture is a warning, not an error.
Model load_model(const std::filesystem::path& path, const LoadOptions& options = {});

/// Builds a model directly from geometry; validates indices.
Model make_model(std::string id, Vertices vertices, Faces faces, std::string object_type = "",
                 std::string cluster = "");

/// Signed axis such as +Y or -Z.
struct Axis {
  int index = 1;
  int sign = 1;
  Vec3 direction() const;
  static Axis parse(const std::string& text);
  std::string to_string() const;
  friend bool operator==(const Axis&, const Axis&) = default;
};

struct TypeProfile {
  Axis up{1, 1};
  Axis front{2, 1};
  double target_extent = 1.0;
};

/// object_type -> TypeProfile, with a "default" entry used for unknown types.
class ProfileTable {
public:
  ProfileTable() = default;
  static ProfileTable load(const std::filesystem::path& path);
  static ProfileTable parse(const std::string& json_text);

  const TypeProfile& lookup(const std::string& object_type) const;
  void set(const std::string& object_type, const TypeProfile& profile);

private:
  std::map<std::string, TypeProfile> profiles_;
  TypeProfile fallback_;
};

/// Area-weighted surface centroid.
Vec3 surface_centroid(const Model& m);
/// Per-face areas.
Eigen::VectorXd face_areas(const Model& m);
Eigen::Vector3d bbox_min(const Model& m);
Eigen::Vector3d bbox_max(const Model& m);

/// Rotates up/front onto +Y/+Z, moves the surface centroid to the origin and
/// scales the largest bounding-box extent to the profile target.
Model normalize(const Model& m, const TypeProfile& profile);

struct PointSample {
  Points points;
  Points normals;
  std::vector<int> face_index;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return points.rows(); }
};

/// n area-weighted uniform surface points with their face normals.
PointSample sample_surface(const Model& m, std::size_t n, std::uint64_t seed);

struct VoxelGrid {
  int resolution = 0;
  Vec3 origin = Vec3::Zero();
  double cell = 0.0;
  bool solid = false;  // interior filled by scanline parity
  std::vector<std::uint8_t> occupancy;

  VoxelGrid() = default;
  explicit VoxelGrid(int res)
      : resolution(res), occupancy(static_cast<std::size_t>(res) * res * res, 0) {}

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * resolution + j) * resolution + k;
  }
  std::uint8_t at(int i, int j, int k) const { return occupancy[index(i, j, k)]; }
  std::uint8_t& at(int i, int j, int k) { return occupancy[index(i, j, k)]; }
  std::size_t occupied_count() const;
};

/// Surface voxelization (triangle/box overlap) plus interior fill along z
/// for watertight meshes. The model bounding box lands inside the grid
/// with an empty border.
VoxelGrid voxelize(const Model& m, int resolution = kDefaultVoxelResolution);

/// True when every undirected edge has exactly two incident faces.
bool is_watertight(const Model& m);

/// Binary 2D raster stored row by row: bits[v * width + u].
struct Mask {
  int width = 0;   // extent of the u coordinate
  int height = 0;  // extent of the v coordinate
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}
  std::uint8_t at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t& at(int u, int v) { return bits[static_cast<std::size_t>(v) * width + u]; }
  std::size_t count() const;
  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Projection of the voxel grid along one axis. For axis x the mask
/// coordinates are (u, v) = (j, k); for y (i, k); for z (i, j).
struct Silhouette {
  int axis = 0;
  Mask mask;
};

std::array<Silhouette, 3> project_silhouettes(const VoxelGrid& g);

}  // namespace stylemetric
