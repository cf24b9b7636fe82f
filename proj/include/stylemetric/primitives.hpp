#pragma once

#include <string>
#include <vector>

#include "stylemetric/mesh_io.hpp"

namespace stylemetric {

/// Closed axis-aligned box, 12 outward-facing triangles.
Model make_box(const Vec3& center, const Vec3& size, std::string id = "box");

/// Icosahedron subdivided `levels` times and projected onto the sphere.
/// Keeps the full icosahedral symmetry of the base solid.
Model make_icosphere(double radius, int levels, std::string id = "sphere");

/// Closed cylinder along +Y with `segments` sides and capped ends.
Model make_cylinder(double radius, double height, int segments, std::string id = "cylinder",
                    const Vec3& center = Vec3::Zero());

/// Flat square patch in the z = 0 plane split into n x n quads (2n^2 triangles).
Model make_grid_patch(int n, double side = 1.0, std::string id = "patch");

/// Concatenates meshes; per-face materials are preserved with offsets.
Model merge_models(const std::vector<Model>& parts, std::string id);

/// Applies v -> R v + t to every vertex.
Model transformed(const Model& m, const Mat3& R, const Vec3& t = Vec3::Zero());

/// Writes geometry as OBJ. A usemtl line is emitted whenever face_materials changes.
void write_obj(const std::filesystem::path& path, const Model& m, const std::string& mtllib = "",
               const std::vector<std::string>& face_materials = {});

}  // namespace stylemetric
