#include "stylemetric/primitives.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "stylemetric/error.hpp"

namespace stylemetric {

Model make_box(const Vec3& center, const Vec3& size, std::string id) {
  Vertices V(8, 3);
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5);
    V.row(i) = (center + corner.cwiseProduct(size)).transpose();
  }
  Faces F(12, 3);
  // Outward winding: -x, +x, -y, +y, -z, +z.
  F << 0, 4, 6, 0, 6, 2,  //
      1, 3, 7, 1, 7, 5,   //
      0, 1, 5, 0, 5, 4,   //
      2, 6, 7, 2, 7, 3,   //
      0, 2, 3, 0, 3, 1,   //
      4, 5, 7, 4, 7, 6;
  return make_model(std::move(id), std::move(V), std::move(F));
}

Model make_icosphere(double radius, int levels, std::string id) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                             {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                             {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& v : verts) v.normalize();
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  Vertices V(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i)
    V.row(static_cast<Eigen::Index>(i)) = (radius * verts[i]).transpose();
  Faces F(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i)
    F.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
  return make_model(std::move(id), std::move(V), std::move(F));
}

Model make_cylinder(double radius, double height, int segments, std::string id, const Vec3& center) {
  if (segments < 3) throw InvalidArgument("cylinder needs at least 3 segments");
  const int n = segments;
  Vertices V(2 * n + 2, 3);
  for (int s = 0; s < n; ++s) {
    const double t = 2.0 * std::numbers::pi * s / n;
    const double x = radius * std::cos(t), z = radius * std::sin(t);
    V.row(s) << x, -0.5 * height, z;
    V.row(n + s) << x, 0.5 * height, z;
  }
  V.row(2 * n) << 0, -0.5 * height, 0;
  V.row(2 * n + 1) << 0, 0.5 * height, 0;
  V.rowwise() += center.transpose();
  Faces F(4 * n, 3);
  for (int s = 0; s < n; ++s) {
    const int s1 = (s + 1) % n;
    F.row(4 * s + 0) << s, n + s, n + s1;
    F.row(4 * s + 1) << s, n + s1, s1;
    F.row(4 * s + 2) << 2 * n, s, s1;
    F.row(4 * s + 3) << 2 * n + 1, n + s1, n + s;
  }
  return make_model(std::move(id), std::move(V), std::move(F));
}

Model make_grid_patch(int n, double side, std::string id) {
  Vertices V((n + 1) * (n + 1), 3);
  for (int y = 0; y <= n; ++y)
    for (int x = 0; x <= n; ++x) V.row(y * (n + 1) + x) << side * x / n, side * y / n, 0.0;
  Faces F(2 * n * n, 3);
  int f = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const int v0 = y * (n + 1) + x, v1 = v0 + 1, v2 = v0 + n + 2, v3 = v0 + n + 1;
      F.row(f++) << v0, v1, v2;
      F.row(f++) << v0, v2, v3;
    }
  return make_model(std::move(id), std::move(V), std::move(F));
}

Model merge_models(const std::vector<Model>& parts, std::string id) {
  if (parts.empty()) throw InvalidArgument("merge_models needs at least one part");
  Eigen::Index nv = 0, nf = 0;
  for (const auto& p : parts) {
    nv += p.vertex_count();
    nf += p.face_count();
  }
  Vertices V(nv, 3);
  Faces F(nf, 3);
  Eigen::Index ov = 0, of = 0;
  for (const auto& p : parts) {
    V.middleRows(ov, p.vertex_count()) = p.vertices;
    F.middleRows(of, p.face_count()) = p.faces.array() + static_cast<int>(ov);
    ov += p.vertex_count();
    of += p.face_count();
  }
  Model m = make_model(std::move(id), std::move(V), std::move(F), parts.front().object_type,
                       parts.front().cluster);
  return m;
}

Model transformed(const Model& m, const Mat3& R, const Vec3& t) {
  Model out = m;
  out.vertices = (m.vertices * R.transpose()).rowwise() + t.transpose();
  return out;
}

void write_obj(const std::filesystem::path& path, const Model& m, const std::string& mtllib,
               const std::vector<std::string>& face_materials) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  if (!mtllib.empty()) out << "mtllib " << mtllib << '\n';
  for (Eigen::Index v = 0; v < m.vertex_count(); ++v)
    out << "v " << m.vertices(v, 0) << ' ' << m.vertices(v, 1) << ' ' << m.vertices(v, 2) << '\n';
  std::string current;
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    if (static_cast<std::size_t>(f) < face_materials.size() && face_materials[f] != current) {
      current = face_materials[f];
      out << "usemtl " << current << '\n';
    }
    out << "f " << m.faces(f, 0) + 1 << ' ' << m.faces(f, 1) + 1 << ' ' << m.faces(f, 2) + 1 << '\n';
  }
}

}  // namespace stylemetric
