#include "stylemetric/mesh_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "stylemetric/error.hpp"
#include "stylemetric/log.hpp"
#include "stylemetric/rng.hpp"

namespace stylemetric {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_index(const std::string& token, int vertex_count, const std::string& where) {
  const auto slash = token.find('/');
  const std::string head = token.substr(0, slash);
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw IoError("bad face index '" + token + "' in " + where);
  }
  if (idx < 0) idx = vertex_count + idx;
  else idx -= 1;
  if (idx < 0 || idx >= vertex_count) throw IoError("face index out of range in " + where);
  return idx;
}

struct MtlEntry {
  std::optional<Vec3> kd;
  std::string map_kd;
};

std::map<std::string, MtlEntry> parse_mtl(const std::filesystem::path& path) {
  std::map<std::string, MtlEntry> out;
  std::ifstream in(path);
  if (!in) {
    log_warning("cannot read material library " + path.string());
    return out;
  }
  std::string line, current;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "newmtl") {
      std::getline(ss, current);
      current = trim(current);
      out[current];
    } else if (key == "Kd" && !current.empty()) {
      double r = 0, g = 0, b = 0;
      if (ss >> r >> g >> b) out[current].kd = Vec3(r, g, b).cwiseMax(0.0).cwiseMin(1.0);
    } else if (key == "map_Kd" && !current.empty()) {
      // Options such as "-s 1 1 1" may precede the file name, which is last.
      std::string token, last;
      while (ss >> token) last = token;
      out[current].map_kd = last;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> Model::texture_refs() const {
  std::vector<std::string> ids;
  ids.reserve(textures.size());
  for (const auto& t : textures) ids.push_back(t.id);
  return ids;
}

Model make_model(std::string id, Vertices vertices, Faces faces, std::string object_type,
                 std::string cluster) {
  if (vertices.rows() < 3) throw GeometryError("model '" + id + "' has fewer than 3 vertices");
  if (faces.rows() < 1) throw GeometryError("model '" + id + "' has no faces");
  if (faces.minCoeff() < 0 || faces.maxCoeff() >= vertices.rows())
    throw GeometryError("model '" + id + "' has a face index out of range");
  Model m;
  m.id = std::move(id);
  m.object_type = std::move(object_type);
  m.cluster = cluster.empty() ? m.object_type : std::move(cluster);
  m.vertices = std::move(vertices);
  m.faces = std::move(faces);
  m.face_material.assign(static_cast<std::size_t>(m.faces.rows()), -1);
  return m;
}

Model load_model(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path.string());
  const auto dir = path.parent_path();

  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  std::vector<int> tri_material;
  std::map<std::string, MtlEntry> mtl;
  std::vector<std::string> material_names;
  std::unordered_map<std::string, int> material_index;
  int current_material = -1;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (key == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
        throw IoError("unparsable vertex at " + where);
      verts.emplace_back(x, y, z);
    } else if (key == "f") {
      std::vector<int> poly;
      std::string token;
      while (ss >> token) poly.push_back(parse_index(token, static_cast<int>(verts.size()), where));
      if (poly.size() < 3) throw IoError("face with fewer than 3 vertices at " + where);
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        tris.push_back({poly[0], poly[k], poly[k + 1]});
        tri_material.push_back(current_material);
      }
    } else if (key == "mtllib") {
      std::string rest;
      std::getline(ss, rest);
      auto entries = parse_mtl(dir / trim(rest));
      mtl.insert(entries.begin(), entries.end());
    } else if (key == "usemtl") {
      std::string name;
      std::getline(ss, name);
      name = trim(name);
      auto [it, inserted] = material_index.try_emplace(name, static_cast<int>(material_names.size()));
      if (inserted) material_names.push_back(name);
      current_material = it->second;
    }
  }

  Vertices V(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  Faces F(static_cast<Eigen::Index>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i)
    F.row(static_cast<Eigen::Index>(i)) << tris[i][0], tris[i][1], tris[i][2];

  LoadOptions opts = options;
  if (opts.id.empty()) opts.id = path.stem().string();
  if (opts.object_type.empty()) opts.object_type = dir.filename().string();
  Model m = make_model(opts.id, std::move(V), std::move(F), opts.object_type, opts.cluster);
  m.face_material = tri_material;

  std::map<std::string, int> texture_by_file;
  for (const auto& name : material_names) {
    Material mat;
    mat.name = name;
    if (auto it = mtl.find(name); it != mtl.end()) {
      mat.diffuse = it->second.kd;
      if (!it->second.map_kd.empty()) {
        const std::string& file = it->second.map_kd;
        if (auto t = texture_by_file.find(file); t != texture_by_file.end()) {
          mat.texture = t->second;
        } else {
          try {
            TextureImage tex;
            tex.id = file;
            tex.pixels = crop_and_resize(read_image(dir / file), kTextureSide);
            mat.texture = static_cast<int>(m.textures.size());
            texture_by_file[file] = mat.texture;
            m.textures.push_back(std::move(tex));
          } catch (const Error& e) {
            const std::string msg = "skipping texture for model '" + m.id + "': " + e.what();
            m.warnings.push_back(msg);
            log_warning(msg);
          }
        }
      }
    }
    m.materials.push_back(std::move(mat));
  }

  // Material colour: area-weighted Kd over faces carrying one.
  const Eigen::VectorXd areas = face_areas(m);
  Vec3 color_sum = Vec3::Zero();
  double color_weight = 0.0;
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const int mi = m.face_material[static_cast<std::size_t>(f)];
    if (mi < 0 || !m.materials[static_cast<std::size_t>(mi)].diffuse) continue;
    color_sum += areas(f) * *m.materials[static_cast<std::size_t>(mi)].diffuse;
    color_weight += areas(f);
  }
  if (color_weight > 0.0) m.material_color = color_sum / color_weight;
  return m;
}

Vec3 Axis::direction() const {
  Vec3 d = Vec3::Zero();
  d(index) = sign;
  return d;
}

Axis Axis::parse(const std::string& text) {
  std::string t = trim(text);
  int sign = 1;
  if (!t.empty() && (t[0] == '+' || t[0] == '-')) {
    sign = t[0] == '-' ? -1 : 1;
    t = t.substr(1);
  }
  if (t.size() != 1) throw InvalidArgument("bad axis '" + text + "'");
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t[0])));
  if (c < 'x' || c > 'z') throw InvalidArgument("bad axis '" + text + "'");
  return Axis{c - 'x', sign};
}

std::string Axis::to_string() const {
  return std::string(sign < 0 ? "-" : "+") + static_cast<char>('x' + index);
}

ProfileTable ProfileTable::parse(const std::string& json_text) {
  ProfileTable table;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad type profile: ") + e.what());
  }
  if (!j.is_object()) throw IoError("type profile must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "schema_version") continue;
    TypeProfile p;
    const auto& v = it.value();
    if (v.contains("up_axis")) p.up = Axis::parse(v.at("up_axis").get<std::string>());
    if (v.contains("front_axis")) p.front = Axis::parse(v.at("front_axis").get<std::string>());
    if (v.contains("target_extent")) p.target_extent = v.at("target_extent").get<double>();
    if (p.up.index == p.front.index) throw IoError("up and front axes coincide for '" + it.key() + "'");
    if (!(p.target_extent > 0.0)) throw IoError("target_extent must be positive for '" + it.key() + "'");
    table.set(it.key(), p);
  }
  return table;
}

ProfileTable ProfileTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open type profile: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const TypeProfile& ProfileTable::lookup(const std::string& object_type) const {
  if (auto it = profiles_.find(object_type); it != profiles_.end()) return it->second;
  return fallback_;
}

void ProfileTable::set(const std::string& object_type, const TypeProfile& profile) {
  if (object_type == "default") fallback_ = profile;
  else profiles_[object_type] = profile;
}

Eigen::VectorXd face_areas(const Model& m) {
  Eigen::VectorXd areas(m.face_count());
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const Vec3 a = m.vertex(m.faces(f, 0));
    const Vec3 b = m.vertex(m.faces(f, 1));
    const Vec3 c = m.vertex(m.faces(f, 2));
    areas(f) = 0.5 * (b - a).cross(c - a).norm();
  }
  return areas;
}

Vec3 surface_centroid(const Model& m) {
  const Eigen::VectorXd areas = face_areas(m);
  const double total = areas.sum();
  if (!(total > 0.0)) return m.vertices.colwise().mean().transpose();
  Vec3 c = Vec3::Zero();
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const Vec3 tri_c = (m.vertex(m.faces(f, 0)) + m.vertex(m.faces(f, 1)) + m.vertex(m.faces(f, 2))) / 3.0;
    c += areas(f) * tri_c;
  }
  return c / total;
}

Eigen::Vector3d bbox_min(const Model& m) { return m.vertices.colwise().minCoeff().transpose(); }
Eigen::Vector3d bbox_max(const Model& m) { return m.vertices.colwise().maxCoeff().transpose(); }

Model normalize(const Model& m, const TypeProfile& profile) {
  if (profile.up.index == profile.front.index) throw InvalidArgument("up and front axes coincide");
  const Vec3 up = profile.up.direction();
  const Vec3 front = profile.front.direction();
  Mat3 R;
  R.row(0) = up.cross(front).transpose();
  R.row(1) = up.transpose();
  R.row(2) = front.transpose();

  Model out = m;
  out.vertices = m.vertices * R.transpose();
  const Vec3 extent = bbox_max(out) - bbox_min(out);
  const double max_extent = extent.maxCoeff();
  if (!(max_extent > 0.0)) throw GeometryError("model '" + m.id + "' has zero extent");
  const Vec3 c = surface_centroid(out);
  const double s = profile.target_extent / max_extent;
  out.vertices = ((out.vertices.rowwise() - c.transpose()) * s).eval();
  return out;
}

PointSample sample_surface(const Model& m, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample_surface needs n >= 1");
  const Eigen::VectorXd areas = face_areas(m);
  std::vector<double> cdf(static_cast<std::size_t>(areas.size()));
  double acc = 0.0;
  for (Eigen::Index f = 0; f < areas.size(); ++f) {
    acc += areas(f);
    cdf[static_cast<std::size_t>(f)] = acc;
  }
  if (!(acc > 0.0)) throw GeometryError("model '" + m.id + "' has zero surface area");

  PointSample s;
  s.seed = seed;
  s.points.resize(static_cast<Eigen::Index>(n), 3);
  s.normals.resize(static_cast<Eigen::Index>(n), 3);
  s.face_index.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    const auto f = static_cast<Eigen::Index>(it - cdf.begin());
    const Vec3 a = m.vertex(m.faces(f, 0));
    const Vec3 b = m.vertex(m.faces(f, 1));
    const Vec3 c = m.vertex(m.faces(f, 2));
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 p = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
    const auto row = static_cast<Eigen::Index>(i);
    s.points.row(row) = p.transpose();
    s.normals.row(row) = (b - a).cross(c - a).normalized().transpose();
    s.face_index[i] = static_cast<int>(f);
  }
  return s;
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool is_watertight(const Model& m) {
  std::map<std::pair<int, int>, int> edges;
  for (Eigen::Index f = 0; f < m.face_count(); ++f)
    for (int e = 0; e < 3; ++e) {
      int a = m.faces(f, e), b = m.faces(f, (e + 1) % 3);
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  return std::all_of(edges.begin(), edges.end(), [](const auto& kv) { return kv.second == 2; });
}

namespace {

// Separating-axis triangle/box overlap (Akenine-Moller). Box centred at the
// origin with the given half size; triangle already translated.
bool plane_box_overlap(const Vec3& normal, const Vec3& vert, const Vec3& half) {
  Vec3 vmin, vmax;
  for (int q = 0; q < 3; ++q) {
    if (normal(q) > 0.0) {
      vmin(q) = -half(q) - vert(q);
      vmax(q) = half(q) - vert(q);
    } else {
      vmin(q) = half(q) - vert(q);
      vmax(q) = -half(q) - vert(q);
    }
  }
  if (normal.dot(vmin) > 0.0) return false;
  return normal.dot(vmax) >= 0.0;
}

bool tri_box_overlap(const Vec3& c, const Vec3& half, const Vec3& a0, const Vec3& b0, const Vec3& c0) {
  const Vec3 v0 = a0 - c, v1 = b0 - c, v2 = c0 - c;
  const std::array<Vec3, 3> v{v0, v1, v2};
  const std::array<Vec3, 3> e{v1 - v0, v2 - v1, v0 - v2};
  for (int i = 0; i < 3; ++i) {      // edge
    for (int ax = 0; ax < 3; ++ax) {  // box axis
      const Vec3 axis = Vec3::Unit(ax).cross(e[i]);
      double pmin = axis.dot(v[0]), pmax = pmin;
      for (int k = 1; k < 3; ++k) {
        const double p = axis.dot(v[k]);
        pmin = std::min(pmin, p);
        pmax = std::max(pmax, p);
      }
      const double r = half(0) * std::abs(axis(0)) + half(1) * std::abs(axis(1)) + half(2) * std::abs(axis(2));
      if (pmin > r || pmax < -r) return false;
    }
  }
  for (int ax = 0; ax < 3; ++ax) {
    const double mn = std::min({v0(ax), v1(ax), v2(ax)});
    const double mx = std::max({v0(ax), v1(ax), v2(ax)});
    if (mn > half(ax) || mx < -half(ax)) return false;
  }
  const Vec3 normal = e[0].cross(e[1]);
  return plane_box_overlap(normal, v0, half);
}

// Signed edge function of p against the directed edge u->v, evaluated with
// the endpoints in a fixed order so both triangles sharing an edge see
// bitwise-opposite values.
double edge_fn(const Vec3& u, const Vec3& v, double px, double py) {
  const bool swap = v(0) < u(0) || (v(0) == u(0) && v(1) < u(1));
  const Vec3& s = swap ? v : u;
  const Vec3& t = swap ? u : v;
  const double e = (t(0) - s(0)) * (py - s(1)) - (t(1) - s(1)) * (px - s(0));
  return swap ? -e : e;
}

// Top-left fill rule for a counter-clockwise triangle: a point exactly on an
// edge belongs to the triangle only for left edges and top edges.
bool owns_edge(const Vec3& u, const Vec3& v) {
  const double dy = v(1) - u(1);
  return dy < 0.0 || (dy == 0.0 && v(0) < u(0));
}

// Height of the triangle above (px, py) when the column hits it.
std::optional<double> column_hit(Vec3 a, Vec3 b, Vec3 c, double px, double py) {
  double area = (b(0) - a(0)) * (c(1) - a(1)) - (c(0) - a(0)) * (b(1) - a(1));
  if (area == 0.0) return std::nullopt;
  if (area < 0.0) {
    std::swap(b, c);
    area = -area;
  }
  const double ea = edge_fn(b, c, px, py), eb = edge_fn(c, a, px, py), ec = edge_fn(a, b, px, py);
  if (ea < 0.0 || eb < 0.0 || ec < 0.0) return std::nullopt;
  if ((ea == 0.0 && !owns_edge(b, c)) || (eb == 0.0 && !owns_edge(c, a)) || (ec == 0.0 && !owns_edge(a, b)))
    return std::nullopt;
  const double sum = ea + eb + ec;
  return (ea * a(2) + eb * b(2) + ec * c(2)) / sum;
}

}  // namespace

VoxelGrid voxelize(const Model& m, int resolution) {
  if (resolution < 8) throw GeometryError("voxel resolution " + std::to_string(resolution) +
                                          " is too small to separate the model from the border");
  const Vec3 lo = bbox_min(m), hi = bbox_max(m);
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw GeometryError("model '" + m.id + "' has zero extent");

  VoxelGrid g(resolution);
  g.cell = extent / (resolution - 4);
  g.origin = 0.5 * (lo + hi) - Vec3::Constant(g.cell * resolution * 0.5);

  // Work in grid units: voxel (i,j,k) spans [i, i+1) x [j, j+1) x [k, k+1).
  const Vertices gv = ((m.vertices.rowwise() - g.origin.transpose()) / g.cell).eval();
  const Vec3 half = Vec3::Constant(0.5);
  const int R = resolution;
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const Vec3 a = gv.row(m.faces(f, 0)).transpose();
    const Vec3 b = gv.row(m.faces(f, 1)).transpose();
    const Vec3 c = gv.row(m.faces(f, 2)).transpose();
    const Vec3 tmin = a.cwiseMin(b).cwiseMin(c);
    const Vec3 tmax = a.cwiseMax(b).cwiseMax(c);
    std::array<int, 3> i0{}, i1{};
    for (int q = 0; q < 3; ++q) {
      i0[q] = std::clamp(static_cast<int>(std::floor(tmin(q))) - 1, 0, R - 1);
      i1[q] = std::clamp(static_cast<int>(std::floor(tmax(q))) + 1, 0, R - 1);
    }
    for (int i = i0[0]; i <= i1[0]; ++i)
      for (int j = i0[1]; j <= i1[1]; ++j)
        for (int k = i0[2]; k <= i1[2]; ++k) {
          if (g.at(i, j, k)) continue;
          if (tri_box_overlap(Vec3(i + 0.5, j + 0.5, k + 0.5), half, a, b, c)) g.at(i, j, k) = 1;
        }
  }

  if (!is_watertight(m)) {
    log_warning("model '" + m.id + "' is not watertight; using surface-only voxel occupancy");
    return g;
  }

  // Scanline parity along z through the column centres.
  std::vector<std::vector<Eigen::Index>> buckets(static_cast<std::size_t>(R) * R);
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const Vec3 a = gv.row(m.faces(f, 0)).transpose();
    const Vec3 b = gv.row(m.faces(f, 1)).transpose();
    const Vec3 c = gv.row(m.faces(f, 2)).transpose();
    const int x0 = std::clamp(static_cast<int>(std::floor(std::min({a(0), b(0), c(0)}) - 0.5)), 0, R - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(std::max({a(0), b(0), c(0)}) - 0.5)), 0, R - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(std::min({a(1), b(1), c(1)}) - 0.5)), 0, R - 1);
    const int y1 = std::clamp(static_cast<int>(std::ceil(std::max({a(1), b(1), c(1)}) - 0.5)), 0, R - 1);
    for (int i = x0; i <= x1; ++i)
      for (int j = y0; j <= y1; ++j) buckets[static_cast<std::size_t>(i) * R + j].push_back(f);
  }
  std::size_t odd_columns = 0;
  std::vector<double> hits;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j) {
      const auto& bucket = buckets[static_cast<std::size_t>(i) * R + j];
      if (bucket.empty()) continue;
      const double px = i + 0.5, py = j + 0.5;
      hits.clear();
      for (Eigen::Index f : bucket) {
        const auto z = column_hit(gv.row(m.faces(f, 0)).transpose(), gv.row(m.faces(f, 1)).transpose(),
                                  gv.row(m.faces(f, 2)).transpose(), px, py);
        if (z) hits.push_back(*z);
      }
      if (hits.size() % 2 != 0) {
        ++odd_columns;
        continue;
      }
      std::sort(hits.begin(), hits.end());
      for (std::size_t h = 0; h + 1 < hits.size(); h += 2) {
        const int k0 = std::max(0, static_cast<int>(std::ceil(hits[h] - 0.5)));
        const int k1 = std::min(R - 1, static_cast<int>(std::floor(hits[h + 1] - 0.5)));
        for (int k = k0; k <= k1; ++k) g.at(i, j, k) = 1;
      }
    }
  if (odd_columns > 0)
    log_warning("model '" + m.id + "': " + std::to_string(odd_columns) + " voxel columns had odd parity");
  g.solid = true;
  return g;
}

std::array<Silhouette, 3> project_silhouettes(const VoxelGrid& g) {
  const int R = g.resolution;
  std::array<Silhouette, 3> sils;
  for (int a = 0; a < 3; ++a) {
    sils[a].axis = a;
    sils[a].mask = Mask(R, R);
  }
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j)
      for (int k = 0; k < R; ++k) {
        if (!g.at(i, j, k)) continue;
        sils[0].mask.at(j, k) = 1;
        sils[1].mask.at(i, k) = 1;
        sils[2].mask.at(i, j) = 1;
      }
  return sils;
}

}  // namespace stylemetric
