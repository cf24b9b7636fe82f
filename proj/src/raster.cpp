#include "stylemetric/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace stylemetric {
namespace {

template <typename Plot>
void rasterize(const Model& m, const ViewFrame& frame, int size, double half_extent, Plot&& plot) {
  const double scale = 0.5 * size / half_extent;
  std::vector<Eigen::Vector2d> proj(static_cast<std::size_t>(m.vertex_count()));
  std::vector<double> depth(proj.size());
  for (Eigen::Index v = 0; v < m.vertex_count(); ++v) {
    const Vec3 p = m.vertex(v);
    proj[v] = Eigen::Vector2d(p.dot(frame.right) * scale + 0.5 * size, 0.5 * size - p.dot(frame.up) * scale);
    depth[v] = p.dot(frame.toward);
  }
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const auto& p0 = proj[m.faces(f, 0)];
    const auto& p1 = proj[m.faces(f, 1)];
    const auto& p2 = proj[m.faces(f, 2)];
    const double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    if (area == 0.0) continue;
    const double sgn = area > 0 ? 1.0 : -1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
    const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
    const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}) - 0.5)));
    auto edge = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b, double x, double y) {
      return (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
    };
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double cx = x + 0.5, cy = y + 0.5;
        const double e0 = sgn * edge(p1, p2, cx, cy);
        const double e1 = sgn * edge(p2, p0, cx, cy);
        const double e2 = sgn * edge(p0, p1, cx, cy);
        if (e0 < 0 || e1 < 0 || e2 < 0) continue;
        const double w = std::abs(area);
        const double z = (e0 * depth[m.faces(f, 0)] + e1 * depth[m.faces(f, 1)] + e2 * depth[m.faces(f, 2)]) / w;
        plot(x, y, z, f);
      }
  }
}

}  // namespace

Mask render_silhouette(const Model& m, const ViewFrame& frame, int size, double half_extent) {
  Mask mask(size, size);
  rasterize(m, frame, size, half_extent, [&](int x, int y, double, Eigen::Index) { mask.at(x, y) = 1; });
  return mask;
}

std::vector<std::uint8_t> render_shaded(const Model& m, const ViewFrame& frame, int size, double half_extent) {
  std::vector<std::uint8_t> img(static_cast<std::size_t>(size) * size, 255);
  std::vector<double> zbuf(img.size(), -std::numeric_limits<double>::infinity());
  const Vec3 light = (frame.toward + 0.5 * frame.up + 0.3 * frame.right).normalized();
  rasterize(m, frame, size, half_extent, [&](int x, int y, double z, Eigen::Index f) {
    const std::size_t idx = static_cast<std::size_t>(y) * size + x;
    if (z <= zbuf[idx]) return;
    zbuf[idx] = z;
    const Vec3 a = m.vertex(m.faces(f, 0)), b = m.vertex(m.faces(f, 1)), c = m.vertex(m.faces(f, 2));
    const Vec3 cr = (b - a).cross(c - a);
    const double len = cr.norm();
    const double shade = len > 0 ? 0.25 + 0.65 * std::abs(cr.dot(light)) / len : 0.5;
    img[idx] = static_cast<std::uint8_t>(std::clamp(shade * 255.0, 0.0, 255.0));
  });
  return img;
}

TriangleBvh::TriangleBvh(const Model& m) {
  const auto nf = static_cast<std::size_t>(m.face_count());
  a_.resize(nf);
  b_.resize(nf);
  c_.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    a_[f] = m.vertex(m.faces(static_cast<Eigen::Index>(f), 0));
    b_[f] = m.vertex(m.faces(static_cast<Eigen::Index>(f), 1));
    c_[f] = m.vertex(m.faces(static_cast<Eigen::Index>(f), 2));
  }
  order_.resize(nf);
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  nodes_.reserve(2 * nf + 1);
  if (nf > 0) build(0, static_cast<int>(nf));
}

int TriangleBvh::build(int begin, int end) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    const auto f = static_cast<std::size_t>(order_[i]);
    node.lo = node.lo.cwiseMin(a_[f]).cwiseMin(b_[f]).cwiseMin(c_[f]);
    node.hi = node.hi.cwiseMax(a_[f]).cwiseMax(b_[f]).cwiseMax(c_[f]);
  }
  node.begin = begin;
  node.end = end;
  const int idx = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 4) return idx;

  int axis;
  (node.hi - node.lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  auto centroid = [&](Eigen::Index f) {
    const auto s = static_cast<std::size_t>(f);
    return a_[s](axis) + b_[s](axis) + c_[s](axis);
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Eigen::Index x, Eigen::Index y) { return centroid(x) < centroid(y); });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[idx].left = left;
  nodes_[idx].right = right;
  return idx;
}

std::optional<RayHit> TriangleBvh::closest_hit(const Vec3& origin, const Vec3& direction, double t_min) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv = direction.cwiseInverse();
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_face = -1;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    double t0 = t_min, t1 = best;
    bool miss = false;
    for (int q = 0; q < 3 && !miss; ++q) {
      double ta = (n.lo(q) - origin(q)) * inv(q);
      double tb = (n.hi(q) - origin(q)) * inv(q);
      if (std::isnan(ta) || std::isnan(tb)) continue;  // parallel ray on a slab face
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) miss = true;
    }
    if (miss) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const auto f = static_cast<std::size_t>(order_[i]);
        const Vec3 e1 = b_[f] - a_[f], e2 = c_[f] - a_[f];
        const Vec3 p = direction.cross(e2);
        const double det = e1.dot(p);
        if (std::abs(det) < 1e-300) continue;
        const double inv_det = 1.0 / det;
        const Vec3 s = origin - a_[f];
        const double u = s.dot(p) * inv_det;
        if (u < 0.0 || u > 1.0) continue;
        const Vec3 q = s.cross(e1);
        const double v = direction.dot(q) * inv_det;
        if (v < 0.0 || u + v > 1.0) continue;
        const double t = e2.dot(q) * inv_det;
        if (t > t_min && t < best) {
          best = t;
          best_face = order_[i];
        }
      }
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  if (best_face < 0) return std::nullopt;
  return RayHit{best, best_face};
}

}  // namespace stylemetric
