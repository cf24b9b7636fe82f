#include "stylemetric/geometry_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <Eigen/Geometry>

#include "stylemetric/error.hpp"
#include "stylemetric/histogram.hpp"
#include "stylemetric/log.hpp"
#include "stylemetric/rng.hpp"
#include "stylemetric/shape2d.hpp"

namespace stylemetric {

int RangedHistogram::bin_of(double v) const {
  return uniform_bin(v, lo, hi, static_cast<int>(mass.size()));
}

double RangedHistogram::bin_center(int b) const {
  return lo + (b + 0.5) * (hi - lo) / static_cast<double>(mass.size());
}

double RangedHistogram::mass_between(double a, double b) const {
  double total = 0.0;
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    const double c = bin_center(static_cast<int>(i));
    if (c >= a && c <= b) total += mass(i);
  }
  return total;
}

// ---------------------------------------------------------------- D2

double shape_distribution_range(const PointSample& s) {
  if (s.size() == 0) return 0.0;
  const Eigen::RowVector3d c = s.points.colwise().mean();
  return 2.0 * (s.points.rowwise() - c).rowwise().norm().maxCoeff();
}

Eigen::VectorXd compute_shape_distribution(const PointSample& s, const FeatureConfig& cfg) {
  if (s.size() < 2) throw InvalidArgument("shape distribution needs at least 2 points");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.d2_bins);
  const double dmax = shape_distribution_range(s);
  const auto n = static_cast<std::uint64_t>(s.size());
  Rng rng(mix_seed(s.seed, hash_string("d2")));
  for (int p = 0; p < cfg.d2_pairs; ++p) {
    const auto i = static_cast<Eigen::Index>(rng.below(n));
    auto j = static_cast<Eigen::Index>(rng.below(n - 1));
    if (j >= i) ++j;
    const double d = (s.points.row(i) - s.points.row(j)).norm();
    h(uniform_bin(d, 0.0, dmax, cfg.d2_bins)) += 1.0;
  }
  l1_normalize(h);
  return h;
}

// ---------------------------------------------------------- curvature

namespace {

double cot(const Vec3& u, const Vec3& v) {
  const double s = u.cross(v).norm();
  return s > 0.0 ? u.dot(v) / s : 0.0;
}

}  // namespace

VertexCurvatures compute_vertex_curvatures(const Model& m) {
  const auto nv = m.vertex_count();
  VertexCurvatures out;
  out.gauss = Eigen::VectorXd::Zero(nv);
  out.mean = Eigen::VectorXd::Zero(nv);
  out.kmax = Eigen::VectorXd::Zero(nv);
  out.kmin = Eigen::VectorXd::Zero(nv);
  out.valid.assign(static_cast<std::size_t>(nv), true);

  Eigen::VectorXd angle_sum = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd area = Eigen::VectorXd::Zero(nv);
  Vertices laplace = Vertices::Zero(nv, 3);
  Vertices normal = Vertices::Zero(nv, 3);
  std::vector<int> valence(static_cast<std::size_t>(nv), 0);
  std::map<std::pair<int, int>, int> edges;

  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const std::array<int, 3> idx{m.faces(f, 0), m.faces(f, 1), m.faces(f, 2)};
    const std::array<Vec3, 3> p{m.vertex(idx[0]), m.vertex(idx[1]), m.vertex(idx[2])};
    const Vec3 fn = (p[1] - p[0]).cross(p[2] - p[0]);
    const double tri_area = 0.5 * fn.norm();
    for (int e = 0; e < 3; ++e) ++edges[std::minmax(idx[e], idx[(e + 1) % 3])];
    if (!(tri_area > 0.0)) continue;
    std::array<double, 3> ang{}, cots{};
    for (int c = 0; c < 3; ++c) {
      const Vec3 u = p[(c + 1) % 3] - p[c];
      const Vec3 v = p[(c + 2) % 3] - p[c];
      ang[c] = std::atan2(u.cross(v).norm(), u.dot(v));
      cots[c] = cot(u, v);
    }
    const bool obtuse = ang[0] > std::numbers::pi / 2 || ang[1] > std::numbers::pi / 2 ||
                        ang[2] > std::numbers::pi / 2;
    for (int c = 0; c < 3; ++c) {
      const int i = idx[c], j = idx[(c + 1) % 3], k = idx[(c + 2) % 3];
      ++valence[static_cast<std::size_t>(i)];
      angle_sum(i) += ang[c];
      normal.row(i) += fn.transpose();
      if (!obtuse) {
        // Voronoi region: edges from i weighted by the cotangent of the opposite angle.
        area(i) += ((p[(c + 1) % 3] - p[c]).squaredNorm() * cots[(c + 2) % 3] +
                    (p[(c + 2) % 3] - p[c]).squaredNorm() * cots[(c + 1) % 3]) /
                   8.0;
      } else {
        area(i) += ang[c] > std::numbers::pi / 2 ? tri_area / 2.0 : tri_area / 4.0;
      }
      // Edge (j, k) is opposite corner c.
      const double w = cots[c];
      laplace.row(j) += (w * (m.vertex(k) - m.vertex(j))).transpose();
      laplace.row(k) += (w * (m.vertex(j) - m.vertex(k))).transpose();
    }
  }
  std::vector<bool> boundary(static_cast<std::size_t>(nv), false);
  for (const auto& [e, count] : edges)
    if (count == 1) boundary[static_cast<std::size_t>(e.first)] = boundary[static_cast<std::size_t>(e.second)] = true;

  for (Eigen::Index v = 0; v < nv; ++v) {
    const auto vs = static_cast<std::size_t>(v);
    if (valence[vs] == 0) {
      ++out.isolated;
      out.valid[vs] = false;
      continue;
    }
    if (boundary[vs] || !(area(v) > 0.0)) {
      out.valid[vs] = false;
      continue;
    }
    const double K = (2.0 * std::numbers::pi - angle_sum(v)) / area(v);
    const Vec3 mean_normal = laplace.row(v).transpose() / (2.0 * area(v));
    const Vec3 n = normal.row(v).transpose().normalized();
    // Laplacian of position is -2 H n.
    const double H = -0.5 * mean_normal.dot(n);
    const double disc = std::sqrt(std::max(H * H - K, 0.0));
    out.gauss(v) = K;
    out.mean(v) = H;
    out.kmax(v) = H + disc;
    out.kmin(v) = H - disc;
  }
  return out;
}

namespace {

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

RangedHistogram robust_histogram(const std::vector<double>& values, int bins, double low_pct, double high_pct) {
  RangedHistogram h;
  h.mass = Eigen::VectorXd::Zero(bins);
  if (values.empty()) return h;
  h.lo = percentile(values, low_pct);
  h.hi = percentile(values, high_pct);
  const double min_width = 1e-6 * std::max({1.0, std::abs(h.lo), std::abs(h.hi)});
  if (h.hi - h.lo < min_width) {
    // degenerate range: centre one bin on the common value
    const double mid = 0.5 * (h.lo + h.hi);
    const double w = min_width / bins;
    h.lo = mid - (bins / 2 + 0.5) * w;
    h.hi = h.lo + bins * w;
  }
  for (double v : values) h.mass(h.bin_of(std::clamp(v, h.lo, h.hi))) += 1.0;
  l1_normalize(h.mass);
  return h;
}

CurvatureHistograms compute_curvature_histograms(const Model& m, const FeatureConfig& cfg) {
  const VertexCurvatures k = compute_vertex_curvatures(m);
  if (k.isolated > 0)
    log_warning("model '" + m.id + "': skipped " + std::to_string(k.isolated) + " isolated vertices");
  std::array<std::vector<double>, 4> vals;
  for (Eigen::Index v = 0; v < m.vertex_count(); ++v) {
    if (!k.valid[static_cast<std::size_t>(v)]) continue;
    vals[0].push_back(k.gauss(v));
    vals[1].push_back(k.mean(v));
    vals[2].push_back(k.kmax(v));
    vals[3].push_back(k.kmin(v));
  }
  const double lo = cfg.curvature_low_percentile, hi = cfg.curvature_high_percentile;
  return {robust_histogram(vals[0], cfg.curvature_bins, lo, hi), robust_histogram(vals[1], cfg.curvature_bins, lo, hi),
          robust_histogram(vals[2], cfg.curvature_bins, lo, hi), robust_histogram(vals[3], cfg.curvature_bins, lo, hi)};
}

// ------------------------------------------------------ shape diameter

std::vector<ConeRay> sdf_cone(const Vec3& normal, const FeatureConfig& cfg, const Vec3& spin_hint) {
  const Vec3 axis = -normal.normalized();
  Vec3 t = spin_hint - spin_hint.dot(axis) * axis;
  if (!(t.norm() > 1e-6 * spin_hint.norm())) {
    const Vec3 helper = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    t = axis.cross(helper);
  }
  t.normalize();
  const Vec3 b = axis.cross(t);
  const double half = 0.5 * cfg.sdf_cone_degrees * std::numbers::pi / 180.0;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const int n = cfg.sdf_rays;
  std::vector<ConeRay> rays;
  rays.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double cos_theta = 1.0 - (i + 0.5) / n * (1.0 - std::cos(half));
    const double theta = std::acos(cos_theta);
    const double phi = golden * i;
    const double sin_theta = std::sin(theta);
    const Vec3 d = cos_theta * axis + sin_theta * (std::cos(phi) * t + std::sin(phi) * b);
    rays.push_back({d.normalized(), 1.0 / theta});
  }
  return rays;
}

double weighted_median(std::vector<double> values, std::vector<double> weights) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double acc = 0.0;
  for (std::size_t i : order) {
    acc += weights[i];
    if (acc >= 0.5 * total) return values[i];
  }
  return values[order.back()];
}

ShapeDiameter compute_shape_diameter(const Model& m, const PointSample& s, const FeatureConfig& cfg) {
  const TriangleBvh bvh(m);
  const double extent = (bbox_max(m) - bbox_min(m)).maxCoeff();
  const double t_min = 1e-7 * extent;
  const Eigen::Index n = std::min<Eigen::Index>(s.size(), cfg.sdf_samples);
  const Vec3 centre = surface_centroid(m);
  ShapeDiameter out;
  out.per_sample.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
  std::size_t rays_cast = 0, rays_hit = 0;
  std::vector<double> lengths, weights;
  std::vector<double> hist_values;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = s.points.row(i).transpose();
    const Vec3 nrm = s.normals.row(i).transpose();
    lengths.clear();
    weights.clear();
    for (const ConeRay& ray : sdf_cone(nrm, cfg, centre - p)) {
      ++rays_cast;
      if (auto hit = bvh.closest_hit(p, ray.direction, t_min)) {
        ++rays_hit;
        lengths.push_back(hit->t);
        weights.push_back(ray.weight);
      }
    }
    if (!lengths.empty()) {
      const double sdf = weighted_median(lengths, weights);
      out.per_sample[static_cast<std::size_t>(i)] = sdf;
      hist_values.push_back(sdf);
    }
  }
  out.ray_hit_fraction = rays_cast ? static_cast<double>(rays_hit) / static_cast<double>(rays_cast) : 0.0;
  if (out.ray_hit_fraction < 0.5)
    throw GeometryError("model '" + m.id + "': only " + std::to_string(out.ray_hit_fraction * 100.0) +
                        "% of shape-diameter rays hit the mesh (open mesh?)");
  out.histogram.lo = 0.0;
  out.histogram.hi = extent;
  out.histogram.mass = Eigen::VectorXd::Zero(cfg.sdf_bins);
  for (double v : hist_values) out.histogram.mass(out.histogram.bin_of(v)) += 1.0;
  l1_normalize(out.histogram.mass);
  return out;
}

// ------------------------------------------------------- light field

namespace {

Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

std::vector<Mat3> icosahedral_rotations() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::array<Mat3, 2> gens{rotation_about(Vec3(0, 1, phi), 2.0 * std::numbers::pi / 5.0),
                                 rotation_about(Vec3(1, 1, 1), 2.0 * std::numbers::pi / 3.0)};
  std::vector<Mat3> group{Mat3::Identity()};
  for (std::size_t head = 0; head < group.size(); ++head) {
    for (const Mat3& g : gens) {
      const Mat3 cand = g * group[head];
      const bool seen = std::any_of(group.begin(), group.end(),
                                    [&](const Mat3& x) { return (x - cand).cwiseAbs().maxCoeff() < 1e-9; });
      if (!seen) group.push_back(cand);
    }
  }
  return group;
}

}  // namespace

std::vector<ViewFrame> light_field_views() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double iphi = 1.0 / phi;
  // dual of the icosphere base solid, so both share one rotation group
  std::vector<Vec3> dodeca;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) dodeca.emplace_back(sx, sy, sz);
  for (int s1 : {-1, 1})
    for (int s2 : {-1, 1}) {
      dodeca.emplace_back(0, s2 * phi, s1 * iphi);
      dodeca.emplace_back(s1 * iphi, 0, s2 * phi);
      dodeca.emplace_back(s2 * phi, s1 * iphi, 0);
    }
  // One vertex of each antipodal pair: the hemisphere facing a generic
  // near-+Y direction.
  const Vec3 h = Vec3(0.01, 1.0, 0.001).normalized();
  std::vector<Vec3> half;
  for (const Vec3& d : dodeca)
    if (d.dot(h) > 0) half.push_back(d.normalized());
  std::sort(half.begin(), half.end(), [&](const Vec3& a, const Vec3& b) {
    if (a.dot(h) != b.dot(h)) return a.dot(h) > b.dot(h);
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });

  ViewFrame base;
  base.toward = half.front();
  base.up = (Vec3::UnitZ() - Vec3::UnitZ().dot(base.toward) * base.toward).normalized();
  base.right = base.up.cross(base.toward);

  const auto group = icosahedral_rotations();
  std::vector<ViewFrame> views;
  for (const Vec3& d : half) {
    for (const Mat3& R : group) {
      if ((R * base.toward - d).norm() < 1e-9) {
        views.push_back({R * base.right, R * base.up, R * base.toward});
        break;
      }
    }
  }
  if (views.size() != 10) throw Error("light field view construction failed");
  return views;
}

Eigen::VectorXd compute_light_field(const Model& m, const FeatureConfig& cfg) {
  const int per_view = zernike_count(cfg.lfd_zernike_order) - 1 + cfg.lfd_fourier;
  Eigen::VectorXd out(per_view * cfg.lfd_views);
  const double half_extent = 1.02 * m.vertices.rowwise().norm().maxCoeff();
  const auto views = light_field_views();
  for (int v = 0; v < cfg.lfd_views; ++v) {
    const Mask mask = render_silhouette(m, views[static_cast<std::size_t>(v)], cfg.lfd_image_size, half_extent);
    const Eigen::VectorXd z = zernike_magnitudes(mask, cfg.lfd_zernike_order, true);
    const Eigen::VectorXd fd = fourier_magnitudes(centroid_distance_signal(mask, cfg.sil_contour_samples), cfg.lfd_fourier);
    out.segment(v * per_view, z.size()) = z;
    out.segment(v * per_view + z.size(), fd.size()) = fd;
  }
  return out;
}

// ------------------------------------------------------------- voxels

std::vector<Vec3> fibonacci_directions(int n) {
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(n));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double a = golden * i;
    dirs.emplace_back(r * std::cos(a), r * std::sin(a), z);
  }
  return dirs;
}

int nearest_direction(const std::vector<Vec3>& lattice, const Vec3& d) {
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const double dot = lattice[i].dot(d);
    if (dot > best_dot) {
      best_dot = dot;
      best = static_cast<int>(i);
    }
  }
  return best;
}

VoxelDescriptors compute_voxel_descriptors(const VoxelGrid& g, const FeatureConfig& cfg) {
  if (g.occupied_count() == 0) throw GeometryError("voxel grid is empty");
  const int R = g.resolution;
  const int radius = cfg.voxel_blur / 2;
  // Integer box sums, separable along k, j, i.
  std::vector<std::uint16_t> sum(g.occupancy.begin(), g.occupancy.end());
  std::vector<std::uint16_t> line(static_cast<std::size_t>(R));
  auto blur_line = [&](auto index_of) {
    for (int t = 0; t < R; ++t) line[t] = sum[index_of(t)];
    for (int t = 0; t < R; ++t) {
      std::uint16_t acc = 0;
      for (int d = -radius; d <= radius; ++d)
        if (t + d >= 0 && t + d < R) acc = static_cast<std::uint16_t>(acc + line[t + d]);
      sum[index_of(t)] = acc;
    }
  };
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b) blur_line([&](int t) { return g.index(a, b, t); });
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b) blur_line([&](int t) { return g.index(a, t, b); });
  for (int a = 0; a < R; ++a)
    for (int b = 0; b < R; ++b) blur_line([&](int t) { return g.index(t, a, b); });
  const double norm = 2.0 * std::pow(static_cast<double>(cfg.voxel_blur), 3);
  const double max_mag = std::sqrt(3.0) * std::pow(static_cast<double>(cfg.voxel_blur), 2) / norm;
  const auto lattice = fibonacci_directions(cfg.voxel_direction_bins);

  VoxelDescriptors out;
  out.gradient = Eigen::VectorXd::Zero(cfg.voxel_gradient_bins);
  out.direction = Eigen::VectorXd::Zero(cfg.voxel_direction_bins);
  auto s = [&](int i, int j, int k) -> double {
    if (i < 0 || j < 0 || k < 0 || i >= R || j >= R || k >= R) return 0.0;
    return sum[g.index(i, j, k)];
  };
  auto occ = [&](int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < R && j < R && k < R && g.at(i, j, k);
  };
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j)
      for (int k = 0; k < R; ++k) {
        if (!g.at(i, j, k)) continue;
        const bool boundary = !occ(i - 1, j, k) || !occ(i + 1, j, k) || !occ(i, j - 1, k) ||
                              !occ(i, j + 1, k) || !occ(i, j, k - 1) || !occ(i, j, k + 1);
        if (!boundary) continue;
        const Vec3 grad((s(i + 1, j, k) - s(i - 1, j, k)) / norm, (s(i, j + 1, k) - s(i, j - 1, k)) / norm,
                        (s(i, j, k + 1) - s(i, j, k - 1)) / norm);
        // Sorted squares make the magnitude exactly invariant to axis permutations.
        std::array<double, 3> sq{grad.x() * grad.x(), grad.y() * grad.y(), grad.z() * grad.z()};
        std::sort(sq.begin(), sq.end());
        const double mag = std::sqrt(sq[0] + sq[1] + sq[2]);
        out.gradient(uniform_bin(mag, 0.0, max_mag, cfg.voxel_gradient_bins)) += 1.0;
        if (mag > 0.0) out.direction(nearest_direction(lattice, grad / mag)) += mag;
      }
  l1_normalize(out.gradient);
  l1_normalize(out.direction);
  return out;
}

// -------------------------------------------------------- silhouettes

SilhouetteDescriptors compute_silhouette_descriptors(const std::array<Silhouette, 3>& sils, const FeatureConfig& cfg) {
  const int zc = zernike_count(cfg.sil_zernike_order);
  SilhouetteDescriptors out;
  out.centroid = Eigen::VectorXd::Zero(3 * cfg.sil_contour_samples);
  out.fourier = Eigen::VectorXd::Zero(3 * cfg.sil_fourier);
  out.zernike = Eigen::VectorXd::Zero(3 * zc);
  out.d2 = Eigen::VectorXd::Zero(3 * cfg.sil_d2_bins);
  out.gradient = Eigen::VectorXd::Zero(3 * cfg.sil_gradient_bins);
  out.gradient_direction = Eigen::VectorXd::Zero(3 * cfg.sil_orientation_bins);
  const double max_sobel = 4.0 * std::sqrt(2.0);

  for (int a = 0; a < 3; ++a) {
    const Mask& mask = sils[static_cast<std::size_t>(a)].mask;
    if (mask.count() == 0) {
      out.warnings.push_back("silhouette along axis " + std::to_string(a) + " is empty");
      log_warning(out.warnings.back());
      continue;
    }
    const Eigen::VectorXd signal = centroid_distance_signal(mask, cfg.sil_contour_samples);
    out.centroid.segment(a * cfg.sil_contour_samples, cfg.sil_contour_samples) = signal;
    out.fourier.segment(a * cfg.sil_fourier, cfg.sil_fourier) = fourier_magnitudes(signal, cfg.sil_fourier);
    out.zernike.segment(a * zc, zc) = zernike_magnitudes(mask, cfg.sil_zernike_order);

    // D2 over set pixels.
    std::vector<Eigen::Vector2d> pix;
    for (int v = 0; v < mask.height; ++v)
      for (int u = 0; u < mask.width; ++u)
        if (mask.at(u, v)) pix.emplace_back(u + 0.5, v + 0.5);
    const Eigen::Vector2d c = mask_centroid(mask);
    double rmax = 0.0;
    for (const auto& p : pix) rmax = std::max(rmax, (p - c).norm());
    Eigen::VectorXd d2 = Eigen::VectorXd::Zero(cfg.sil_d2_bins);
    Rng rng(mix_seed(cfg.seed, hash_string("sil_d2") + static_cast<std::uint64_t>(a)));
    for (int p = 0; p < cfg.sil_d2_pairs; ++p) {
      const auto& x = pix[rng.below(pix.size())];
      const auto& y = pix[rng.below(pix.size())];
      d2(uniform_bin((x - y).norm(), 0.0, 2.0 * rmax, cfg.sil_d2_bins)) += 1.0;
    }
    l1_normalize(d2);
    out.d2.segment(a * cfg.sil_d2_bins, cfg.sil_d2_bins) = d2;

    // Sobel gradient on boundary pixels.
    auto val = [&](int u, int v) -> double {
      if (u < 0 || v < 0 || u >= mask.width || v >= mask.height) return 0.0;
      return mask.at(u, v);
    };
    Eigen::VectorXd gh = Eigen::VectorXd::Zero(cfg.sil_gradient_bins);
    Eigen::VectorXd oh = Eigen::VectorXd::Zero(cfg.sil_orientation_bins);
    for (int v = 0; v < mask.height; ++v)
      for (int u = 0; u < mask.width; ++u) {
        if (!mask.at(u, v)) continue;
        if (val(u - 1, v) && val(u + 1, v) && val(u, v - 1) && val(u, v + 1)) continue;
        const double gx = (val(u + 1, v - 1) + 2 * val(u + 1, v) + val(u + 1, v + 1)) -
                          (val(u - 1, v - 1) + 2 * val(u - 1, v) + val(u - 1, v + 1));
        const double gy = (val(u - 1, v + 1) + 2 * val(u, v + 1) + val(u + 1, v + 1)) -
                          (val(u - 1, v - 1) + 2 * val(u, v - 1) + val(u + 1, v - 1));
        const double mag = std::hypot(gx, gy);
        gh(uniform_bin(mag, 0.0, max_sobel, cfg.sil_gradient_bins)) += 1.0;
        if (mag > 0.0) {
          double theta = std::atan2(gy, gx);
          if (theta < 0) theta += std::numbers::pi;
          if (theta >= std::numbers::pi) theta -= std::numbers::pi;
          oh(uniform_bin(theta, 0.0, std::numbers::pi, cfg.sil_orientation_bins)) += mag;
        }
      }
    l1_normalize(gh);
    l1_normalize(oh);
    out.gradient.segment(a * cfg.sil_gradient_bins, cfg.sil_gradient_bins) = gh;
    out.gradient_direction.segment(a * cfg.sil_orientation_bins, cfg.sil_orientation_bins) = oh;
  }
  return out;
}

// ----------------------------------------------------- shape histogram

Eigen::VectorXd compute_shape_histogram(const PointSample& s, const FeatureConfig& cfg) {
  const int shells = cfg.shape_hist_shells, sectors = cfg.shape_hist_sectors;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(shells * sectors);
  const auto lattice = fibonacci_directions(sectors);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Vec3 p = s.points.row(i).transpose();
    const double r = p.norm();
    const int shell = uniform_bin(r, 0.0, cfg.shape_hist_max_radius, shells);
    const int sector = r > 0.0 ? nearest_direction(lattice, p / r) : 0;
    h(shell * sectors + sector) += 1.0;
  }
  l1_normalize(h);
  return h;
}

// ---------------------------------------------------------- assembly

std::array<const Eigen::VectorXd*, kGeometryBlockCount> GeometryBlocks::ordered() const {
  return {&shape_distribution, &curvature_gauss,  &curvature_mean,     &curvature_max,
          &curvature_min,      &shape_diameter,   &light_field,        &voxel_gradient,
          &voxel_gradient_direction, &sil_centroid_distances, &sil_fourier, &sil_zernike,
          &sil_d2,             &sil_gradient,     &sil_gradient_direction, &shape_histogram};
}

Eigen::VectorXd assemble_geometry(const GeometryBlocks& blocks) {
  Eigen::VectorXd out(kGeometryDims);
  const auto parts = blocks.ordered();
  for (std::size_t b = 0; b < parts.size(); ++b) {
    const auto& spec = kFeatureBlocks[b];
    if (parts[b]->size() != spec.size)
      throw InvalidArgument("geometry block '" + std::string(spec.name) + "' has length " +
                            std::to_string(parts[b]->size()) + ", expected " + std::to_string(spec.size));
    out.segment(block_offset(b), spec.size) = *parts[b];
  }
  return out;
}

GeometryResult compute_geometry(const Model& m, const FeatureConfig& cfg) {
  GeometryResult out;
  auto& b = out.blocks;
  const PointSample sample = sample_surface(m, static_cast<std::size_t>(cfg.surface_samples),
                                            mix_seed(cfg.seed, hash_string(m.id)));
  b.shape_distribution = compute_shape_distribution(sample, cfg);
  const CurvatureHistograms curv = compute_curvature_histograms(m, cfg);
  b.curvature_gauss = curv.gauss.mass;
  b.curvature_mean = curv.mean.mass;
  b.curvature_max = curv.kmax.mass;
  b.curvature_min = curv.kmin.mass;
  try {
    b.shape_diameter = compute_shape_diameter(m, sample, cfg).histogram.mass;
  } catch (const GeometryError& e) {
    b.shape_diameter = Eigen::VectorXd::Zero(cfg.sdf_bins);
    out.warnings.push_back(std::string("shape_diameter zeroed: ") + e.what());
    log_warning(out.warnings.back());
  }
  b.light_field = compute_light_field(m, cfg);

  const VoxelGrid grid = voxelize(m, cfg.voxel_resolution);
  out.solid_voxels = grid.solid;
  const VoxelDescriptors vox = compute_voxel_descriptors(grid, cfg);
  b.voxel_gradient = vox.gradient;
  b.voxel_gradient_direction = vox.direction;
  const SilhouetteDescriptors sil = compute_silhouette_descriptors(project_silhouettes(grid), cfg);
  b.sil_centroid_distances = sil.centroid;
  b.sil_fourier = sil.fourier;
  b.sil_zernike = sil.zernike;
  b.sil_d2 = sil.d2;
  b.sil_gradient = sil.gradient;
  b.sil_gradient_direction = sil.gradient_direction;
  out.warnings.insert(out.warnings.end(), sil.warnings.begin(), sil.warnings.end());
  b.shape_histogram = compute_shape_histogram(sample, cfg);
  return out;
}

}  // namespace stylemetric
