#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "stylemetric/error.hpp"
#include "stylemetric/geometry_features.hpp"
#include "stylemetric/primitives.hpp"
#include "stylemetric/shape2d.hpp"

using namespace stylemetric;

namespace {

Mat3 rot(const Vec3& axis, double deg) {
  return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
}

double l1(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().sum(); }

// Uniform point on the unit sphere, drawn test-side with the standard library.
Vec3 sphere_point(std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  Vec3 v(n(gen), n(gen), n(gen));
  return v.normalized();
}

PointSample points_sample(const std::vector<Vec3>& pts) {
  PointSample s;
  s.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
  s.normals.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    s.normals.row(static_cast<Eigen::Index>(i)) = pts[i].normalized().transpose();
  }
  s.face_index.assign(pts.size(), 0);
  s.seed = 5;
  return s;
}

Mask disc_mask(int side, double cx, double cy, double r) {
  Mask m(side, side);
  for (int v = 0; v < side; ++v)
    for (int u = 0; u < side; ++u)
      if (std::hypot(u + 0.5 - cx, v + 0.5 - cy) <= r) m.at(u, v) = 1;
  return m;
}

Mask rotate90(const Mask& m) {
  Mask out(m.height, m.width);
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) out.at(m.height - 1 - v, u) = m.at(u, v);
  return out;
}

VoxelGrid rotate_grid90(const VoxelGrid& g) {
  // (i, j, k) -> (R-1-j, i, k): quarter turn about z
  VoxelGrid out(g.resolution);
  const int R = g.resolution;
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j)
      for (int k = 0; k < R; ++k) out.at(R - 1 - j, i, k) = g.at(i, j, k);
  return out;
}

Model chair_like() {
  return merge_models({make_box(Vec3(0, 0.45, 0), Vec3(0.9, 0.08, 0.9)),
                       make_box(Vec3(0, 0.95, -0.41), Vec3(0.9, 0.9, 0.08)),
                       make_box(Vec3(0.4, 0.2, 0.4), Vec3(0.08, 0.42, 0.08)),
                       make_box(Vec3(-0.4, 0.2, 0.4), Vec3(0.08, 0.42, 0.08)),
                       make_box(Vec3(0.4, 0.2, -0.4), Vec3(0.08, 0.42, 0.08)),
                       make_box(Vec3(-0.4, 0.2, -0.4), Vec3(0.08, 0.42, 0.08))},
                      "chair");
}

FeatureConfig desk_config() {
  FeatureConfig cfg;
  cfg.voxel_resolution = 64;
  return cfg;
}

}  // namespace

TEST_CASE("block sizes add up to the geometric dimension") {
  int total = 0;
  for (int b = 0; b < kGeometryBlockCount; ++b) total += kFeatureBlocks[b].size;
  CHECK(total == 2587);
  CHECK(128 + 4 * 128 + 128 + 470 + 192 + 128 + 192 + 57 + 108 + 192 + 192 + 96 + 192 == total);
}

TEST_CASE("shape distribution: degenerate, rotation, errors") {
  const PointSample same = points_sample(std::vector<Vec3>(50, Vec3(0.1, 0.2, 0.3)));
  const Eigen::VectorXd h = compute_shape_distribution(same);
  CHECK(h.size() == 128);
  CHECK(h(0) == 1.0);

  const Model sphere = make_icosphere(1.0, 4);
  const PointSample s = sample_surface(sphere, 4096, 11);
  PointSample r = s;
  r.points = (s.points * rot(Vec3(1, 2, 3), 37).transpose()).eval();
  CHECK(l1(compute_shape_distribution(s), compute_shape_distribution(r)) < 1e-9);

  CHECK_THROWS_AS(compute_shape_distribution(points_sample({Vec3::Zero()})), InvalidArgument);
}

TEST_CASE("sphere shape distribution matches a Monte Carlo oracle") {
  const Model sphere = make_icosphere(1.0, 5);
  const PointSample s = sample_surface(sphere, 4096, 3);
  const Eigen::VectorXd h = compute_shape_distribution(s);
  const double dmax = shape_distribution_range(s);

  std::mt19937_64 gen(99);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(128);
  const int pairs = 10'000'000;
  for (int p = 0; p < pairs; ++p) {
    const double d = (sphere_point(gen) - sphere_point(gen)).norm();
    const int b = std::min(127, static_cast<int>(d / dmax * 128));
    oracle(b) += 1;
  }
  oracle /= pairs;
  CHECK(l1(h, oracle) <= 0.05);
}

TEST_CASE("curvature of a tessellated unit sphere") {
  const Model sphere = make_icosphere(1.0, 4);
  const auto c = compute_curvature_histograms(sphere);
  CHECK(c.gauss.mass.size() == 128);
  CHECK(c.gauss.mass.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.gauss.mass_between(0.9, 1.1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c.mean.mass_between(0.9, 1.1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c.kmax.mass_between(0.9, 1.1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c.kmin.mass_between(0.9, 1.1) == doctest::Approx(1.0).epsilon(1e-9));

  const Model big = make_icosphere(2.0, 4);
  const auto cb = compute_curvature_histograms(big);
  CHECK(cb.gauss.mass_between(0.225, 0.275) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cb.mean.mass_between(0.45, 0.55) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("flat patch has zero Gaussian curvature at interior vertices") {
  const Model patch = make_grid_patch(12);
  const VertexCurvatures vc = compute_vertex_curvatures(patch);
  int interior = 0;
  for (Eigen::Index i = 0; i < patch.vertex_count(); ++i)
    if (vc.valid[static_cast<std::size_t>(i)]) {
      ++interior;
      CHECK(std::abs(vc.gauss(i)) < 1e-9);
    }
  CHECK(interior == 11 * 11);
  const auto h = compute_curvature_histograms(patch);
  CHECK(h.gauss.mass(h.gauss.bin_of(0.0)) == doctest::Approx(1.0));
}

TEST_CASE("robust histogram winsorizes to the percentile range") {
  std::vector<double> v;
  for (int i = 0; i < 1000; ++i) v.push_back(i);
  v.push_back(1e9);
  const RangedHistogram h = robust_histogram(v, 10, 1.0, 99.0);
  CHECK(h.lo >= 9.0);
  CHECK(h.hi <= 991.0);
  CHECK(h.mass.sum() == doctest::Approx(1.0));
  CHECK(h.mass(9) > h.mass(8));  // the outlier and the top percentile pile into the end bin
}

TEST_CASE("weighted median and cone rays") {
  CHECK(weighted_median({3, 1, 2}, {1, 1, 1}) == 2);
  CHECK(weighted_median({1, 10}, {1, 3}) == 10);
  const Vec3 n(0, 0, 1);
  const auto rays = sdf_cone(n);
  CHECK(rays.size() == 30);
  for (const auto& r : rays) {
    CHECK(std::abs(r.direction.norm() - 1) < 1e-12);
    CHECK(r.direction.dot(-n) >= std::cos(std::numbers::pi / 6) - 1e-12);
    CHECK(r.weight > 0);
  }
}

TEST_CASE("shape diameter of a unit sphere is its diameter") {
  const Model sphere = make_icosphere(1.0, 5);
  const PointSample s = sample_surface(sphere, 2048, 4);
  const ShapeDiameter sd = compute_shape_diameter(sphere, s);
  CHECK(sd.histogram.mass.size() == 128);
  CHECK(sd.ray_hit_fraction > 0.99);
  CHECK(sd.histogram.mass_between(1.9, 2.1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("nested spheres: per-sample diameter follows an analytic ray oracle") {
  const Model outer = make_icosphere(2.0, 5, "outer");
  const Model inner = make_icosphere(1.0, 5, "inner");
  const Model both = merge_models({outer, inner}, "nested");
  const PointSample s = sample_surface(outer, 400, 8);
  const ShapeDiameter sd = compute_shape_diameter(both, s);
  const Vec3 centre = surface_centroid(both);

  int bad = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const Vec3 p = s.points.row(i).transpose();
    std::vector<double> len, w;
    for (const ConeRay& ray : sdf_cone(s.normals.row(i).transpose(), {}, centre - p)) {
      // first hit against the exact spheres of radius 1 and 2
      const Vec3 o = p.normalized() * 2.0;
      const Vec3& d = ray.direction;
      const double b = o.dot(d);
      const double disc_inner = b * b - (o.squaredNorm() - 1.0);
      double t;
      if (disc_inner >= 0 && -b - std::sqrt(disc_inner) > 0)
        t = -b - std::sqrt(disc_inner);
      else
        t = -b + std::sqrt(b * b - (o.squaredNorm() - 4.0));
      len.push_back(t);
      w.push_back(ray.weight);
    }
    const double expected = weighted_median(len, w);
    if (std::abs(sd.per_sample[static_cast<std::size_t>(i)] - expected) > 0.05) ++bad;
  }
  CHECK(bad <= 4);
  // most samples see the gap of width 1 to the inner sphere
  CHECK(sd.histogram.mass_between(0.9, 1.15) > 0.9);
}

TEST_CASE("cylinder side samples measure twice the radius") {
  const double r = 0.05;
  const Model cyl = make_cylinder(r, 2.0, 64);
  const PointSample s = sample_surface(cyl, 2048, 2);
  const ShapeDiameter sd = compute_shape_diameter(cyl, s);
  int side = 0, near = 0;
  for (Eigen::Index i = 0; i < s.size() && i < 1024; ++i) {
    if (std::abs(s.normals(i, 1)) > 0.5 || std::abs(s.points(i, 1)) > 0.8) continue;
    ++side;
    near += std::abs(sd.per_sample[static_cast<std::size_t>(i)] - 2 * r) < 0.2 * 2 * r;
  }
  REQUIRE(side > 500);
  CHECK(static_cast<double>(near) / side > 0.95);
}

TEST_CASE("open patch is rejected by the shape diameter") {
  const Model patch = make_grid_patch(4);
  CHECK_THROWS_AS(compute_shape_diameter(patch, sample_surface(patch, 200, 1)), GeometryError);
}

TEST_CASE("light field views form a half dodecahedron") {
  const auto views = light_field_views();
  REQUIRE(views.size() == 10);
  for (std::size_t a = 0; a < views.size(); ++a) {
    CHECK(std::abs(views[a].toward.norm() - 1) < 1e-12);
    CHECK(std::abs(views[a].up.dot(views[a].toward)) < 1e-12);
    for (std::size_t b = a + 1; b < views.size(); ++b) {
      // no antipodal pair and no repeats
      CHECK(views[a].toward.dot(views[b].toward) > -0.99);
      CHECK(views[a].toward.dot(views[b].toward) < 0.99);
    }
  }
}

TEST_CASE("light field: length, identity, sphere views agree") {
  const Model sphere = normalize(make_icosphere(1.0, 3), {});
  const Eigen::VectorXd lf = compute_light_field(sphere);
  REQUIRE(lf.size() == 470);
  CHECK(compute_light_field(sphere) == lf);
  for (int v = 1; v < 10; ++v) CHECK((lf.segment(47 * v, 47) - lf.segment(0, 47)).cwiseAbs().maxCoeff() < 1e-6);

  const Model chair = normalize(chair_like(), {});
  const Eigen::VectorXd lc = compute_light_field(chair);
  CHECK((lc - lf).norm() > 1e-3);
  CHECK(lc.allFinite());
}

TEST_CASE("Fibonacci lattice and nearest direction") {
  const auto lat = fibonacci_directions(128);
  REQUIRE(lat.size() == 128);
  for (const auto& d : lat) CHECK(std::abs(d.norm() - 1) < 1e-12);
  for (int i = 0; i < 128; i += 13) CHECK(nearest_direction(lat, lat[static_cast<std::size_t>(i)]) == i);
}

TEST_CASE("voxel descriptors of a solid cube point along the axes") {
  const Model cube = normalize(make_box(Vec3::Zero(), Vec3(1, 1, 1)), {});
  const VoxelGrid g = voxelize(cube, 64);
  const VoxelDescriptors vd = compute_voxel_descriptors(g);
  REQUIRE(vd.gradient.size() == 192);
  REQUIRE(vd.direction.size() == 128);
  CHECK(vd.gradient.sum() == doctest::Approx(1.0));
  CHECK(vd.direction.sum() == doctest::Approx(1.0));

  const auto lat = fibonacci_directions(128);
  std::set<int> axis_bins;
  for (const Vec3 a : std::vector<Vec3>{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)}) {
    int best = 0;
    for (int i = 1; i < 128; ++i)
      if (lat[static_cast<std::size_t>(i)].dot(a) > lat[static_cast<std::size_t>(best)].dot(a)) best = i;
    axis_bins.insert(best);
  }
  double mass = 0;
  for (int b : axis_bins) mass += vd.direction(b);
  // The blur rounds edges and corners, whose gradients point diagonally.
  CHECK(mass >= 0.9);
}

TEST_CASE("voxel gradient magnitudes are invariant to a quarter turn") {
  const Model chair = normalize(chair_like(), {});
  const VoxelGrid g = voxelize(chair, 48);
  const VoxelDescriptors a = compute_voxel_descriptors(g);
  const VoxelDescriptors b = compute_voxel_descriptors(rotate_grid90(g));
  CHECK(l1(a.gradient, b.gradient) < 1e-9);
  CHECK_THROWS_AS(compute_voxel_descriptors(VoxelGrid(16)), GeometryError);
}

TEST_CASE("silhouette primitives: disc signal, Fourier DC, Zernike rotation") {
  const Mask disc = disc_mask(128, 64, 64, 40);
  const Eigen::VectorXd sig = centroid_distance_signal(disc, 64);
  CHECK(sig.size() == 64);
  CHECK(sig.maxCoeff() == doctest::Approx(1.0));
  CHECK(sig.minCoeff() > 0.95);
  const Eigen::VectorXd f = fourier_magnitudes(sig, 19);
  CHECK(f.tail(18).maxCoeff() < 0.02 * f(0));

  const Eigen::VectorXd flat = fourier_magnitudes(Eigen::VectorXd::Constant(64, 0.7), 19);
  CHECK(flat(0) == doctest::Approx(0.7));
  CHECK(flat.tail(18).cwiseAbs().maxCoeff() < 1e-12);

  // an asymmetric shape, rotated exactly on the pixel grid
  Mask shape(96, 96);
  for (int v = 10; v < 80; ++v)
    for (int u = 20; u < 40; ++u) shape.at(u, v) = 1;
  for (int v = 60; v < 80; ++v)
    for (int u = 40; u < 75; ++u) shape.at(u, v) = 1;
  const Eigen::VectorXd z0 = zernike_magnitudes(shape, 10);
  CHECK(z0.size() == 36);
  Mask r = shape;
  for (int q = 0; q < 3; ++q) {
    r = rotate90(r);
    CHECK((zernike_magnitudes(r, 10) - z0).cwiseAbs().maxCoeff() < 1e-6);
  }
  // discs at other centres give the same moments
  CHECK((zernike_magnitudes(disc_mask(128, 50, 70, 40), 10) - zernike_magnitudes(disc, 10)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("silhouette descriptor blocks, normalization and empty masks") {
  const Model chair = normalize(chair_like(), {});
  const auto sils = project_silhouettes(voxelize(chair, 64));
  const SilhouetteDescriptors d = compute_silhouette_descriptors(sils);
  CHECK(d.centroid.size() == 192);
  CHECK(d.fourier.size() == 57);
  CHECK(d.zernike.size() == 108);
  CHECK(d.d2.size() == 192);
  CHECK(d.gradient.size() == 192);
  CHECK(d.gradient_direction.size() == 96);
  for (int s = 0; s < 3; ++s) {
    CHECK(d.d2.segment(64 * s, 64).sum() == doctest::Approx(1.0));
    CHECK(d.gradient.segment(64 * s, 64).sum() == doctest::Approx(1.0));
    CHECK(d.gradient_direction.segment(32 * s, 32).sum() == doctest::Approx(1.0));
  }
  CHECK(d.warnings.empty());

  std::array<Silhouette, 3> empty = sils;
  empty[1].mask = Mask(64, 64);
  const SilhouetteDescriptors e = compute_silhouette_descriptors(empty);
  CHECK_FALSE(e.warnings.empty());
  CHECK(e.centroid.segment(64, 64).isZero());
  CHECK(e.zernike.segment(36, 36).isZero());
  CHECK(e.d2.segment(64, 64).isZero());
  CHECK(e.centroid.segment(0, 64) == d.centroid.segment(0, 64));
}

TEST_CASE("shape histogram shells and sectors") {
  FeatureConfig cfg;
  const double shell = cfg.shape_hist_max_radius / 8;
  std::mt19937_64 gen(4);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200000; ++i) pts.push_back(sphere_point(gen) * (0.9 * cfg.shape_hist_max_radius));
  const Eigen::VectorXd h = compute_shape_histogram(points_sample(pts), cfg);
  REQUIRE(h.size() == 192);
  CHECK(h.sum() == doctest::Approx(1.0));
  // 0.9 of the max radius is shell 7 (shell-major layout)
  CHECK(h.segment(7 * 24, 24).sum() == doctest::Approx(1.0));
  const Eigen::VectorXd sectors = h.segment(7 * 24, 24);
  CHECK(sectors.maxCoeff() / sectors.minCoeff() < 1.5);

  std::vector<Vec3> ring;
  for (int i = 0; i < 100; ++i) ring.push_back(sphere_point(gen) * (2.5 * shell));
  const Eigen::VectorXd h2 = compute_shape_histogram(points_sample(ring), cfg);
  CHECK(h2.segment(2 * 24, 24).sum() == doctest::Approx(1.0));
}

TEST_CASE("assembly: length, named block errors, identical inputs") {
  const Model chair = normalize(chair_like(), {});
  const FeatureConfig cfg = desk_config();
  const GeometryResult r = compute_geometry(chair, cfg);
  const Eigen::VectorXd v = assemble_geometry(r.blocks);
  CHECK(v.size() == 2587);
  CHECK(v.allFinite());

  int offset = 0;
  const auto blocks = r.blocks.ordered();
  for (int b = 0; b < kGeometryBlockCount; ++b) {
    CHECK(blocks[b]->size() == kFeatureBlocks[b].size);
    CHECK(v.segment(offset, kFeatureBlocks[b].size) == *blocks[b]);
    offset += kFeatureBlocks[b].size;
  }

  GeometryBlocks bad = r.blocks;
  bad.sil_zernike.resize(100);
  try {
    assemble_geometry(bad);
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("sil_zernike") != std::string::npos);
  }

  CHECK(assemble_geometry(compute_geometry(chair, cfg).blocks) == v);
}

TEST_CASE("histogram blocks are L1-normalized") {
  const Model chair = normalize(chair_like(), {});
  const GeometryResult r = compute_geometry(chair, desk_config());
  const auto& b = r.blocks;
  for (const Eigen::VectorXd* h : {&b.shape_distribution, &b.curvature_gauss, &b.curvature_mean, &b.curvature_max,
                                   &b.curvature_min, &b.shape_diameter, &b.voxel_gradient,
                                   &b.voxel_gradient_direction, &b.shape_histogram})
    CHECK(std::abs(h->sum() - 1.0) < 1e-9);
  CHECK(std::abs(b.sil_d2.sum() - 3.0) < 1e-9);
  CHECK(std::abs(b.sil_gradient.sum() - 3.0) < 1e-9);
  CHECK(std::abs(b.sil_gradient_direction.sum() - 3.0) < 1e-9);
}

TEST_CASE("rigid-motion invariance under quarter turns") {
  const FeatureConfig cfg = desk_config();
  const Model chair = normalize(chair_like(), {});
  const Model turned = transformed(chair, rot(Vec3::UnitY(), 90));
  const auto a = compute_geometry(chair, cfg).blocks;
  const auto b = compute_geometry(turned, cfg).blocks;
  CHECK(l1(a.shape_distribution, b.shape_distribution) <= 0.05);
  CHECK(l1(a.curvature_gauss, b.curvature_gauss) <= 0.05);
  CHECK(l1(a.curvature_mean, b.curvature_mean) <= 0.05);
  CHECK(l1(a.shape_diameter, b.shape_diameter) <= 0.05);
  CHECK(l1(a.voxel_gradient, b.voxel_gradient) <= 0.05);

  // exact for the same points moved rigidly
  const PointSample s = sample_surface(chair, 4096, 21);
  PointSample t = s;
  t.points = (s.points * rot(Vec3::UnitY(), 90).transpose()).eval();
  CHECK(l1(compute_shape_distribution(s), compute_shape_distribution(t)) <= 1e-9);
}
