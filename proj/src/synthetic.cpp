#include "stylemetric/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "stylemetric/error.hpp"
#include "stylemetric/image_io.hpp"
#include "stylemetric/primitives.hpp"
#include "stylemetric/rng.hpp"

namespace stylemetric {

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.dim <= 0 || spec.models_per_type <= 0) throw InvalidArgument("synthetic corpus needs positive sizes");
  Rng rng(mix_seed(spec.seed, hash_string("synthetic-corpus")));
  SyntheticCorpus out;
  out.support = spec.support;
  if (out.support.empty()) {
    if (spec.informative <= 0 || spec.informative > spec.dim) throw InvalidArgument("bad informative dimension count");
    for (auto i : rng.sample_without_replacement(static_cast<std::size_t>(spec.dim),
                                                 static_cast<std::size_t>(spec.informative)))
      out.support.push_back(static_cast<int>(i));
  }
  std::sort(out.support.begin(), out.support.end());
  for (int s : out.support)
    if (s < 0 || s >= spec.dim) throw InvalidArgument("support index out of range");

  out.w_star = WeightMatrix::identity(spec.dim, spec.config_hash);
  out.w_star.diag.setZero();
  for (int s : out.support) out.w_star.diag(s) = spec.weight_min + (spec.weight_max - spec.weight_min) * rng.uniform();
  out.w_star.provenance = {{"init", "synthetic ground truth"}, {"seed", spec.seed}};

  out.features.config_hash = spec.config_hash;
  out.features.config = {{"kind", "synthetic"},
                         {"seed", spec.seed},
                         {"dim", spec.dim},
                         {"models_per_type", spec.models_per_type},
                         {"support", out.support}};
  for (const auto& type : spec.types) {
    auto cluster = spec.clusters.count(type) ? spec.clusters.at(type) : type;
    for (int i = 0; i < spec.models_per_type; ++i) {
      char id[96];
      std::snprintf(id, sizeof id, "%s_%03d", type.c_str(), i);
      FeatureVector fv;
      fv.model_id = id;
      fv.object_type = type;
      fv.cluster = cluster;
      fv.config_hash = spec.config_hash;
      fv.values.resize(spec.dim);
      for (int d = 0; d < spec.dim; ++d) fv.values(d) = rng.normal();
      out.features.vectors.emplace(fv.model_id, std::move(fv));
    }
  }
  return out;
}

// ------------------------------------------------------------ procedural meshes

namespace {

struct Part {
  Model mesh;
  std::string material;
};

struct Style {
  bool classic;
  double thickness;
  double jitter;
};

RgbImage make_texture(int side, bool classic, Rng& rng) {
  RgbImage img(side, side);
  const double freq = (classic ? 18.0 : 6.0) + 4.0 * rng.uniform();
  const double phase = 6.283185307179586 * rng.uniform();
  const Eigen::Vector3d a = classic ? Eigen::Vector3d(0.55, 0.33, 0.16) : Eigen::Vector3d(0.70, 0.72, 0.75);
  const Eigen::Vector3d b = classic ? Eigen::Vector3d(0.36, 0.20, 0.09) : Eigen::Vector3d(0.25, 0.28, 0.33);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double u = static_cast<double>(x) / side, v = static_cast<double>(y) / side;
      double t;
      if (classic) {
        t = 0.5 + 0.5 * std::sin(freq * u + 1.5 * std::sin(9.0 * v) + phase);
      } else {
        const int cx = static_cast<int>(u * freq), cy = static_cast<int>(v * freq);
        t = ((cx + cy) % 2) ? 0.85 : 0.15;
      }
      t = std::clamp(t + 0.08 * (rng.uniform() - 0.5), 0.0, 1.0);
      const Eigen::Vector3d c = a + t * (b - a);
      for (int k = 0; k < 3; ++k) img.at(x, y, k) = static_cast<std::uint8_t>(std::lround(255.0 * c(k)));
    }
  return img;
}

Model leg(const Style& s, double x, double z, double height) {
  if (s.classic) return make_box(Vec3(x, height / 2, z), Vec3(s.thickness, height, s.thickness));
  return make_cylinder(s.thickness / 2, height, 12, "leg", Vec3(x, height / 2, z));
}

std::vector<Part> chair_parts(const Style& s) {
  const double seat_h = 0.42 + s.jitter * 0.05, seat_t = 0.06;
  const double half = 0.25 + s.jitter * 0.03;
  const double back_h = s.classic ? 0.55 : 0.3;
  std::vector<Part> parts;
  parts.push_back({make_box(Vec3(0, seat_h + seat_t / 2, 0), Vec3(2 * half, seat_t, 2 * half)), "body"});
  const double inset = half - s.thickness;
  for (double x : {-inset, inset})
    for (double z : {-inset, inset}) parts.push_back({leg(s, x, z, seat_h), "frame"});
  parts.push_back({make_box(Vec3(0, seat_h + seat_t + back_h / 2, -half + 0.03), Vec3(2 * half, back_h, 0.06)),
                   "body"});
  return parts;
}

std::vector<Part> table_parts(const Style& s) {
  const double h = 0.72 + s.jitter * 0.05, top_t = 0.05;
  const double hx = 0.6 + 0.1 * s.jitter, hz = 0.4;
  std::vector<Part> parts;
  parts.push_back({make_box(Vec3(0, h + top_t / 2, 0), Vec3(2 * hx, top_t, 2 * hz)), "body"});
  if (s.classic) {
    for (double x : {-hx + 0.06, hx - 0.06})
      for (double z : {-hz + 0.06, hz - 0.06}) parts.push_back({leg(s, x, z, h), "frame"});
  } else {
    parts.push_back({make_cylinder(0.05, h - 0.04, 16, "pedestal", Vec3(0, 0.04 + (h - 0.04) / 2, 0)), "frame"});
    parts.push_back({make_cylinder(0.3, 0.04, 24, "foot", Vec3(0, 0.02, 0)), "frame"});
  }
  return parts;
}

std::vector<Part> lamp_parts(const Style& s) {
  const double pole_h = 0.9 + 0.1 * s.jitter;
  std::vector<Part> parts;
  parts.push_back({make_cylinder(0.18, 0.04, 24, "base", Vec3(0, 0.02, 0)), "frame"});
  parts.push_back({make_cylinder(s.thickness / 2, pole_h, 12, "pole", Vec3(0, 0.04 + pole_h / 2, 0)), "frame"});
  const double top = 0.04 + pole_h;
  if (s.classic) {
    parts.push_back({make_cylinder(0.22, 0.3, 24, "shade", Vec3(0, top + 0.15, 0)), "body"});
  } else {
    Model shade = make_icosphere(0.16, 2, "shade");
    parts.push_back({transformed(shade, Mat3::Identity(), Vec3(0, top + 0.16, 0)), "body"});
  }
  return parts;
}

}  // namespace

std::vector<std::filesystem::path> write_procedural_corpus(const std::filesystem::path& dir,
                                                           const ProceduralSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Rng rng(mix_seed(spec.seed, hash_string("procedural")));
  std::vector<fs::path> written;
  const std::vector<std::string> types{"chair", "table", "lamp"};
  for (const auto& type : types) {
    fs::create_directories(dir / type);
    for (int i = 0; i < spec.models_per_type; ++i) {
      Style style{i % 2 == 0, 0.0, rng.uniform() - 0.5};
      style.thickness = (style.classic ? 0.06 : 0.03) * (1.0 + 0.3 * (rng.uniform() - 0.5));
      std::vector<Part> parts = type == "chair" ? chair_parts(style) : type == "table" ? table_parts(style) : lamp_parts(style);

      char name[64];
      std::snprintf(name, sizeof name, "%s_%s_%02d", type.c_str(), style.classic ? "classic" : "modern", i);
      std::vector<Model> meshes;
      std::vector<std::string> face_materials;
      for (const auto& p : parts) {
        meshes.push_back(p.mesh);
        face_materials.insert(face_materials.end(), static_cast<std::size_t>(p.mesh.face_count()), p.material);
      }
      const Model merged = merge_models(meshes, name);
      const std::string stem = name;
      write_png(dir / type / (stem + "_tex.png"), make_texture(spec.texture_side, style.classic, rng));
      {
        std::ofstream mtl(dir / type / (stem + ".mtl"));
        if (!mtl) throw IoError("cannot write material file for " + stem);
        mtl << "newmtl body\nKd 0.8 0.8 0.8\nmap_Kd " << stem << "_tex.png\n";
        if (style.classic)
          mtl << "newmtl frame\nKd 0.30 0.18 0.08\n";
        else
          mtl << "newmtl frame\nKd 0.75 0.75 0.78\n";
      }
      const fs::path obj = dir / type / (stem + ".obj");
      write_obj(obj, merged, stem + ".mtl", face_materials);
      written.push_back(obj);
    }
  }
  std::ofstream(dir / "clusters.json") << R"({"chair": "dining", "table": "dining", "lamp": "lighting"})"
                                       << "\n";
  std::ofstream(dir / "profiles.json")
      << R"({"default": {"up_axis": "+y", "front_axis": "+z", "target_extent": 1.0}})" << "\n";
  return written;
}

}  // namespace stylemetric
