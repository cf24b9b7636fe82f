#include "stylemetric/appearance_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "stylemetric/error.hpp"
#include "stylemetric/histogram.hpp"
#include "stylemetric/rng.hpp"

namespace stylemetric {

Eigen::VectorXd AppearanceBlocks::concat() const {
  Eigen::VectorXd out(3 + hue.size() + saturation.size() + value.size() + lbp.size());
  out << dominant_hsv, hue, saturation, value, lbp;
  return out;
}

Eigen::Vector3d rgb_to_hsv(const Eigen::Vector3d& rgb) {
  const double mx = rgb.maxCoeff(), mn = rgb.minCoeff();
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == rgb(0)) h = std::fmod((rgb(1) - rgb(2)) / delta, 6.0);
    else if (mx == rgb(1)) h = (rgb(2) - rgb(0)) / delta + 2.0;
    else h = (rgb(0) - rgb(1)) / delta + 4.0;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
    if (h >= 1.0) h -= 1.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

double circular_hue_mean(std::span<const double> hues, std::span<const double> weights) {
  double cs = 0.0, sn = 0.0;
  for (std::size_t i = 0; i < hues.size(); ++i) {
    cs += weights[i] * std::cos(2.0 * std::numbers::pi * hues[i]);
    sn += weights[i] * std::sin(2.0 * std::numbers::pi * hues[i]);
  }
  if (std::hypot(cs, sn) < 1e-12) return 0.0;
  double h = std::atan2(sn, cs) / (2.0 * std::numbers::pi);
  if (h < 0.0) h += 1.0;
  if (h >= 1.0) h -= 1.0;
  return h;
}

namespace {

Eigen::Vector3d pixel(const RgbImage& img, std::size_t i) {
  return {static_cast<double>(img.rgb[3 * i]), static_cast<double>(img.rgb[3 * i + 1]),
          static_cast<double>(img.rgb[3 * i + 2])};
}

}  // namespace

Eigen::Vector3d compute_dominant_hsv(const RgbImage& image, const FeatureConfig& cfg) {
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  if (n == 0) throw InvalidArgument("empty image");
  Rng rng(mix_seed(cfg.seed, hash_string("kmeans")));

  // k-means++ seeding; stops early when every pixel sits on a centre.
  std::vector<Eigen::Vector3d> centers{pixel(image, rng.below(n))};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < cfg.kmeans_k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pixel(image, i) - centers.back()).squaredNorm());
      total += d2[i];
    }
    if (!(total > 0.0)) break;
    double target = rng.uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(pixel(image, pick));
  }

  const std::size_t k = centers.size();
  std::vector<std::size_t> assign(n, 0), counts(k, 0);
  for (int it = 0; it <= cfg.kmeans_iterations; ++it) {
    std::fill(counts.begin(), counts.end(), 0);
    std::vector<Eigen::Vector3d> sums(k, Eigen::Vector3d::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p = pixel(image, i);
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (p - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      ++counts[best];
      sums[best] += p;
    }
    if (it == cfg.kmeans_iterations) break;
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
  }

  std::vector<double> hues, weights;
  double s = 0.0, v = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    const double w = static_cast<double>(counts[c]) / static_cast<double>(n);
    const Eigen::Vector3d hsv = rgb_to_hsv(centers[c] / 255.0);
    hues.push_back(hsv(0));
    weights.push_back(w);
    s += w * hsv(1);
    v += w * hsv(2);
  }
  return {circular_hue_mean(hues, weights), s, v};
}

Eigen::VectorXd compute_hsv_histograms(const RgbImage& image, const FeatureConfig& cfg) {
  const int bins = cfg.hsv_bins;
  Eigen::VectorXd hue = Eigen::VectorXd::Zero(bins), sat = hue, val = hue;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d hsv = rgb_to_hsv(pixel(image, i) / 255.0);
    hue(uniform_bin(hsv(0), 0.0, 1.0, bins)) += hsv(1);
    sat(uniform_bin(hsv(1), 0.0, 1.0, bins)) += 1.0;
    val(uniform_bin(hsv(2), 0.0, 1.0, bins)) += 1.0;
  }
  l1_normalize(hue);
  l1_normalize(sat);
  l1_normalize(val);
  Eigen::VectorXd out(3 * bins);
  out << hue, sat, val;
  return out;
}

Eigen::VectorXd compute_lbp(const RgbImage& image) {
  const int W = image.width, H = image.height;
  std::vector<double> luma(static_cast<std::size_t>(W) * H);
  for (std::size_t i = 0; i < luma.size(); ++i)
    luma[i] = 0.299 * image.rgb[3 * i] + 0.587 * image.rgb[3 * i + 1] + 0.114 * image.rgb[3 * i + 2];
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, W - 1);
    y = std::clamp(y, 0, H - 1);
    return luma[static_cast<std::size_t>(y) * W + x];
  };
  constexpr double kEps = 1e-9;

  int total_bins = 0;
  for (const auto& sc : kLbpScales) total_bins += sc[0] + 2;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(total_bins);
  int offset = 0;
  for (const auto& sc : kLbpScales) {
    const int P = sc[0], R = sc[1];
    // First-quadrant offsets, the rest by exact quarter turns (dx, dy) -> (dy, -dx),
    // with image y pointing down.
    std::vector<Eigen::Vector2d> offs(static_cast<std::size_t>(P));
    for (int p = 0; p < P / 4; ++p) {
      const double a = 2.0 * std::numbers::pi * p / P;
      double dx = R * std::cos(a), dy = -R * std::sin(a);
      if (std::abs(dx - std::round(dx)) < 1e-9) dx = std::round(dx);
      if (std::abs(dy - std::round(dy)) < 1e-9) dy = std::round(dy);
      offs[p] = {dx, dy};
    }
    for (int p = P / 4; p < P; ++p) {
      const auto& q = offs[p - P / 4];
      offs[p] = {q.y(), -q.x()};
    }
    Eigen::VectorXd h = Eigen::VectorXd::Zero(P + 2);
    std::vector<int> bits(static_cast<std::size_t>(P));
    for (int y = R; y < H - R; ++y)
      for (int x = R; x < W - R; ++x) {
        const double gc = at(x, y);
        for (int p = 0; p < P; ++p) {
          const double sx = x + offs[p].x(), sy = y + offs[p].y();
          const int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
          const double fx = sx - ix, fy = sy - iy;
          const double g = (1 - fx) * (1 - fy) * at(ix, iy) + fx * (1 - fy) * at(ix + 1, iy) +
                           (1 - fx) * fy * at(ix, iy + 1) + fx * fy * at(ix + 1, iy + 1);
          bits[p] = g - gc > kEps ? 1 : 0;
        }
        int transitions = 0, ones = 0;
        for (int p = 0; p < P; ++p) {
          transitions += bits[p] != bits[(p + 1) % P];
          ones += bits[p];
        }
        h(transitions <= 2 ? ones : P + 1) += 1.0;
      }
    l1_normalize(h);
    out.segment(offset, P + 2) = h;
    offset += P + 2;
  }
  return out;
}

AppearanceBlocks compute_appearance(const RgbImage& image, const FeatureConfig& cfg) {
  AppearanceBlocks b;
  b.dominant_hsv = compute_dominant_hsv(image, cfg);
  const Eigen::VectorXd hsv = compute_hsv_histograms(image, cfg);
  b.hue = hsv.segment(0, cfg.hsv_bins);
  b.saturation = hsv.segment(cfg.hsv_bins, cfg.hsv_bins);
  b.value = hsv.segment(2 * cfg.hsv_bins, cfg.hsv_bins);
  b.lbp = compute_lbp(image);
  return b;
}

AppearanceBlocks combine_textures(std::span<const AppearanceBlocks> blocks, std::vector<double> weights) {
  if (blocks.empty()) throw InvalidArgument("combine_textures needs at least one block");
  if (weights.empty()) weights.assign(blocks.size(), 1.0 / static_cast<double>(blocks.size()));
  if (weights.size() != blocks.size()) throw InvalidArgument("one weight per texture block required");
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(wsum > 0.0)) throw InvalidArgument("texture weights must have positive sum");
  for (double& w : weights) w /= wsum;
  if (blocks.size() == 1) return blocks[0];

  AppearanceBlocks out;
  out.hue = Eigen::VectorXd::Zero(blocks[0].hue.size());
  out.saturation = Eigen::VectorXd::Zero(blocks[0].saturation.size());
  out.value = Eigen::VectorXd::Zero(blocks[0].value.size());
  out.lbp = Eigen::VectorXd::Zero(blocks[0].lbp.size());
  std::vector<double> hues;
  double s = 0.0, v = 0.0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    out.hue += weights[i] * blocks[i].hue;
    out.saturation += weights[i] * blocks[i].saturation;
    out.value += weights[i] * blocks[i].value;
    out.lbp += weights[i] * blocks[i].lbp;
    hues.push_back(blocks[i].dominant_hsv(0));
    s += weights[i] * blocks[i].dominant_hsv(1);
    v += weights[i] * blocks[i].dominant_hsv(2);
  }
  out.dominant_hsv = {circular_hue_mean(hues, weights), s, v};
  l1_normalize(out.hue);
  l1_normalize(out.saturation);
  l1_normalize(out.value);
  int offset = 0;
  for (const auto& sc : kLbpScales) {
    auto seg = out.lbp.segment(offset, sc[0] + 2);
    l1_normalize(seg);
    offset += sc[0] + 2;
  }
  return out;
}

AppearanceBlocks neutral_appearance(const FeatureConfig& cfg) {
  AppearanceBlocks b;
  b.dominant_hsv = {0.0, 0.0, 0.5};
  b.hue = Eigen::VectorXd::Zero(cfg.hsv_bins);
  b.saturation = Eigen::VectorXd::Zero(cfg.hsv_bins);
  b.saturation(0) = 1.0;
  b.value = Eigen::VectorXd::Zero(cfg.hsv_bins);
  b.value(uniform_bin(0.5, 0.0, 1.0, cfg.hsv_bins)) = 1.0;
  int total = 0;
  for (const auto& sc : kLbpScales) total += sc[0] + 2;
  b.lbp = Eigen::VectorXd::Zero(total);
  int offset = 0;
  for (const auto& sc : kLbpScales) {
    b.lbp(offset) = 1.0;  // constant image: all-zero pattern
    offset += sc[0] + 2;
  }
  return b;
}

std::vector<double> texture_coverage(const Model& m) {
  std::vector<double> w(m.textures.size(), 0.0);
  if (w.empty()) return w;
  const Eigen::VectorXd areas = face_areas(m);
  double total = 0.0;
  for (Eigen::Index f = 0; f < m.face_count(); ++f) {
    const auto fs = static_cast<std::size_t>(f);
    if (fs >= m.face_material.size() || m.face_material[fs] < 0) continue;
    const int t = m.materials[static_cast<std::size_t>(m.face_material[fs])].texture;
    if (t < 0) continue;
    w[static_cast<std::size_t>(t)] += areas(f);
    total += areas(f);
  }
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (double& x : w) x /= total;
  return w;
}

ModelAppearance compute_model_appearance(const Model& m, const FeatureConfig& cfg) {
  ModelAppearance out;
  if (!m.textures.empty()) {
    std::vector<AppearanceBlocks> per;
    per.reserve(m.textures.size());
    for (const auto& t : m.textures) per.push_back(compute_appearance(t.pixels, cfg));
    out.blocks = combine_textures(per, texture_coverage(m));
    return out;
  }
  if (m.material_color) {
    RgbImage solid(kTextureSide, kTextureSide);
    for (std::size_t i = 0; i < solid.rgb.size(); ++i)
      solid.rgb[i] = static_cast<std::uint8_t>(std::lround(255.0 * (*m.material_color)(static_cast<int>(i % 3))));
    out.blocks = compute_appearance(solid, cfg);
    return out;
  }
  out.blocks = neutral_appearance(cfg);
  out.no_appearance = true;
  return out;
}

}  // namespace stylemetric
