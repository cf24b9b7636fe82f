#include "stylemetric/shape2d.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace stylemetric {

Eigen::Vector2d mask_centroid(const Mask& mask) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  std::size_t n = 0;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v)) {
        c += Eigen::Vector2d(u + 0.5, v + 0.5);
        ++n;
      }
  return n ? Eigen::Vector2d(c / static_cast<double>(n)) : c;
}

int zernike_count(int max_order) {
  int count = 0;
  for (int n = 0; n <= max_order; ++n) count += n / 2 + 1;
  return count;
}

namespace {

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

struct RadialTerm {
  int n, m;
  std::vector<double> coeff;  // coefficient of rho^(n - 2s)
};

std::vector<RadialTerm> radial_terms(int max_order) {
  std::vector<RadialTerm> terms;
  for (int n = 0; n <= max_order; ++n)
    for (int m = n % 2; m <= n; m += 2) {
      RadialTerm t{n, m, {}};
      for (int s = 0; s <= (n - m) / 2; ++s) {
        const double sign = (s % 2) ? -1.0 : 1.0;
        t.coeff.push_back(sign * factorial(n - s) /
                          (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s)));
      }
      terms.push_back(std::move(t));
    }
  return terms;
}

}  // namespace

Eigen::VectorXd zernike_magnitudes(const Mask& mask, int max_order, bool skip_dc) {
  const auto terms = radial_terms(max_order);
  const int count = static_cast<int>(terms.size()) - (skip_dc ? 1 : 0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
  if (mask.count() == 0) return out;

  const Eigen::Vector2d c = mask_centroid(mask);
  double rmax = 0.0;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v)) rmax = std::max(rmax, std::hypot(u + 0.5 - c.x(), v + 0.5 - c.y()));
  rmax += 0.5;

  std::vector<std::complex<double>> sums(terms.size(), {0.0, 0.0});
  std::vector<double> rho_pow(static_cast<std::size_t>(max_order) + 1);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.at(u, v)) continue;
      const double dx = (u + 0.5 - c.x()) / rmax;
      const double dy = (v + 0.5 - c.y()) / rmax;
      const double rho = std::hypot(dx, dy);
      const double theta = std::atan2(dy, dx);
      rho_pow[0] = 1.0;
      for (int p = 1; p <= max_order; ++p) rho_pow[p] = rho_pow[p - 1] * rho;
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto& term = terms[t];
        double r = 0.0;
        for (std::size_t s = 0; s < term.coeff.size(); ++s) r += term.coeff[s] * rho_pow[term.n - 2 * s];
        sums[t] += r * std::polar(1.0, -term.m * theta);
      }
    }
  const double pixel_area = 1.0 / (rmax * rmax);
  int o = 0;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (skip_dc && t == 0) continue;
    out(o++) = std::abs(sums[t]) * (terms[t].n + 1) / std::numbers::pi * pixel_area;
  }
  return out;
}

std::vector<Eigen::Vector2i> outer_contour(const Mask& mask) {
  const int W = mask.width, H = mask.height;
  // Label 8-connected components; keep the largest.
  std::vector<int> label(mask.bits.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<int> stack;
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const std::size_t idx = static_cast<std::size_t>(v) * W + u;
      if (!mask.bits[idx] || label[idx] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      stack.push_back(static_cast<int>(idx));
      label[idx] = id;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++sizes[id];
        const int cu = cur % W, cv = cur / W;
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du) {
            const int nu = cu + du, nv = cv + dv;
            if (nu < 0 || nv < 0 || nu >= W || nv >= H) continue;
            const std::size_t n = static_cast<std::size_t>(nv) * W + nu;
            if (mask.bits[n] && label[n] < 0) {
              label[n] = id;
              stack.push_back(static_cast<int>(n));
            }
          }
      }
    }
  if (sizes.empty()) return {};
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  auto inside = [&](int u, int v) {
    return u >= 0 && v >= 0 && u < W && v < H && label[static_cast<std::size_t>(v) * W + u] == keep;
  };

  Eigen::Vector2i start(-1, -1);
  for (int v = 0; v < H && start.x() < 0; ++v)
    for (int u = 0; u < W; ++u)
      if (inside(u, v)) {
        start = {u, v};
        break;
      }

  // Clockwise neighbour ring (image y grows downward) starting at west.
  static const int du[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  static const int dv[8] = {0, -1, -1, -1, 0, 1, 1, 1};
  std::vector<Eigen::Vector2i> contour{start};
  Eigen::Vector2i cur = start;
  int back = 0;  // direction from cur to a background neighbour
  int first_move = -1;
  const std::size_t cap = 4 * mask.bits.size() + 8;
  for (std::size_t step = 0; step < cap; ++step) {
    int found = -1;
    for (int r = 1; r <= 8; ++r) {
      const int d = (back + r) % 8;
      if (inside(cur.x() + du[d], cur.y() + dv[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    if (cur == start && first_move >= 0 && found == first_move) {
      contour.pop_back();  // start was re-entered the same way: closed
      break;
    }
    if (first_move < 0) first_move = found;
    const int prev = (found + 7) % 8;
    const Eigen::Vector2i pb(cur.x() + du[prev], cur.y() + dv[prev]);
    const Eigen::Vector2i next(cur.x() + du[found], cur.y() + dv[found]);
    for (int d = 0; d < 8; ++d)
      if (next.x() + du[d] == pb.x() && next.y() + dv[d] == pb.y()) back = d;
    cur = next;
    contour.push_back(cur);
  }
  return contour;
}

Eigen::VectorXd centroid_distance_signal(const Mask& mask, int samples) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(samples);
  const auto contour = outer_contour(mask);
  if (contour.empty()) return out;
  const Eigen::Vector2d c = mask_centroid(mask);
  const std::size_t n = contour.size();
  std::vector<Eigen::Vector2d> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = contour[i].cast<double>() + Eigen::Vector2d(0.5, 0.5);
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + (pts[(i + 1) % n] - pts[i]).norm();
  const double total = cum[n];
  for (int s = 0; s < samples; ++s) {
    Eigen::Vector2d p = pts[0];
    if (total > 0.0) {
      const double target = total * s / samples;
      const auto it = std::upper_bound(cum.begin(), cum.end(), target);
      const std::size_t seg = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()) - 1, n - 1);
      const double len = cum[seg + 1] - cum[seg];
      const double f = len > 0 ? (target - cum[seg]) / len : 0.0;
      p = pts[seg] + f * (pts[(seg + 1) % n] - pts[seg]);
    }
    out(s) = (p - c).norm();
  }
  const double mx = out.maxCoeff();
  if (mx > 0.0) out /= mx;
  return out;
}

Eigen::VectorXd fourier_magnitudes(const Eigen::VectorXd& signal, int count) {
  const auto N = signal.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
  if (N == 0) return out;
  for (int k = 0; k < count; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (Eigen::Index t = 0; t < N; ++t)
      acc += signal(t) * std::polar(1.0, -2.0 * std::numbers::pi * k * static_cast<double>(t) / N);
    out(k) = std::abs(acc) / static_cast<double>(N);
  }
  return out;
}

}  // namespace stylemetric
