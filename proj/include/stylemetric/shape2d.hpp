#pragma once

#include <vector>

#include <Eigen/Core>

#include "stylemetric/mesh_io.hpp"

namespace stylemetric {

/// Set-pixel centroid in (u, v) pixel-centre coordinates. Empty mask -> (0, 0).
Eigen::Vector2d mask_centroid(const Mask& mask);

/// Zernike moment magnitudes |Z_nm| for 0 <= m <= n <= max_order, n - m even,
/// ordered by n then m. Moments are taken on the unit disc centred at the mask
/// centroid with radius reaching the farthest set pixel, so magnitudes are
/// invariant to translation, scale and rotation of the shape.
/// With skip_dc the (0,0) term is dropped.
Eigen::VectorXd zernike_magnitudes(const Mask& mask, int max_order, bool skip_dc = false);

/// Number of (n, m) pairs produced by zernike_magnitudes.
int zernike_count(int max_order);

/// Outer boundary of the largest 8-connected component, as a closed list of
/// pixel coordinates traced clockwise (Moore neighbour tracing).
std::vector<Eigen::Vector2i> outer_contour(const Mask& mask);

/// Distance from the mask centroid to `samples` points spaced uniformly in
/// arc length along the outer contour, divided by the maximum sampled
/// distance. Empty mask -> zeros.
Eigen::VectorXd centroid_distance_signal(const Mask& mask, int samples);

/// |DFT_k(signal)| / N for k = 0 .. count-1.
Eigen::VectorXd fourier_magnitudes(const Eigen::VectorXd& signal, int count);

}  // namespace stylemetric
