#pragma once
// Test-side references that do not go through the library's metric code.

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stylemetric/feature_vector.hpp"
#include "stylemetric/triplet_record.hpp"

namespace testing {

inline double weighted_sq(const Eigen::VectorXd& w, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) s += w(i) * (x(i) - y(i)) * (x(i) - y(i));
  return s;
}

/// Random (a of type X; b, c of type Y) labelled by a hidden diagonal metric,
/// each label flipped with probability `noise`.
inline std::vector<stylemetric::TripletRecord> oracle_triplets(const stylemetric::FeatureSet& fs,
                                                               const Eigen::VectorXd& w_star, const std::string& x_type,
                                                               const std::string& y_type, int n, unsigned seed,
                                                               double noise = 0.0) {
  const auto xs = fs.ids_of_type(x_type);
  const auto ys = fs.ids_of_type(y_type);
  std::mt19937 gen(seed);
  std::uniform_int_distribution<std::size_t> px(0, xs.size() - 1), py(0, ys.size() - 1);
  std::bernoulli_distribution flip(noise);
  std::vector<stylemetric::TripletRecord> out;
  while (static_cast<int>(out.size()) < n) {
    const std::string a = xs[px(gen)];
    std::string b = ys[py(gen)], c = ys[py(gen)];
    if (b == c || a == b || a == c) continue;
    const auto& va = fs.vectors.at(a).values;
    const double db = weighted_sq(w_star, va, fs.vectors.at(b).values);
    const double dc = weighted_sq(w_star, va, fs.vectors.at(c).values);
    if (db == dc) continue;
    if (db > dc) std::swap(b, c);
    if (flip(gen)) std::swap(b, c);
    out.push_back({a, b, c, stylemetric::TripletSource::simulated, {x_type, y_type}});
  }
  return out;
}

}  // namespace testing
