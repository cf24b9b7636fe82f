#pragma once

// Scalar-generic kernels behind the style distance and the triplet loss.
// Triplets enter as difference columns: u = z_a - z_b, v = z_a - z_c, where
// z is a feature vector already mapped into metric space.

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace stylemetric {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class DerivedW, class DerivedD>
typename DerivedD::Scalar squared_distance_diagonal(const Eigen::MatrixBase<DerivedW>& w,
                                                    const Eigen::MatrixBase<DerivedD>& diff) {
  return (w.array() * diff.array().square()).sum();
}

template <class DerivedW, class DerivedD>
typename DerivedD::Scalar squared_distance_full(const Eigen::MatrixBase<DerivedW>& W,
                                                const Eigen::MatrixBase<DerivedD>& diff) {
  return diff.dot(W * diff);
}

/// log(1 + exp(m)) without overflow.
template <class Scalar>
Scalar softplus(Scalar m) {
  using std::exp;
  using std::log1p;
  return m > Scalar(0) ? m + log1p(exp(-m)) : log1p(exp(m));
}

template <class Scalar>
Scalar sigmoid(Scalar m) {
  using std::exp;
  if (m >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-m));
  const Scalar e = exp(m);
  return e / (Scalar(1) + e);
}

/// Precomputed u∘u - v∘v per triplet column; the diagonal margin is q·w.
template <class DerivedU, class DerivedV>
MatrixX<typename DerivedU::Scalar> diagonal_margin_basis(const Eigen::MatrixBase<DerivedU>& U,
                                                         const Eigen::MatrixBase<DerivedV>& V) {
  return (U.array().square() - V.array().square()).matrix();
}

/// Σ softplus(qₜ·w) + λ Σ wᵢ for w ≥ 0. Writes the gradient when asked.
template <class Scalar>
Scalar diagonal_triplet_loss(const VectorX<Scalar>& w, const MatrixX<Scalar>& Q, Scalar lambda,
                             VectorX<Scalar>* grad = nullptr) {
  const VectorX<Scalar> margins = Q.transpose() * w;
  Scalar loss = lambda * w.sum();
  for (Eigen::Index t = 0; t < margins.size(); ++t) loss += softplus(margins(t));
  if (grad) {
    VectorX<Scalar> s(margins.size());
    for (Eigen::Index t = 0; t < margins.size(); ++t) s(t) = sigmoid(margins(t));
    *grad = Q * s;
    grad->array() += lambda;
  }
  return loss;
}

/// Σ softplus(uᵀWu - vᵀWv) + λ tr(W). The gradient is taken over all d² entries.
template <class Scalar>
Scalar full_triplet_loss(const MatrixX<Scalar>& W, const MatrixX<Scalar>& U, const MatrixX<Scalar>& V,
                         Scalar lambda, MatrixX<Scalar>* grad = nullptr) {
  const MatrixX<Scalar> WU = W * U;
  const MatrixX<Scalar> WV = W * V;
  const VectorX<Scalar> margins =
      (U.array() * WU.array()).colwise().sum().transpose() - (V.array() * WV.array()).colwise().sum().transpose();
  Scalar loss = lambda * W.trace();
  for (Eigen::Index t = 0; t < margins.size(); ++t) loss += softplus(margins(t));
  if (grad) {
    VectorX<Scalar> s(margins.size());
    for (Eigen::Index t = 0; t < margins.size(); ++t) s(t) = sigmoid(margins(t));
    *grad = U * s.asDiagonal() * U.transpose() - V * s.asDiagonal() * V.transpose();
    grad->diagonal().array() += lambda;
  }
  return loss;
}

template <class Scalar>
VectorX<Scalar> project_nonnegative(const VectorX<Scalar>& w) {
  return w.cwiseMax(Scalar(0));
}

/// Nearest PSD matrix in Frobenius norm: symmetrize, clamp eigenvalues at 0.
template <class Scalar>
MatrixX<Scalar> project_psd(const MatrixX<Scalar>& W) {
  const MatrixX<Scalar> S = (W + W.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(S);
  const VectorX<Scalar> lam = eig.eigenvalues().cwiseMax(Scalar(0));
  MatrixX<Scalar> P = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  return (P + P.transpose()) / Scalar(2);
}

}  // namespace stylemetric
