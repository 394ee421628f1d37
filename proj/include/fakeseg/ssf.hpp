#pragma once

#include <Eigen/Core>

#include "fakeseg/error.hpp"

namespace fakeseg {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Per-channel scale and shift, y = gamma * x + beta.
template <typename Scalar>
struct SsfParams {
  RowVector<Scalar> gamma;
  RowVector<Scalar> beta;

  /// Identity modulation: gamma = 1, beta = 0.
  static SsfParams identity(Eigen::Index dim) {
    return {RowVector<Scalar>::Ones(dim), RowVector<Scalar>::Zero(dim)};
  }

  Eigen::Index dim() const { return gamma.size(); }
};

template <typename Scalar>
struct SsfGrads {
  Matrix<Scalar> x;
  RowVector<Scalar> gamma;
  RowVector<Scalar> beta;
};

namespace detail {
template <typename Scalar>
void check_ssf_dims(Eigen::Index cols, const SsfParams<Scalar>& p) {
  if (p.gamma.size() != p.beta.size()) throw ShapeError("ssf: gamma and beta differ in size");
  if (cols != p.gamma.size()) throw ShapeError("ssf: feature dimension does not match parameters");
}
}  // namespace detail

/// Applies y[i, j] = gamma[j] * x[i, j] + beta[j] to every row of x.
template <typename Scalar, typename Derived>
Matrix<Scalar> ssf_forward(const Eigen::MatrixBase<Derived>& x, const SsfParams<Scalar>& p) {
  detail::check_ssf_dims(x.cols(), p);
  Matrix<Scalar> y = x.array().rowwise() * p.gamma.array();
  y.array().rowwise() += p.beta.array();
  return y;
}

/// Gradients of a scalar loss through ssf_forward given dL/dy.
template <typename Scalar, typename Derived, typename DerivedG>
SsfGrads<Scalar> ssf_backward(const Eigen::MatrixBase<Derived>& x, const SsfParams<Scalar>& p,
                              const Eigen::MatrixBase<DerivedG>& upstream) {
  detail::check_ssf_dims(x.cols(), p);
  if (upstream.rows() != x.rows() || upstream.cols() != x.cols()) {
    throw ShapeError("ssf: upstream gradient shape differs from input");
  }
  SsfGrads<Scalar> g;
  g.x = upstream.array().rowwise() * p.gamma.array();
  g.gamma = (x.array() * upstream.array()).colwise().sum();
  g.beta = upstream.colwise().sum();
  return g;
}

}  // namespace fakeseg
