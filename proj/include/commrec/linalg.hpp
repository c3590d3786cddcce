#ifndef COMMREC_LINALG_HPP
#define COMMREC_LINALG_HPP

#include <cmath>

#include <Eigen/Dense>

namespace commrec {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Symmetric matrix of Euclidean distances between the rows of `points`.
template <typename Derived>
Matrix<typename Derived::Scalar> pairwise_euclidean(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.rows();
  Matrix<Scalar> dist = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

/// Row-wise L2 normalization; all-zero rows stay zero.
template <typename Derived>
Matrix<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& m) {
  Matrix<typename Derived::Scalar> out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto norm = out.row(i).norm();
    if (norm > 0) out.row(i) /= norm;
  }
  return out;
}

/// Numerically stable softmax of a score vector.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  const Scalar shift = scores.maxCoeff();
  Vector<Scalar> p = (scores.array() - shift).exp().matrix();
  return p / p.sum();
}

/// log(sum(exp(scores))) without overflow.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& scores) {
  using std::exp;
  using std::log;
  const auto shift = scores.maxCoeff();
  return shift + log((scores.array() - shift).exp().sum());
}

}  // namespace commrec

#endif  // COMMREC_LINALG_HPP
