#ifndef COMMREC_MAXENT_HPP
#define COMMREC_MAXENT_HPP

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "commrec/linalg.hpp"

namespace commrec {

/// Weights (classes x features) and per-class intercepts.
template <typename Scalar>
struct MaxEntParams {
  Matrix<Scalar> weights;
  Vector<Scalar> intercepts;
};

/// Row-wise class scores X W^T + b.
template <typename Scalar, typename Derived>
Matrix<Scalar> maxent_scores(const MaxEntParams<Scalar>& params,
                             const Eigen::MatrixBase<Derived>& features) {
  Matrix<Scalar> scores = features * params.weights.transpose();
  scores.rowwise() += params.intercepts.transpose();
  return scores;
}

/// L2-penalized multinomial log-likelihood (summed over examples, intercepts
/// unpenalized): sum_i log p(y_i | x_i) - lambda/2 * ||W||^2.
template <typename Scalar, typename Derived>
Scalar maxent_objective(const MaxEntParams<Scalar>& params, const Eigen::MatrixBase<Derived>& features,
                        std::span<const int> labels, Scalar lambda) {
  const Matrix<Scalar> scores = maxent_scores(params, features);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    total += scores(i, labels[static_cast<std::size_t>(i)]) -
             log_sum_exp(scores.row(i).transpose());
  }
  return total - lambda / 2 * params.weights.squaredNorm();
}

/// Analytic gradient of maxent_objective: (Y - P)^T X - lambda W and (Y - P)^T 1.
template <typename Scalar, typename Derived>
MaxEntParams<Scalar> maxent_gradient(const MaxEntParams<Scalar>& params,
                                     const Eigen::MatrixBase<Derived>& features,
                                     std::span<const int> labels, Scalar lambda) {
  Matrix<Scalar> residual = maxent_scores(params, features);
  for (Eigen::Index i = 0; i < residual.rows(); ++i) {
    residual.row(i) = -softmax(residual.row(i).transpose()).transpose();
    residual(i, labels[static_cast<std::size_t>(i)]) += 1;
  }
  MaxEntParams<Scalar> grad;
  grad.weights = residual.transpose() * features - lambda * params.weights;
  grad.intercepts = residual.colwise().sum().transpose();
  return grad;
}

struct MaxEntOptions {
  double lambda = 1.0;
  double gradient_tolerance = 1e-6;
  std::size_t max_iterations = 10000;
};

struct ConvergenceRecord {
  std::size_t iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
  /// Objective after every accepted step, starting from the zero point.
  std::vector<double> objective_trace;
};

/// Multinomial maximum-entropy classifier. Classes absent from training get
/// probability zero; the fitted parameters cover only the present classes.
struct MaxEntModel {
  std::size_t class_count = 0;
  std::vector<int> present_classes;  // row r of the parameters is class present_classes[r]
  MaxEntParams<double> params;
  double lambda = 1.0;
  ConvergenceRecord convergence;

  std::size_t dimension() const { return static_cast<std::size_t>(params.weights.cols()); }
  /// Full distribution over `class_count` classes.
  Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Gradient ascent from zero with backtracking, so the objective never
/// decreases between iterations. Labels must lie in [0, class_count).
MaxEntModel train_maxent(const Eigen::MatrixXd& features, std::span<const int> labels,
                         std::size_t class_count, const MaxEntOptions& options = {});

struct CommunityPrediction {
  int label = 0;
  Eigen::VectorXd distribution;
};

/// Softmax over class scores; argmax with ties to the lower class index.
CommunityPrediction predict_community(const MaxEntModel& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& x);

nlohmann::json maxent_to_json(const MaxEntModel& model);
MaxEntModel maxent_from_json(const nlohmann::json& doc);

}  // namespace commrec

#endif  // COMMREC_MAXENT_HPP
