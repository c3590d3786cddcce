#include "commrec/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "commrec/error.hpp"

namespace commrec {

using nlohmann::json;

namespace {

double squared_norm(const MaxEntParams<double>& p) {
  return p.weights.squaredNorm() + p.intercepts.squaredNorm();
}

MaxEntParams<double> step(const MaxEntParams<double>& p, const MaxEntParams<double>& dir, double t) {
  return {p.weights + t * dir.weights, p.intercepts + t * dir.intercepts};
}

}  // namespace

Eigen::VectorXd MaxEntModel::probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension()) {
    throw InvalidArgument("feature dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(dimension()));
  }
  const Eigen::VectorXd scores = params.weights * x + params.intercepts;
  const Eigen::VectorXd present = softmax(scores);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(class_count));
  for (std::size_t r = 0; r < present_classes.size(); ++r) {
    full(present_classes[r]) = present(static_cast<Eigen::Index>(r));
  }
  return full;
}

MaxEntModel train_maxent(const Eigen::MatrixXd& features, std::span<const int> labels,
                         std::size_t class_count, const MaxEntOptions& options) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw InvalidArgument("feature rows and labels differ in length");
  }
  if (labels.empty()) throw InvalidArgument("MaxEnt training needs at least one example");
  if (!features.allFinite()) throw InvalidArgument("non-finite feature value in MaxEnt input");
  if (options.lambda < 0.0) throw InvalidArgument("lambda must be nonnegative");

  std::map<int, int> compact;
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, class_count)");
    }
    compact.emplace(y, 0);
  }
  MaxEntModel model;
  model.class_count = class_count;
  model.lambda = options.lambda;
  for (auto& [label, row] : compact) {
    row = static_cast<int>(model.present_classes.size());
    model.present_classes.push_back(label);
  }
  std::vector<int> y;
  y.reserve(labels.size());
  for (int label : labels) y.push_back(compact.at(label));

  const auto k = static_cast<Eigen::Index>(model.present_classes.size());
  MaxEntParams<double> theta{Eigen::MatrixXd::Zero(k, features.cols()), Eigen::VectorXd::Zero(k)};

  // Step bound from the curvature of the summed log-likelihood.
  const double curvature =
      0.5 * (features.rowwise().squaredNorm().sum() + static_cast<double>(features.rows())) +
      options.lambda;
  double t = 1.0 / curvature;

  const double lambda = options.lambda;
  double f = maxent_objective(theta, features, y, lambda);
  auto& record = model.convergence;
  record.objective_trace.push_back(f);
  MaxEntParams<double> g = maxent_gradient(theta, features, y, lambda);
  double gnorm2 = squared_norm(g);

  while (record.iterations < options.max_iterations) {
    if (std::sqrt(gnorm2) <= options.gradient_tolerance) {
      record.converged = true;
      break;
    }
    ++record.iterations;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      MaxEntParams<double> trial = step(theta, g, t);
      const double trial_f = maxent_objective(trial, features, y, lambda);
      if (trial_f >= f + 1e-4 * t * gnorm2) {
        theta = std::move(trial);
        f = trial_f;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // step underflow: at the optimum up to rounding
    record.objective_trace.push_back(f);
    g = maxent_gradient(theta, features, y, lambda);
    gnorm2 = squared_norm(g);
    t *= 2.0;
  }
  if (!record.converged && std::sqrt(gnorm2) <= options.gradient_tolerance) record.converged = true;
  record.gradient_norm = std::sqrt(gnorm2);
  record.objective = f;
  model.params = std::move(theta);
  return model;
}

CommunityPrediction predict_community(const MaxEntModel& model,
                                      const Eigen::Ref<const Eigen::VectorXd>& x) {
  CommunityPrediction out;
  out.distribution = model.probabilities(x);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < out.distribution.size(); ++c) {
    if (out.distribution(c) > out.distribution(best)) best = c;
  }
  out.label = static_cast<int>(best);
  return out;
}

json maxent_to_json(const MaxEntModel& model) {
  json weights = json::array();
  for (Eigen::Index r = 0; r < model.params.weights.rows(); ++r) {
    weights.push_back(std::vector<double>(model.params.weights.row(r).begin(),
                                          model.params.weights.row(r).end()));
  }
  const auto& c = model.convergence;
  return json{{"class_count", model.class_count},
              {"present_classes", model.present_classes},
              {"dimension", model.dimension()},
              {"lambda", model.lambda},
              {"weights", std::move(weights)},
              {"intercepts", std::vector<double>(model.params.intercepts.begin(),
                                                 model.params.intercepts.end())},
              {"convergence",
               {{"iterations", c.iterations},
                {"gradient_norm", c.gradient_norm},
                {"objective", c.objective},
                {"converged", c.converged}}}};
}

MaxEntModel maxent_from_json(const json& doc) {
  MaxEntModel model;
  model.class_count = doc.at("class_count").get<std::size_t>();
  model.present_classes = doc.at("present_classes").get<std::vector<int>>();
  model.lambda = doc.at("lambda").get<double>();
  const auto dim = doc.at("dimension").get<Eigen::Index>();
  const auto& rows = doc.at("weights");
  const auto k = static_cast<Eigen::Index>(model.present_classes.size());
  if (static_cast<Eigen::Index>(rows.size()) != k) throw InvalidArgument("maxent weight rows mismatch");
  model.params.weights.resize(k, dim);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != dim) throw InvalidArgument("maxent weight width mismatch");
    model.params.weights.row(r) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), dim);
  }
  const auto b = doc.at("intercepts").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(b.size()) != k) throw InvalidArgument("maxent intercepts mismatch");
  model.params.intercepts = Eigen::Map<const Eigen::VectorXd>(b.data(), k);
  const auto& c = doc.at("convergence");
  model.convergence.iterations = c.value("iterations", std::size_t{0});
  model.convergence.gradient_norm = c.value("gradient_norm", 0.0);
  model.convergence.objective = c.value("objective", 0.0);
  model.convergence.converged = c.value("converged", false);
  return model;
}

}  // namespace commrec
