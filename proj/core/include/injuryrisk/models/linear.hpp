#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace injuryrisk::models {

struct LogitParams {
  double l2 = 1e-4;
  double learning_rate = 0.1;
  int max_epochs = 2000;
  double gradient_tolerance = 1e-6;
};

/// L2-regularised logistic regression fitted by full-batch gradient descent
/// on mean log-loss + l2 * |w|^2 (intercept unpenalised).
class LogisticRegression {
 public:
  static LogisticRegression train(const Eigen::MatrixXd& x, std::span<const int> y, const LogitParams& params);

  double decision(const Eigen::VectorXd& row) const { return weights_.dot(row) + bias_; }
  double score(const Eigen::VectorXd& row) const;

  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }
  /// Objective value before each update, then the final value.
  const std::vector<double>& loss_history() const noexcept { return loss_history_; }
  int epochs_run() const noexcept { return epochs_; }

  /// Regularised objective for given parameters.
  static double objective(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& w, double b,
                          double l2);

  nlohmann::json to_json() const;
  static LogisticRegression from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  std::vector<double> loss_history_;
  int epochs_ = 0;
};

struct SvcParams {
  double l2 = 1e-3;
  double learning_rate = 0.01;
  int passes = 50;
};

/// Linear SVM: hinge loss + l2 * |w|^2 by per-sample SGD over seeded
/// shuffles. Scores are sigmoid(margin).
class LinearSvc {
 public:
  static LinearSvc train(const Eigen::MatrixXd& x, std::span<const int> y, const SvcParams& params,
                         std::uint64_t seed);

  double decision(const Eigen::VectorXd& row) const { return weights_.dot(row) + bias_; }
  double score(const Eigen::VectorXd& row) const;

  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

  nlohmann::json to_json() const;
  static LinearSvc from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
};

}  // namespace injuryrisk::models
