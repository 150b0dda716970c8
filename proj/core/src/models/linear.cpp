#include "injuryrisk/models/linear.hpp"

#include <cmath>
#include <numeric>

#include "injuryrisk/common.hpp"
#include "injuryrisk/models/dataset.hpp"
#include "injuryrisk/random.hpp"

namespace injuryrisk::models {

double LogisticRegression::objective(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& w,
                                     double b, double l2) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += y[static_cast<std::size_t>(i)] ? softplus(-z(i)) : softplus(z(i));
  }
  return loss / static_cast<double>(z.size()) + l2 * w.squaredNorm();
}

LogisticRegression LogisticRegression::train(const Eigen::MatrixXd& x, std::span<const int> y,
                                             const LogitParams& params) {
  require_both_classes(y);
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw PreconditionError("logit: x/y length mismatch");
  const auto n = static_cast<double>(x.rows());
  LogisticRegression m;
  m.weights_ = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd target(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) target(i) = y[static_cast<std::size_t>(i)];

  for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
    const double loss = objective(x, y, m.weights_, m.bias_, params.l2);
    if (!std::isfinite(loss)) throw Error("logit: non-finite loss at epoch " + std::to_string(epoch));
    m.loss_history_.push_back(loss);

    Eigen::VectorXd residual = (x * m.weights_).array() + m.bias_;
    residual = residual.unaryExpr([](double z) { return sigmoid(z); }) - target;
    const Eigen::VectorXd grad_w = x.transpose() * residual / n + 2.0 * params.l2 * m.weights_;
    const double grad_b = residual.sum() / n;
    const double grad_inf = std::max(grad_w.size() ? grad_w.cwiseAbs().maxCoeff() : 0.0, std::abs(grad_b));
    if (grad_inf < params.gradient_tolerance) break;

    m.weights_ -= params.learning_rate * grad_w;
    m.bias_ -= params.learning_rate * grad_b;
    m.epochs_ = epoch + 1;
  }
  m.loss_history_.push_back(objective(x, y, m.weights_, m.bias_, params.l2));
  return m;
}

double LogisticRegression::score(const Eigen::VectorXd& row) const { return sigmoid(decision(row)); }

nlohmann::json LogisticRegression::to_json() const {
  return {{"weights", models::to_json(weights_)}, {"bias", bias_}, {"epochs", epochs_}};
}

LogisticRegression LogisticRegression::from_json(const nlohmann::json& j) {
  LogisticRegression m;
  m.weights_ = vector_from_json(j.at("weights"));
  m.bias_ = j.at("bias").get<double>();
  m.epochs_ = j.value("epochs", 0);
  return m;
}

LinearSvc LinearSvc::train(const Eigen::MatrixXd& x, std::span<const int> y, const SvcParams& params,
                           std::uint64_t seed) {
  require_both_classes(y);
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw PreconditionError("svc: x/y length mismatch");
  LinearSvc m;
  m.weights_ = Eigen::VectorXd::Zero(x.cols());
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  const double lr = params.learning_rate;
  for (int pass = 0; pass < params.passes; ++pass) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const auto row = x.row(static_cast<Eigen::Index>(i)).transpose();
      const double label = y[i] ? 1.0 : -1.0;
      const double margin = label * (m.weights_.dot(row) + m.bias_);
      m.weights_ *= 1.0 - lr * 2.0 * params.l2;
      if (margin < 1.0) {
        m.weights_ += lr * label * row;
        m.bias_ += lr * label;
      }
    }
    if (!std::isfinite(m.bias_) || !m.weights_.allFinite()) {
      throw Error("svc: non-finite parameters after pass " + std::to_string(pass));
    }
  }
  return m;
}

double LinearSvc::score(const Eigen::VectorXd& row) const { return sigmoid(decision(row)); }

nlohmann::json LinearSvc::to_json() const { return {{"weights", models::to_json(weights_)}, {"bias", bias_}}; }

LinearSvc LinearSvc::from_json(const nlohmann::json& j) {
  LinearSvc m;
  m.weights_ = vector_from_json(j.at("weights"));
  m.bias_ = j.at("bias").get<double>();
  return m;
}

}  // namespace injuryrisk::models
