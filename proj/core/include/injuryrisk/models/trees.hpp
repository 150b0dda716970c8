#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace injuryrisk::models {

/// Binary decision tree stored as a flat node array; node 0 is the root.
/// Rows with x[feature] <= threshold go left.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output
  };

  const Node& leaf_for(const Eigen::VectorXd& row) const;
  double predict(const Eigen::VectorXd& row) const { return leaf_for(row).value; }

  std::vector<Node>& nodes() noexcept { return nodes_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int depth() const;

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);

 private:
  std::vector<Node> nodes_;
};

struct ForestParams {
  int trees = 100;
  int max_depth = 8;
  int min_leaf = 5;
  int max_features = 0;  // 0: floor(sqrt(p))
  bool bootstrap = true;
};

/// Weighted Gini impurity of a two-way split (for oracles and the builder).
double split_gini(double left_pos, double left_n, double right_pos, double right_n);

/// CART trees on Gini impurity over bootstrap samples with a random feature
/// subset per split. Score is the fraction of trees voting positive.
class RandomForest {
 public:
  static RandomForest train(const Eigen::MatrixXd& x, std::span<const int> y, const ForestParams& params,
                            std::uint64_t seed);

  double score(const Eigen::VectorXd& row) const;
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::vector<DecisionTree> trees_;
};

struct BoostParams {
  int rounds = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  double l2 = 1.0;
  double min_child_weight = 1.0;
};

/// Gradient-boosted trees on logistic loss with second-order leaf weights
/// -G / (H + l2). Trees store raw weights; the learning rate is applied at
/// prediction time.
class GradientBoosting {
 public:
  static GradientBoosting train(const Eigen::MatrixXd& x, std::span<const int> y, const BoostParams& params);

  double margin(const Eigen::VectorXd& row) const;
  double score(const Eigen::VectorXd& row) const;

  double base_score() const noexcept { return base_score_; }
  double learning_rate() const noexcept { return learning_rate_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  nlohmann::json to_json() const;
  static GradientBoosting from_json(const nlohmann::json& j);

 private:
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<DecisionTree> trees_;
};

}  // namespace injuryrisk::models
