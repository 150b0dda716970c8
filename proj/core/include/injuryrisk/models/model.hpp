#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "injuryrisk/models/dataset.hpp"
#include "injuryrisk/models/linear.hpp"
#include "injuryrisk/models/lstm.hpp"
#include "injuryrisk/models/trees.hpp"

namespace injuryrisk::models {

enum class ModelKind { logit, lstm, randomforest, svc, xgboost };

/// Grid order (alphabetical).
inline constexpr std::array<ModelKind, 5> kAllModels = {ModelKind::logit, ModelKind::lstm, ModelKind::randomforest,
                                                        ModelKind::svc, ModelKind::xgboost};

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view text);

inline constexpr double kDefaultThreshold = 0.5;

/// Strict: a score equal to the threshold is class 0.
inline int classify_score(double score, double threshold = kDefaultThreshold) { return score > threshold ? 1 : 0; }

struct ModelConfig {
  ModelKind kind = ModelKind::logit;
  LogitParams logit;
  SvcParams svc;
  ForestParams forest;
  BoostParams boost;
  LstmParams lstm;
  std::uint64_t seed = 0;

  /// Hyperparameters of `kind` only, plus kind and seed.
  nlohmann::json to_json() const;
};

/// A fitted model with its scaler and the feature layout it was trained on.
class TrainedModel {
 public:
  using Impl = std::variant<LogisticRegression, LinearSvc, RandomForest, GradientBoosting, Lstm>;

  /// Fits the scaler on `train` and trains `config.kind` on scaled data.
  static TrainedModel train(const Dataset& train, const ModelConfig& config);

  ModelKind kind() const noexcept { return kind_; }
  const std::vector<std::string>& feature_names() const noexcept { return names_; }
  int n_in() const noexcept { return n_in_; }
  const Scaler& scaler() const noexcept { return scaler_; }
  const Impl& impl() const noexcept { return impl_; }
  const nlohmann::json& manifest() const noexcept { return manifest_; }

  /// Throws PreconditionError unless `names` equals the training layout.
  void check_features(std::span<const std::string> names) const;

  /// Score of one unscaled flattened row.
  double score(std::span<const double> row) const;
  /// Scores of unscaled rows.
  Eigen::VectorXd score_batch(const Eigen::MatrixXd& rows) const;
  int classify(std::span<const double> row, double threshold = kDefaultThreshold) const {
    return classify_score(score(row), threshold);
  }

  /// `model_<kind>_<hash>`.
  std::string id() const;
  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);

  /// Writes `<dir>/<id>.json` and returns the path.
  std::filesystem::path save(const std::filesystem::path& dir) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  ModelKind kind_ = ModelKind::logit;
  std::vector<std::string> names_;
  int n_in_ = 1;
  Scaler scaler_;
  Impl impl_;
  nlohmann::json manifest_;
};

}  // namespace injuryrisk::models
