#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "injuryrisk/windowing.hpp"

namespace injuryrisk::models {

/// Row-major design matrix plus binary labels. `n_in` records how the
/// flattened columns fold back into a sequence (feature-major layout).
struct Dataset {
  std::vector<std::string> names;
  int n_in = 1;
  Eigen::MatrixXd x;
  std::vector<int> y;

  static Dataset from_samples(std::vector<std::string> names, int n_in,
                              std::span<const windowing::WindowSample> samples);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(x.cols()); }
  std::size_t positives() const noexcept;
  /// Content hash of names, shape, values and labels.
  std::string hash() const;
};

/// Throws PreconditionError unless both classes occur in `y`.
void require_both_classes(std::span<const int> y);

/// Per-column z-scoring fitted on training data only (sample SD, n - 1).
class Scaler {
 public:
  static constexpr double kMinSd = 1e-12;

  Scaler() = default;
  static Scaler fit(const Eigen::MatrixXd& train_x);

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd transform_row(std::span<const double> row) const;

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::VectorXd& sd() const noexcept { return sd_; }

  nlohmann::json to_json() const;
  static Scaler from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd sd_;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

nlohmann::json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace injuryrisk::models
