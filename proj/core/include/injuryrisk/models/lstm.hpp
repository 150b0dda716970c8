#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace injuryrisk::models {

struct LstmParams {
  int hidden = 16;
  double learning_rate = 0.05;
  int epochs = 300;
  double clip_norm = 5.0;
  double init_scale = 0.1;
  double forget_bias = 1.0;
  // Optional early stopping on a held-out slice of the training data.
  bool early_stopping = false;
  double validation_fraction = 0.2;
  int patience = 20;
};

/// Time-major batch: steps[t] is (samples x features) for step t, oldest first.
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> steps;

  Eigen::Index samples() const noexcept { return steps.empty() ? 0 : steps.front().rows(); }
  Eigen::Index features() const noexcept { return steps.empty() ? 0 : steps.front().cols(); }

  /// Unflatten feature-major rows (column f * n_in + t) into steps.
  static SequenceBatch from_flat(const Eigen::MatrixXd& flat, int n_in);
  SequenceBatch rows(std::span<const Eigen::Index> idx) const;
};

/// Single-layer LSTM with gate order [input, forget, output, candidate] and a
/// sigmoid readout on the final hidden state. Loss is mean binary cross-entropy.
class Lstm {
 public:
  static Lstm initialise(int features, const LstmParams& params, std::uint64_t seed);
  static Lstm train(const SequenceBatch& x, std::span<const int> y, const LstmParams& params, std::uint64_t seed);

  Eigen::VectorXd logits(const SequenceBatch& x) const;
  Eigen::VectorXd scores(const SequenceBatch& x) const;
  double loss(const SequenceBatch& x, std::span<const int> y) const;
  /// Gradient of loss() with respect to flat() by backpropagation through time.
  Eigen::VectorXd gradient(const SequenceBatch& x, std::span<const int> y) const;

  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& theta);

  int hidden() const noexcept { return static_cast<int>(wh_.cols()); }
  int features() const noexcept { return static_cast<int>(wx_.cols()); }
  double readout_bias() const noexcept { return c_; }
  const std::vector<double>& loss_history() const noexcept { return loss_history_; }

  nlohmann::json to_json() const;
  static Lstm from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd wx_;  // 4H x D
  Eigen::MatrixXd wh_;  // 4H x H
  Eigen::VectorXd b_;   // 4H
  Eigen::VectorXd v_;   // H
  double c_ = 0.0;
  std::vector<double> loss_history_;
};

}  // namespace injuryrisk::models
