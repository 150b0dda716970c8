#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "injuryrisk/windowing.hpp"

namespace injuryrisk::synthesis {

using windowing::WindowSample;

inline constexpr std::size_t kMinCopulaSamples = 5;
inline constexpr double kEigenFloor = 1e-8;
inline constexpr double kJitterFraction = 0.05;

double normal_cdf(double z);
/// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

/// Gaussian copula over empirical marginals, fitted on one class.
struct CopulaModel {
  std::vector<std::vector<double>> quantiles;  // sorted training values per feature
  Eigen::MatrixXd correlation;                 // latent normal-score correlation, repaired PSD
  int label = 0;
  std::size_t sample_count = 0;

  std::size_t dimension() const noexcept { return quantiles.size(); }
};

/// Throws PreconditionError with fewer than kMinCopulaSamples rows of `label`.
CopulaModel fit(std::span<const WindowSample> train, int label);

/// Draws `n` synthetic rows; deterministic in `seed`.
std::vector<WindowSample> sample(const CopulaModel& model, std::size_t n, std::uint64_t seed);

/// Resamples real rows of `label` and adds Gaussian noise at 5% of each
/// feature's SD. Used when a class is too small for the copula.
std::vector<WindowSample> jitter_sample(std::span<const WindowSample> train, int label, std::size_t n,
                                        std::uint64_t seed);

/// Symmetric, unit diagonal, eigenvalues clipped at kEigenFloor.
Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& c);

/// Normal scores of a column via average ranks: Phi^-1(rank / (n + 1)).
std::vector<double> normal_scores(std::span<const double> column);

struct BalancePlan {
  std::size_t total = 0;
  std::size_t positives = 0;
  std::size_t add_positive = 0;
  std::size_t add_negative = 0;
};

/// Counts needed to reach `proportion` positives in a set of
/// round(multiplier * |train|) rows, grown further when the real negatives
/// alone exceed the negative share. Throws PreconditionError when the real
/// positives already exceed the target.
BalancePlan plan_balance(std::size_t positives, std::size_t negatives, double proportion, double multiplier);

struct BalanceResult {
  std::vector<WindowSample> samples;  // real rows first, unmodified
  BalancePlan plan;
  std::string positive_synthesizer;   // "copula" | "jitter" | "none"
  std::string negative_synthesizer;
};

BalanceResult balance(std::span<const WindowSample> train, double proportion, double multiplier, std::uint64_t seed,
                      const std::string& kind = "copula");

}  // namespace injuryrisk::synthesis
