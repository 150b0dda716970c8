#include "injuryrisk/synthesis.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

#include "injuryrisk/random.hpp"

namespace injuryrisk::synthesis {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw PreconditionError("normal_quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

std::vector<double> normal_scores(std::span<const double> column) {
  const std::size_t n = column.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return column[a] < column[b]; });
  std::vector<double> scores(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && column[order[j + 1]] == column[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    const double z = normal_quantile(avg_rank / static_cast<double>(n + 1));
    for (std::size_t k = i; k <= j; ++k) scores[order[k]] = z;
    i = j + 1;
  }
  return scores;
}

Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& c) {
  const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(kEigenFloor);
  Eigen::MatrixXd repaired = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::VectorXd inv_sqrt = repaired.diagonal().cwiseSqrt().cwiseInverse();
  repaired = inv_sqrt.asDiagonal() * repaired * inv_sqrt.asDiagonal();
  repaired = 0.5 * (repaired + repaired.transpose());
  repaired.diagonal().setOnes();
  return repaired;
}

CopulaModel fit(std::span<const WindowSample> train, int label) {
  std::vector<const WindowSample*> rows;
  for (const auto& s : train) {
    if (s.label == label) rows.push_back(&s);
  }
  if (rows.size() < kMinCopulaSamples) {
    throw PreconditionError("copula fit needs at least " + std::to_string(kMinCopulaSamples) + " samples of class " +
                            std::to_string(label) + ", got " + std::to_string(rows.size()));
  }
  const std::size_t n = rows.size();
  const std::size_t p = rows.front()->x.size();
  CopulaModel model;
  model.label = label;
  model.sample_count = n;
  model.quantiles.resize(p);

  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<double> column(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i]->x.size() != p) throw PreconditionError("copula fit: ragged training rows");
      column[i] = rows[i]->x[j];
    }
    const auto scores = normal_scores(column);
    for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scores[i];
    model.quantiles[j] = column;
    std::sort(model.quantiles[j].begin(), model.quantiles[j].end());
  }

  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd centered = z.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (Eigen::Index a = 0; a < corr.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < corr.cols(); ++b) {
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      const double r = denom > 1e-12 ? std::clamp(cov(a, b) / denom, -1.0, 1.0) : 0.0;
      corr(a, b) = corr(b, a) = r;
    }
  }
  model.correlation = repair_correlation(corr);
  return model;
}

namespace {

double invert_quantile(const std::vector<double>& sorted, double u) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = std::clamp(u, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

Eigen::MatrixXd latent_factor(const Eigen::MatrixXd& corr) {
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

WindowSample synthetic_row(std::vector<double> x, int label) {
  WindowSample s;
  s.player = PlayerId("synthetic");
  s.x = std::move(x);
  s.label = label;
  s.provenance = windowing::Provenance::synthetic;
  return s;
}

}  // namespace

std::vector<WindowSample> sample(const CopulaModel& model, std::size_t n, std::uint64_t seed) {
  std::vector<WindowSample> out;
  if (n == 0) return out;
  const std::size_t p = model.dimension();
  const Eigen::MatrixXd factor = latent_factor(model.correlation);
  Rng rng(seed);
  Eigen::VectorXd e(static_cast<Eigen::Index>(p));
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = rng.normal();
    const Eigen::VectorXd z = factor * e;
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) {
      x[j] = invert_quantile(model.quantiles[j], normal_cdf(z(static_cast<Eigen::Index>(j))));
    }
    out.push_back(synthetic_row(std::move(x), model.label));
  }
  return out;
}

std::vector<WindowSample> jitter_sample(std::span<const WindowSample> train, int label, std::size_t n,
                                        std::uint64_t seed) {
  std::vector<const WindowSample*> rows;
  for (const auto& s : train) {
    if (s.label == label) rows.push_back(&s);
  }
  std::vector<WindowSample> out;
  if (n == 0) return out;
  if (rows.empty()) throw PreconditionError("jitter resampling needs at least one sample of class " + std::to_string(label));
  const std::size_t p = rows.front()->x.size();
  std::vector<double> sd(p, 0.0), lo(p), hi(p);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    lo[j] = hi[j] = rows.front()->x[j];
    for (const auto* r : rows) {
      mean += r->x[j];
      lo[j] = std::min(lo[j], r->x[j]);
      hi[j] = std::max(hi[j], r->x[j]);
    }
    mean /= static_cast<double>(rows.size());
    if (rows.size() > 1) {
      double ss = 0.0;
      for (const auto* r : rows) ss += (r->x[j] - mean) * (r->x[j] - mean);
      sd[j] = std::sqrt(ss / static_cast<double>(rows.size() - 1));
    }
  }
  Rng rng(seed);
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto* src = rows[rng.below(rows.size())];
    std::vector<double> x(p);
    for (std::size_t j = 0; j < p; ++j) {
      x[j] = std::clamp(src->x[j] + kJitterFraction * sd[j] * rng.normal(), lo[j], hi[j]);
    }
    out.push_back(synthetic_row(std::move(x), label));
  }
  return out;
}

BalancePlan plan_balance(std::size_t positives, std::size_t negatives, double proportion, double multiplier) {
  if (!(proportion > 0.0 && proportion < 1.0)) throw PreconditionError("event proportion must be in (0, 1)");
  if (!(multiplier >= 1.0)) throw PreconditionError("synthetic multiplier must be >= 1");
  auto target_pos = [proportion](std::size_t total) {
    return static_cast<std::size_t>(std::llround(proportion * static_cast<double>(total)));
  };
  const auto base = static_cast<std::size_t>(std::llround(multiplier * static_cast<double>(positives + negatives)));
  if (positives > target_pos(base)) {
    const double minimum = static_cast<double>(positives) / static_cast<double>(base);
    throw PreconditionError("event proportion " + format_double(proportion) +
                            " is unreachable without deleting real positives; minimum feasible proportion is " +
                            format_double(minimum));
  }
  std::size_t total = base;
  while (total - target_pos(total) < negatives) ++total;
  BalancePlan plan;
  plan.total = total;
  plan.positives = target_pos(total);
  plan.add_positive = plan.positives - positives;
  plan.add_negative = total - plan.positives - negatives;
  return plan;
}

BalanceResult balance(std::span<const WindowSample> train, double proportion, double multiplier, std::uint64_t seed,
                      const std::string& kind) {
  if (kind != "copula" && kind != "jitter") throw ConfigError("synthesizer kind must be copula or jitter");
  std::size_t pos = 0, neg = 0;
  for (const auto& s : train) (s.label ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw PreconditionError("balancing needs both classes in the training set");

  BalanceResult result;
  result.plan = plan_balance(pos, neg, proportion, multiplier);
  result.samples.assign(train.begin(), train.end());

  auto generate = [&](int label, std::size_t n, std::string& used) {
    if (n == 0) {
      used = "none";
      return;
    }
    const std::size_t available = label ? pos : neg;
    const std::uint64_t stream_seed = Rng::mix(seed, static_cast<std::uint64_t>(label));
    std::vector<WindowSample> rows;
    if (kind == "jitter" || available < kMinCopulaSamples) {
      used = "jitter";
      rows = jitter_sample(train, label, n, stream_seed);
    } else {
      used = "copula";
      rows = sample(fit(train, label), n, stream_seed);
    }
    for (auto& r : rows) result.samples.push_back(std::move(r));
  };
  generate(1, result.plan.add_positive, result.positive_synthesizer);
  generate(0, result.plan.add_negative, result.negative_synthesizer);
  return result;
}

}  // namespace injuryrisk::synthesis
