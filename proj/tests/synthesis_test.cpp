#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <map>

#include "injuryrisk/random.hpp"
#include "injuryrisk/synthesis.hpp"
#include "oracles.hpp"

using namespace injuryrisk;
using namespace injuryrisk::synthesis;
using windowing::Provenance;

namespace {

std::vector<WindowSample> rows(std::size_t n, int label, std::uint64_t seed, bool correlated = false) {
  Rng rng(seed);
  std::vector<WindowSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    WindowSample s;
    s.player = PlayerId("p1");
    s.label = label;
    const double a = rng.normal();
    const double b = correlated ? 0.7 * a + std::sqrt(1 - 0.49) * rng.normal() : rng.uniform();
    s.x = {a, b, rng.uniform(0, 10)};
    out.push_back(s);
  }
  return out;
}

std::vector<double> column(const std::vector<WindowSample>& v, std::size_t j) {
  std::vector<double> out;
  for (const auto& s : v) out.push_back(s.x[j]);
  return out;
}

std::vector<WindowSample> mixed(std::size_t neg, std::size_t pos) {
  auto a = rows(neg, 0, 1);
  const auto b = rows(pos, 1, 2);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(NormalQuantile, InvertsCdf) {
  for (double p : {1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-6}) EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
}

TEST(NormalScores, AverageRanks) {
  const std::vector<double> col = {3.0, 1.0, 3.0, 2.0};
  const auto z = normal_scores(col);
  // ranks 3.5, 1, 3.5, 2 over n + 1 = 5.
  EXPECT_DOUBLE_EQ(z[0], normal_quantile(3.5 / 5));
  EXPECT_DOUBLE_EQ(z[1], normal_quantile(1.0 / 5));
  EXPECT_EQ(z[0], z[2]);
}

TEST(Fit, IndependentFeatures) {
  const auto m = fit(rows(2000, 0, 3), 0);
  EXPECT_EQ(m.dimension(), 3u);
  EXPECT_LT(std::abs(m.correlation(0, 1)), 0.08);
  EXPECT_LT(std::abs(m.correlation(0, 2)), 0.08);
  EXPECT_EQ(m.sample_count, 2000u);
  for (const auto& q : m.quantiles) EXPECT_TRUE(std::is_sorted(q.begin(), q.end()));
}

TEST(Fit, DuplicatedColumnFullyCorrelated) {
  auto v = rows(300, 1, 4);
  for (auto& s : v) s.x[1] = s.x[0];
  const auto m = fit(v, 1);
  EXPECT_NEAR(m.correlation(0, 1), 1.0, 1e-6);
}

TEST(Fit, ConstantFeatureReproduced) {
  auto v = rows(50, 0, 5);
  for (auto& s : v) s.x[2] = 4.25;
  const auto out = sample(fit(v, 0), 500, 9);
  for (const auto& s : out) EXPECT_EQ(s.x[2], 4.25);
}

TEST(Fit, TooFewSamplesIsError) {
  EXPECT_THROW(fit(rows(4, 1, 1), 1), PreconditionError);
  EXPECT_THROW(fit(rows(100, 0, 1), 1), PreconditionError);
}

TEST(Fit, CorrelationIsPsd) {
  // More features than samples forces a rank-deficient estimate.
  Rng rng(6);
  std::vector<WindowSample> v;
  for (int i = 0; i < 6; ++i) {
    WindowSample s;
    s.label = 1;
    for (int j = 0; j < 12; ++j) s.x.push_back(rng.normal());
    v.push_back(s);
  }
  const auto m = fit(v, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.correlation);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
  for (Eigen::Index i = 0; i < m.correlation.rows(); ++i) EXPECT_NEAR(m.correlation(i, i), 1.0, 1e-12);
  EXPECT_TRUE(m.correlation.isApprox(m.correlation.transpose()));
}

TEST(RepairCorrelation, ClipsNegativeEigenvalues) {
  Eigen::MatrixXd c(3, 3);
  c << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  const auto r = repair_correlation(c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
  EXPECT_DOUBLE_EQ(r(0, 0), 1.0);
}

TEST(Sample, ZeroAndDeterminism) {
  const auto m = fit(rows(100, 1, 7), 1);
  EXPECT_TRUE(sample(m, 0, 1).empty());
  EXPECT_EQ(sample(m, 50, 42), sample(m, 50, 42));
  EXPECT_NE(sample(m, 50, 42), sample(m, 50, 43));
  for (const auto& s : sample(m, 20, 1)) {
    EXPECT_EQ(s.provenance, Provenance::synthetic);
    EXPECT_EQ(s.label, 1);
  }
}

TEST(Sample, MarginalFidelityKs) {
  const auto train = rows(2000, 0, 8, true);
  const auto out = sample(fit(train, 0), 5000, 11);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_LE(oracles::ks_statistic(column(train, j), column(out, j)), 0.05) << j;
}

TEST(Sample, LatentCorrelationFidelity) {
  const auto train = rows(2000, 0, 8, true);
  const auto model = fit(train, 0);
  const auto out = sample(model, 5000, 12);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      const auto zi = normal_scores(column(out, i));
      const auto zj = normal_scores(column(out, j));
      EXPECT_LE(std::abs(oracles::pearson(zi, zj) - model.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))), 0.1);
    }
  }
}

TEST(Sample, WithinTrainingRange) {
  const auto train = rows(200, 1, 13);
  const auto out = sample(fit(train, 1), 3000, 14);
  for (std::size_t j = 0; j < 3; ++j) {
    const auto c = column(train, j);
    const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
    for (const auto& s : out) {
      EXPECT_GE(s.x[j], *lo);
      EXPECT_LE(s.x[j], *hi);
    }
  }
}

TEST(Jitter, ResamplesWithSmallNoise) {
  const auto train = mixed(50, 3);
  const auto out = jitter_sample(train, 1, 30, 5);
  ASSERT_EQ(out.size(), 30u);
  for (const auto& s : out) {
    EXPECT_EQ(s.label, 1);
    EXPECT_EQ(s.provenance, Provenance::synthetic);
  }
  EXPECT_EQ(jitter_sample(train, 1, 30, 5), out);
}

TEST(PlanBalance, WorkedExamples) {
  auto p = plan_balance(1, 99, 0.5, 1.0);
  EXPECT_EQ(p.total, 198u);
  EXPECT_EQ(p.positives, 99u);
  EXPECT_EQ(p.add_positive, 98u);
  EXPECT_EQ(p.add_negative, 0u);

  p = plan_balance(25, 75, 0.25, 1.0);
  EXPECT_EQ(p.total, 100u);
  EXPECT_EQ(p.add_positive, 0u);
  EXPECT_EQ(p.add_negative, 0u);

  p = plan_balance(10, 90, 0.25, 2.0);
  EXPECT_EQ(p.total, 200u);
  EXPECT_EQ(p.positives, 50u);
  EXPECT_EQ(p.add_positive, 40u);
  EXPECT_EQ(p.add_negative, 60u);
}

TEST(PlanBalance, UnreachableNamesMinimum) {
  try {
    plan_balance(40, 60, 0.25, 1.0);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("0.4"), std::string::npos) << e.what();
  }
}

TEST(PlanBalance, ProportionWithinOneOverTotal) {
  Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const std::size_t pos = 1 + rng.below(30);
    const std::size_t neg = 1 + rng.below(300);
    const double rho = std::vector<double>{0.1, 0.25, 0.5}[rng.below(3)];
    const double m = 1.0 + static_cast<double>(rng.below(3));
    BalancePlan p;
    try {
      p = plan_balance(pos, neg, rho, m);
    } catch (const PreconditionError&) {
      EXPECT_GT(static_cast<double>(pos), rho * std::llround(m * static_cast<double>(pos + neg)) + 0.5);
      continue;
    }
    EXPECT_LE(std::abs(static_cast<double>(p.positives) / p.total - rho), 1.0 / p.total);
    EXPECT_GE(p.total, static_cast<std::size_t>(std::llround(m * static_cast<double>(pos + neg))));
    EXPECT_EQ(p.positives, pos + p.add_positive);
    EXPECT_EQ(p.total - p.positives, neg + p.add_negative);
  }
}

TEST(Balance, KeepsRealRowsAndHitsTarget) {
  const auto train = mixed(90, 10);
  const auto r = balance(train, 0.25, 2.0, 77);
  ASSERT_EQ(r.samples.size(), 200u);
  for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(r.samples[i], train[i]);
  std::size_t pos = 0;
  for (const auto& s : r.samples) pos += s.label;
  EXPECT_EQ(pos, 50u);
  EXPECT_EQ(r.positive_synthesizer, "copula");
  EXPECT_EQ(r.negative_synthesizer, "copula");
}

TEST(Balance, NoOpWhenAlreadyAtTarget) {
  const auto train = mixed(75, 25);
  const auto r = balance(train, 0.25, 1.0, 1);
  EXPECT_EQ(r.samples, train);
  EXPECT_EQ(r.positive_synthesizer, "none");
}

TEST(Balance, TinyClassFallsBackToJitter) {
  const auto train = mixed(99, 1);
  const auto r = balance(train, 0.5, 1.0, 3);
  EXPECT_EQ(r.samples.size(), 198u);
  EXPECT_EQ(r.positive_synthesizer, "jitter");
}

TEST(Balance, SingleClassIsError) { EXPECT_THROW(balance(rows(10, 0, 1), 0.5, 1.0, 1), PreconditionError); }
