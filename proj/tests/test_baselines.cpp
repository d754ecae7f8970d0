#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "nacl/baselines.hpp"
#include "nacl/expectation.hpp"
#include "oracles.hpp"

using namespace nacl;

namespace {

BinaryDataset column(std::vector<Bit> values) {
  BinaryDataset d;
  d.num_features = 1;
  for (Bit v : values) d.rows.push_back({v});
  return d;
}

// Sorted-middle oracle: element N/2 of the sorted column.
double sorted_median(std::vector<Bit> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(Imputer, ColumnStatistics) {
  const auto d = column({1, 1, 1, 0});
  EXPECT_DOUBLE_EQ(fit_imputer(d, ImputerKind::Mean).fill[0], 0.75);
  EXPECT_DOUBLE_EQ(fit_imputer(d, ImputerKind::Median).fill[0], 1.0);
  EXPECT_DOUBLE_EQ(fit_imputer(d, ImputerKind::Min).fill[0], 0.0);
  EXPECT_DOUBLE_EQ(fit_imputer(d, ImputerKind::Max).fill[0], 1.0);
  EXPECT_DOUBLE_EQ(fit_imputer(column({0, 1, 0, 1}), ImputerKind::Median).fill[0], 1.0);
  EXPECT_DOUBLE_EQ(fit_imputer(column({1, 1, 1}), ImputerKind::Min).fill[0], 1.0);
  EXPECT_DOUBLE_EQ(fit_imputer(column({0, 0}), ImputerKind::Max).fill[0], 0.0);
}

TEST(Imputer, MedianMatchesSortedMiddleAndOrdering) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<Bit> v(1 + rng() % 9);
    for (auto& b : v) b = static_cast<Bit>(rng() & 1u);
    const auto d = column(v);
    const double med = fit_imputer(d, ImputerKind::Median).fill[0];
    EXPECT_EQ(med, sorted_median(v));
    EXPECT_LE(fit_imputer(d, ImputerKind::Min).fill[0], med);
    EXPECT_LE(med, fit_imputer(d, ImputerKind::Max).fill[0]);
  }
}

TEST(Imputer, Impute) {
  BinaryDataset d;
  d.num_features = 2;
  d.rows = {{1, 0}, {1, 1}, {1, 0}, {0, 1}};
  const auto imp = fit_imputer(d, ImputerKind::Mean);
  PartialObservation y;
  y.set(1, 1);
  EXPECT_EQ(impute(imp, y, 2), (std::vector<double>{0.75, 1.0}));
  EXPECT_EQ(impute(imp, {}, 2), imp.fill);
  PartialObservation full;
  full.set(0, 0);
  full.set(1, 1);
  EXPECT_EQ(impute(imp, full, 2), (std::vector<double>{0.0, 1.0}));
  EXPECT_THROW(impute(imp, y, 3), dimension_error);
}

TEST(Imputer, EmptyTrainingDataThrows) { EXPECT_THROW(fit_imputer(column({}), ImputerKind::Mean), dimension_error); }

TEST(Imputer, JsonRoundTrip) {
  const Imputer imp{ImputerKind::Median, {1.0, 0.0, 1.0}};
  const auto back = imputer_from_json(to_json(imp));
  EXPECT_EQ(back.kind, imp.kind);
  EXPECT_EQ(back.fill, imp.fill);
  EXPECT_THROW(imputer_from_json(R"({"type":"imputer","kind":"mode","num_features":1,"fill":[1]})"),
               std::invalid_argument);
}

TEST(Imputer, MeanImputationIsLinearExpectation) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 8;
    auto d = oracle::sample(oracle::random_nb(rng, n, 2), 40, rng);
    const auto imp = fit_imputer(d, ImputerKind::Mean);
    std::vector<double> w(n + 1);
    for (double& v : w) v = std::uniform_real_distribution<double>(-2, 2)(rng);
    const auto y = oracle::to_partial(oracle::random_partial(rng, oracle::random_bits(rng, n)));
    const auto x = impute(imp, y, n);
    double score = w[0];
    for (std::size_t i = 0; i < n; ++i) score += w[i + 1] * x[i];
    EXPECT_NEAR(score, linear_expected_prediction(w, imp.fill, y), 1e-12);
  }
}

TEST(MlNb, SmoothedCounts) {
  BinaryDataset d = column({1, 0});
  d.labels = std::vector<std::size_t>{1, 0};
  const auto nb = fit_ml_nb(d, 1.0);
  EXPECT_DOUBLE_EQ(nb.cond(1, 0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(nb.cond(0, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(nb.prior(0), 0.5);

  const auto smooth = fit_ml_nb(d, 1e9);
  EXPECT_NEAR(smooth.cond(1, 0), 0.5, 1e-8);
  EXPECT_NEAR(smooth.cond(0, 0), 0.5, 1e-8);
}

TEST(MlNb, SmoothingKeepsParametersOpen) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    BinaryDataset d;
    d.num_features = 4;
    d.labels.emplace();
    for (int j = 0; j < 5; ++j) {
      d.rows.push_back(oracle::to_bits(oracle::random_bits(rng, 4)));
      d.labels->push_back(rng() % 3);
    }
    EXPECT_TRUE(validate_nb(fit_ml_nb(d, 0.5, 3)).ok());
  }
}

TEST(MlNb, UnsmoothedDegenerateDataFails) {
  BinaryDataset d = column({1, 1});
  d.labels = std::vector<std::size_t>{1, 0};
  EXPECT_THROW(fit_ml_nb(d, 0.0), numerical_error);
  d.labels.reset();
  EXPECT_THROW(fit_ml_nb(d), dimension_error);
}
